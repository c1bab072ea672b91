#include "morel/offline_dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace morel {

bool Transition::operator==(const Transition& o) const {
  return episode == o.episode && t == o.t && s == o.s && a == o.a && r == o.r &&
         s_next == o.s_next && done == o.done;
}

bool NormStats::operator==(const NormStats& o) const {
  return mu_s == o.mu_s && sigma_s == o.sigma_s && mu_a == o.mu_a && sigma_a == o.sigma_a &&
         sigma_delta == o.sigma_delta;
}

double OfflineDataset::r_min() const {
  if (transitions.empty()) throw std::invalid_argument("r_min: empty dataset");
  double lo = transitions.front().r;
  for (const Transition& tr : transitions) lo = std::min(lo, tr.r);
  return lo;
}

void OfflineDataset::validate() const {
  if (meta.n != transitions.size()) {
    std::ostringstream msg;
    msg << "dataset header declares " << meta.n << " transitions but holds "
        << transitions.size();
    throw std::invalid_argument(msg.str());
  }
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    if (std::abs(transitions[i].r) > meta.r_max) {
      std::ostringstream msg;
      msg << "transition " << i << ": reward " << transitions[i].r << " exceeds r_max "
          << meta.r_max;
      throw std::invalid_argument(msg.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Statistics

NormStats compute_stats(const OfflineDataset& dataset) {
  if (dataset.transitions.empty()) throw std::invalid_argument("compute_stats: empty dataset");
  const Eigen::Index ds = dataset.transitions.front().s.size();
  const Eigen::Index da = dataset.transitions.front().a.size();
  // two passes: means first, then centred squares, so large offsets do not
  // cancel catastrophically
  Vec sum_s = Vec::Zero(ds), sum_a = Vec::Zero(da), sum_d = Vec::Zero(ds);
  for (const Transition& tr : dataset.transitions) {
    sum_s += tr.s;
    sum_a += tr.a;
    sum_d += tr.s_next - tr.s;
  }
  const double n = static_cast<double>(dataset.size());
  NormStats st;
  st.mu_s = sum_s / n;
  st.mu_a = sum_a / n;
  const Vec mu_d = sum_d / n;
  Vec vs = Vec::Zero(ds), va = Vec::Zero(da), vd = Vec::Zero(ds);
  for (const Transition& tr : dataset.transitions) {
    vs += (tr.s - st.mu_s).cwiseAbs2();
    va += (tr.a - st.mu_a).cwiseAbs2();
    vd += (tr.s_next - tr.s - mu_d).cwiseAbs2();
  }
  st.sigma_s = (vs / n).cwiseSqrt().cwiseMax(NormStats::kSigmaFloor);
  st.sigma_a = (va / n).cwiseSqrt().cwiseMax(NormStats::kSigmaFloor);
  st.sigma_delta = (vd / n).cwiseSqrt().cwiseMax(NormStats::kSigmaFloor);
  return st;
}

// ---------------------------------------------------------------------------
// Collection

Vec NoisyBehavior::act(const Vec& s, Rng& rng) const {
  switch (mode_) {
    case Strategy::Noise::none:
      return base_.act(s, rng);
    case Strategy::Noise::eps:
      return rng.uniform() < level_ ? random_.act(s, rng) : base_.act(s, rng);
    case Strategy::Noise::gauss: {
      Vec a = base_.act(s, rng);
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += level_ * rng.normal();
      return a;
    }
  }
  return base_.act(s, rng);
}

Strategy Strategy::parse(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  Strategy s;
  if (lower == "pure") {
    s.name = "Pure";
  } else if (lower == "eps-1" || lower == "eps-3") {
    s.name = lower == "eps-1" ? "Eps-1" : "Eps-3";
    s.noise = Noise::eps;
    s.level = lower == "eps-1" ? 0.1 : 0.3;
  } else if (lower == "gauss-1" || lower == "gauss-3") {
    s.name = lower == "gauss-1" ? "Gauss-1" : "Gauss-3";
    s.noise = Noise::gauss;
    s.level = lower == "gauss-1" ? 0.1 : 0.3;
  } else {
    throw std::invalid_argument("unknown collection strategy '" + std::string(name) +
                                "' (expected Pure, Eps-1, Eps-3, Gauss-1 or Gauss-3)");
  }
  return s;
}

namespace {

std::string format_level(double level) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", level);
  return buf;
}

}  // namespace

OfflineDataset collect(const Environment& env, const Strategy& strategy, const Policy& behavior,
                       const Policy& random, std::size_t n, std::uint64_t seed,
                       const CollectOptions& options) {
  if (n < 1) throw std::invalid_argument("collect: n must be >= 1");
  const int length = options.episode_length > 0 ? options.episode_length : env.horizon();

  const NoisyBehavior noisy(behavior, random, strategy.noise, strategy.level);
  struct Block {
    const Policy* policy;
    std::string name;
    std::size_t count;
  };
  std::vector<Block> blocks;
  if (strategy.noise == Strategy::Noise::none) {
    blocks.push_back({&behavior, options.behavior_name, n});
  } else {
    const auto n_b = static_cast<std::size_t>(std::llround(0.4 * static_cast<double>(n)));
    const std::size_t n_noisy = std::min(n - n_b, n_b);
    const bool is_eps = strategy.noise == Strategy::Noise::eps;
    blocks.push_back({&behavior, options.behavior_name, n_b});
    blocks.push_back({&noisy,
                      options.behavior_name + (is_eps ? "+eps(" : "+gauss(") +
                          format_level(strategy.level) + ")",
                      n_noisy});
    blocks.push_back({&random, "random", n - n_b - n_noisy});
  }

  OfflineDataset data;
  data.meta.env = env.id();
  data.meta.gamma = env.gamma();
  data.meta.r_max = env.r_max();
  data.meta.strategy = strategy.name;
  data.meta.seed = seed;
  data.meta.n = n;
  data.meta.state_dim = env.state_dim();
  data.meta.action_dim = env.action_dim();
  data.transitions.reserve(n);

  const Rng root = Rng(seed).split("collect");
  int episode = 0;
  for (const Block& block : blocks) {
    data.meta.segments.push_back({block.name, block.count});
    std::size_t remaining = block.count;
    while (remaining > 0) {
      Rng rng = root.split(static_cast<std::uint64_t>(episode));
      Vec s = env.reset(rng, static_cast<std::size_t>(episode));
      for (int t = 0; t < length && remaining > 0; ++t) {
        Vec a = env.clip_action(block.policy->act(s, rng));
        StepResult step = env.step(s, a, rng, static_cast<std::size_t>(episode));
        Transition tr;
        tr.episode = episode;
        tr.t = t;
        tr.s = s;
        tr.a = std::move(a);
        tr.r = step.reward;
        tr.s_next = step.next_state;
        tr.done = step.done;
        data.transitions.push_back(std::move(tr));
        --remaining;
        if (step.done) break;
        s = std::move(step.next_state);
      }
      ++episode;
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Start distributions

std::vector<Vec> start_states(const OfflineDataset& dataset) {
  std::vector<Vec> starts;
  for (const Transition& tr : dataset.transitions) {
    if (tr.t == 0) starts.push_back(tr.s);
  }
  return starts;
}

std::vector<double> empirical_rho0(const OfflineDataset& dataset, int n_states) {
  const std::vector<Vec> starts = start_states(dataset);
  if (starts.empty()) throw std::invalid_argument("empirical_rho0: dataset has no trajectory starts");
  std::vector<double> rho(n_states, 0.0);
  for (const Vec& s : starts) {
    const int i = static_cast<int>(s[0]);
    if (i < 0 || i >= n_states) throw std::invalid_argument("empirical_rho0: state out of range");
    rho[i] += 1.0;
  }
  for (double& p : rho) p /= static_cast<double>(starts.size());
  return rho;
}

StartSampler::StartSampler(const OfflineDataset& dataset) : starts_(start_states(dataset)) {
  if (starts_.empty()) throw std::invalid_argument("StartSampler: dataset has no trajectory starts");
}

Vec StartSampler::sample(Rng& rng) const { return starts_[rng.below(starts_.size())]; }

// ---------------------------------------------------------------------------
// Serialization

namespace {

void put_double(std::string& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  out += buf;
}

void put_vec(std::string& out, const Vec& v) {
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    put_double(out, v[i]);
  }
  out += ']';
}

Vec get_vec(const nlohmann::json& j, const char* key, int dim) {
  const nlohmann::json& arr = j.at(key);
  if (!arr.is_array() || static_cast<int>(arr.size()) != dim) {
    throw std::runtime_error(std::string("field '") + key + "' must be an array of length " +
                             std::to_string(dim));
  }
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = arr[i].get<double>();
  return v;
}

}  // namespace

void save(const OfflineDataset& d, std::ostream& out) {
  std::string line = "{\"version\":" + std::to_string(kDatasetVersion);
  line += ",\"env\":" + nlohmann::json(d.meta.env).dump();
  line += ",\"gamma\":";
  put_double(line, d.meta.gamma);
  line += ",\"r_max\":";
  put_double(line, d.meta.r_max);
  line += ",\"strategy\":" + nlohmann::json(d.meta.strategy).dump();
  line += ",\"seed\":" + std::to_string(d.meta.seed);
  line += ",\"n\":" + std::to_string(d.meta.n);
  line += ",\"episode_starts\":true";
  line += ",\"state_dim\":" + std::to_string(d.meta.state_dim);
  line += ",\"action_dim\":" + std::to_string(d.meta.action_dim);
  line += ",\"segments\":[";
  for (std::size_t i = 0; i < d.meta.segments.size(); ++i) {
    if (i) line += ',';
    line += "{\"policy\":" + nlohmann::json(d.meta.segments[i].policy).dump() +
            ",\"count\":" + std::to_string(d.meta.segments[i].count) + "}";
  }
  line += "]}\n";
  out << line;
  for (const Transition& tr : d.transitions) {
    line = "{\"episode\":" + std::to_string(tr.episode) + ",\"t\":" + std::to_string(tr.t) +
           ",\"s\":";
    put_vec(line, tr.s);
    line += ",\"a\":";
    put_vec(line, tr.a);
    line += ",\"r\":";
    put_double(line, tr.r);
    line += ",\"s_next\":";
    put_vec(line, tr.s_next);
    line += tr.done ? ",\"done\":true}\n" : ",\"done\":false}\n";
    out << line;
  }
}

void save(const OfflineDataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save(dataset, out);
  if (!out) throw std::runtime_error("write failed for " + path);
}

OfflineDataset load(std::istream& in, const std::string& source) {
  OfflineDataset d;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(source + ": missing header record");
  try {
    const nlohmann::json h = nlohmann::json::parse(line);
    const int version = h.at("version").get<int>();
    if (version != kDatasetVersion) {
      throw std::runtime_error("incompatible dataset version " + std::to_string(version) +
                               " (this build reads version " +
                               std::to_string(kDatasetVersion) + ")");
    }
    if (!h.at("episode_starts").get<bool>()) {
      throw std::runtime_error("dataset lacks trajectory-start markers");
    }
    d.meta.env = h.at("env").get<std::string>();
    d.meta.gamma = h.at("gamma").get<double>();
    d.meta.r_max = h.at("r_max").get<double>();
    d.meta.strategy = h.at("strategy").get<std::string>();
    d.meta.seed = h.at("seed").get<std::uint64_t>();
    d.meta.n = h.at("n").get<std::size_t>();
    d.meta.state_dim = h.at("state_dim").get<int>();
    d.meta.action_dim = h.at("action_dim").get<int>();
    for (const auto& seg : h.at("segments")) {
      d.meta.segments.push_back({seg.at("policy").get<std::string>(),
                                 seg.at("count").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(source + ": malformed header (line 1): " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(source + ": " + e.what());
  }

  d.transitions.reserve(d.meta.n);
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      Transition tr;
      tr.episode = j.at("episode").get<int>();
      tr.t = j.at("t").get<int>();
      tr.s = get_vec(j, "s", d.meta.state_dim);
      tr.a = get_vec(j, "a", d.meta.action_dim);
      tr.r = j.at("r").get<double>();
      tr.s_next = get_vec(j, "s_next", d.meta.state_dim);
      tr.done = j.at("done").get<bool>();
      d.transitions.push_back(std::move(tr));
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << source << ": malformed record " << record << " (line " << record + 2
          << "): " << e.what();
      throw std::runtime_error(msg.str());
    }
    ++record;
  }
  if (record != d.meta.n) {
    std::ostringstream msg;
    msg << source << ": truncated at record " << record << " (header declares " << d.meta.n
        << ")";
    throw std::runtime_error(msg.str());
  }
  return d;
}

OfflineDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  return load(in, path);
}

}  // namespace morel
