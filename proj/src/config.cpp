#include "morel/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace morel {

namespace {

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::ostringstream out;
  out << issues.size() << " config problem" << (issues.size() == 1 ? "" : "s");
  for (const ConfigIssue& i : issues) out << "\n  " << i.key << ": " << i.message;
  return out.str();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

bool parse_int(const std::string& s, std::int64_t& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end && !s.empty();
}

bool parse_uint(const std::string& s, std::uint64_t& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end && !s.empty();
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size() && std::isfinite(out);
}

const KeySpec* find_spec(const std::string& key) {
  for (const KeySpec& k : RunConfig::schema()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

/// Empty string when valid.
std::string check_value(const KeySpec& spec, const std::string& v) {
  std::int64_t i = 0;
  std::uint64_t u = 0;
  double d = 0.0;
  switch (spec.type) {
    case KeyType::string:
      return {};
    case KeyType::choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), v) != spec.choices.end()) return {};
      {
        std::string msg = "'" + v + "' is not one of";
        for (const std::string& c : spec.choices) msg += " " + c;
        return msg;
      }
    case KeyType::integer:
      return parse_int(v, i) ? std::string() : "expected an integer, got '" + v + "'";
    case KeyType::unsigned_integer:
      return parse_uint(v, u) ? std::string() : "expected a nonnegative integer, got '" + v + "'";
    case KeyType::real:
      return parse_real(v, d) ? std::string() : "expected a number, got '" + v + "'";
    case KeyType::int_list:
      for (const std::string& item : split_list(v)) {
        if (!parse_int(item, i)) return "expected a comma-separated integer list, got '" + v + "'";
      }
      return {};
    case KeyType::real_list:
      if (v.empty()) return "expected a comma-separated number list";
      for (const std::string& item : split_list(v)) {
        if (!parse_real(item, d)) return "expected a comma-separated number list, got '" + v + "'";
      }
      return {};
    case KeyType::string_list:
      if (v.empty()) return "expected a comma-separated list";
      for (const std::string& item : split_list(v)) {
        if (!spec.choices.empty() &&
            std::find(spec.choices.begin(), spec.choices.end(), item) == spec.choices.end()) {
          return "'" + item + "' is not an allowed entry";
        }
      }
      return {};
  }
  return {};
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

const std::vector<KeySpec>& RunConfig::schema() {
  using K = KeyType;
  static const std::vector<KeySpec> keys = {
      {"experiment", K::choice, "", true,
       {"morel", "naive-mbrl", "theory-suite", "counterexample", "ablation-beta", "dataset-quality"},
       "what to run"},
      {"seed", K::unsigned_integer, "", true, {}, "root seed"},
      {"output.dir", K::string, "auto", false, {}, "auto = <experiment>-<env.kind>-s<seed> under the output root"},

      {"env.kind", K::choice, "point-mass", false, {"point-mass", "pendulum", "chain", "grid"}, ""},

      {"dataset.path", K::string, "", false, {}, "load instead of collecting"},
      {"dataset.strategy", K::choice, "Pure", false, {"Pure", "Eps-1", "Eps-3", "Gauss-1", "Gauss-3"}, ""},
      {"dataset.behavior", K::choice, "partial", false, {"partial", "random", "uniform"}, "uniform: tabular only"},
      {"dataset.n", K::unsigned_integer, "20000", false, {}, ""},
      {"dataset.episode_length", K::integer, "0", false, {}, "0 = environment horizon (tabular: 30)"},
      {"dataset.seed", K::integer, "-1", false, {}, "-1 = seed"},

      {"model.layers", K::integer, "2", false, {}, ""},
      {"model.width", K::integer, "64", false, {}, ""},
      {"model.epochs", K::integer, "20", false, {}, ""},
      {"model.step_size", K::real, "0.001", false, {}, ""},
      {"model.batch_size", K::integer, "256", false, {}, ""},
      {"model.K", K::integer, "4", false, {}, "ensemble size"},
      {"model.holdout", K::real, "0.1", false, {}, ""},
      {"model.noise_scale", K::real, "0.5", false, {}, ""},

      {"usad.beta", K::real, "6", false, {}, "threshold = mu_d + beta sigma_d"},
      {"usad.tabular", K::choice, "count", false, {"count", "oracle"}, ""},
      {"usad.n_min", K::integer, "5", false, {}, ""},
      {"usad.alpha", K::real, "0.1", false, {}, ""},

      {"pmdp.kappa_mode", K::choice, "offset", false, {"offset", "theory"}, "theory: kappa = r_max"},
      {"pmdp.kappa_offset", K::real, "30", false, {}, "kappa = offset - r_min(D)"},
      {"pmdp.halt_mode", K::choice, "exact-sum", false, {"exact-sum", "single-penalty"}, ""},
      {"pmdp.member_mode", K::choice, "cycle", false, {"cycle", "average"}, ""},

      {"bc.hidden", K::int_list, "32,32", false, {}, ""},
      {"bc.epochs", K::integer, "20", false, {}, ""},
      {"bc.lr", K::real, "0.001", false, {}, ""},
      {"bc.batch_size", K::integer, "256", false, {}, ""},

      {"planner.n_updates", K::integer, "200", false, {}, ""},
      {"planner.n_traj", K::integer, "40", false, {}, ""},
      {"planner.horizon", K::integer, "0", false, {}, "0 = environment horizon"},
      {"planner.cg_iters", K::integer, "25", false, {}, ""},
      {"planner.cg_damping", K::real, "0.0001", false, {}, ""},
      {"planner.step_size", K::real, "0.05", false, {}, "normalized NPG step delta"},
      {"planner.eval_traj", K::integer, "20", false, {}, ""},
      {"planner.log_sigma_init", K::real, "-1", false, {}, ""},
      {"planner.log_sigma_min", K::real, "-2.5", false, {}, ""},
      {"planner.vi_tolerance", K::real, "1e-8", false, {}, "tabular value iteration"},

      {"ablation.betas", K::real_list, "1,2,4,6,8", false, {}, ""},
      {"quality.behaviors", K::string_list, "partial,random", false, {"partial", "random"}, ""},
      {"quality.seeds", K::integer, "5", false, {}, ""},

      {"theory.instances", K::integer, "100", false, {}, ""},
      {"theory.hitting_instances", K::integer, "500", false, {}, ""},
      {"theory.improvement_n", K::int_list, "500,2000,10000", false, {}, ""},
      {"theory.improvement_seeds", K::integer, "10", false, {}, ""},

      {"counterexample.gamma", K::real, "0.95", false, {}, ""},
      {"counterexample.epsilon", K::real, "0.01", false, {}, ""},
      {"counterexample.r_max", K::real, "1", false, {}, ""},
      {"counterexample.n", K::unsigned_integer, "20000", false, {}, ""},
      {"counterexample.episode_length", K::integer, "40", false, {}, ""},
  };
  return keys;
}

RunConfig RunConfig::parse(std::string_view text, const std::string& source) {
  std::vector<ConfigIssue> issues;
  RunConfig cfg;
  std::map<std::string, int> seen;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        issues.push_back({where, "unterminated section header"});
        continue;
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({where, "expected 'key = value'"});
      continue;
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const KeySpec* spec = find_spec(key);
    if (!spec) {
      issues.push_back({key, "unknown key (" + where + ")"});
      continue;
    }
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh) {
      issues.push_back({key, "duplicate (" + where + ", first at line " + std::to_string(it->second) + ")"});
      continue;
    }
    if (std::string problem = check_value(*spec, value); !problem.empty()) {
      issues.push_back({key, problem});
      continue;
    }
    cfg.values_[key] = value;
  }
  for (const KeySpec& spec : schema()) {
    if (cfg.values_.count(spec.key)) continue;
    if (spec.required) {
      if (!seen.count(spec.key)) issues.push_back({spec.key, "missing required key"});
      continue;
    }
    cfg.values_[spec.key] = spec.default_value;
  }
  if (issues.empty()) {
    const std::string& kind = cfg.values_["env.kind"];
    const bool tabular = kind == "chain" || kind == "grid";
    const std::string& experiment = cfg.values_["experiment"];
    if (!tabular && cfg.values_["dataset.behavior"] == "uniform") {
      issues.push_back({"dataset.behavior", "'uniform' needs a tabular env.kind (chain, grid)"});
    }
    if (tabular && (experiment == "ablation-beta" || experiment == "dataset-quality")) {
      issues.push_back({"env.kind", experiment + " needs a continuous env.kind (point-mass, pendulum)"});
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{path, "cannot open config file"}});
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path);
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::out_of_range("config key '" + key + "' not set");
  return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  std::int64_t v = 0;
  parse_int(get(key), v);
  return v;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  std::uint64_t v = 0;
  parse_uint(get(key), v);
  return v;
}

double RunConfig::get_real(const std::string& key) const {
  double v = 0.0;
  parse_real(get(key), v);
  return v;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  const std::string& v = get(key);
  if (v.empty()) return out;
  for (const std::string& item : split_list(v)) {
    std::int64_t x = 0;
    parse_int(item, x);
    out.push_back(static_cast<int>(x));
  }
  return out;
}

std::vector<double> RunConfig::get_real_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& item : split_list(get(key))) {
    double x = 0.0;
    parse_real(item, x);
    out.push_back(x);
  }
  return out;
}

std::vector<std::string> RunConfig::get_string_list(const std::string& key) const {
  return split_list(get(key));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError({{key, "unknown key"}});
  if (std::string problem = check_value(*spec, value); !problem.empty()) {
    throw ConfigError({{key, problem}});
  }
  values_[key] = value;
}

std::string RunConfig::resolved() const {
  std::ostringstream out;
  for (const KeySpec& spec : schema()) out << spec.key << " = " << get(spec.key) << '\n';
  return out.str();
}

}  // namespace morel
