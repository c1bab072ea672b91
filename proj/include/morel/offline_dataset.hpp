#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "morel/simulation.hpp"

namespace morel {

struct Transition {
  int episode = 0;
  int t = 0;
  Vec s;
  Vec a;
  double r = 0.0;
  Vec s_next;
  /// Environment signalled termination (horizon truncation is not `done`).
  bool done = false;

  bool operator==(const Transition& other) const;
};

/// Which policy produced a contiguous block of transitions.
struct Segment {
  std::string policy;
  std::size_t count = 0;

  bool operator==(const Segment&) const = default;
};

struct DatasetMeta {
  std::string env;
  double gamma = 0.0;
  double r_max = 0.0;
  std::string strategy;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  int state_dim = 0;
  int action_dim = 0;
  std::vector<Segment> segments;

  bool operator==(const DatasetMeta&) const = default;
};

struct OfflineDataset {
  DatasetMeta meta;
  std::vector<Transition> transitions;

  std::size_t size() const { return transitions.size(); }
  double r_min() const;
  /// Checks meta.n against the record count and every |r| <= r_max.
  void validate() const;

  bool operator==(const OfflineDataset&) const = default;
};

/// Normalization statistics. Standard deviations are population statistics
/// floored at kSigmaFloor.
struct NormStats {
  static constexpr double kSigmaFloor = 1e-8;

  Vec mu_s, sigma_s;
  Vec mu_a, sigma_a;
  Vec sigma_delta;

  bool operator==(const NormStats& other) const;
};

NormStats compute_stats(const OfflineDataset& dataset);

/// Collection strategy: Pure uses the behavior policy throughout; the mixed
/// strategies split the data 40% behavior, 40% noisy behavior, 20% random.
struct Strategy {
  enum class Noise { none, eps, gauss };

  std::string name = "Pure";
  Noise noise = Noise::none;
  /// q for eps, beta for gauss.
  double level = 0.0;

  /// Accepts Pure, Eps-1, Eps-3, Gauss-1, Gauss-3 (case-insensitive).
  static Strategy parse(std::string_view name);
};

/// Behavior policy with collection noise: eps plays `random` with
/// probability q, gauss adds N(0, beta^2) to each action coordinate.
class NoisyBehavior : public Policy {
 public:
  NoisyBehavior(const Policy& base, const Policy& random, Strategy::Noise mode, double level)
      : base_(base), random_(random), mode_(mode), level_(level) {}
  Vec act(const Vec& state, Rng& rng) const override;
  Vec mean_action(const Vec& state) const override { return base_.mean_action(state); }

 private:
  const Policy& base_;
  const Policy& random_;
  Strategy::Noise mode_;
  double level_;
};

struct CollectOptions {
  /// Steps per episode; 0 means env.horizon().
  int episode_length = 0;
  std::string behavior_name = "behavior";
};

/// Collects `n` transitions. `random` is the untrained policy used by the
/// mixed strategies (and by eps noise). Episodes are cut short at segment
/// boundaries so each sub-policy's count is exact. Episode e draws from
/// Rng(seed).split("collect").split(e).
OfflineDataset collect(const Environment& env, const Strategy& strategy, const Policy& behavior,
                       const Policy& random, std::size_t n, std::uint64_t seed,
                       const CollectOptions& options = {});

/// Start states (t == 0 records), in dataset order.
std::vector<Vec> start_states(const OfflineDataset& dataset);

/// Empirical start distribution over tabular states (state vector holds the
/// index). Throws if the dataset has no trajectory starts.
std::vector<double> empirical_rho0(const OfflineDataset& dataset, int n_states);

/// Uniform resampling of recorded start states.
class StartSampler {
 public:
  explicit StartSampler(const OfflineDataset& dataset);
  Vec sample(Rng& rng) const;
  std::size_t size() const { return starts_.size(); }

 private:
  std::vector<Vec> starts_;
};

inline constexpr int kDatasetVersion = 1;

void save(const OfflineDataset& dataset, std::ostream& out);
void save(const OfflineDataset& dataset, const std::string& path);
/// Throws std::runtime_error naming the record (and line) on malformed input.
OfflineDataset load(std::istream& in, const std::string& source = "dataset");
OfflineDataset load_dataset(const std::string& path);

}  // namespace morel
