#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "morel/config.hpp"

namespace morel {

/// Failure after the output directory exists. failure.json has been written.
class RunFailure : public std::runtime_error {
 public:
  RunFailure(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunOutcome {
  std::string output_dir;
  nlohmann::json summary;
  /// theory-suite only: some checked inequality failed.
  bool violation = false;
};

/// output.dir, with "auto" expanded to
/// <MOREL_OUTPUT_ROOT or cwd>/<experiment>-<env.kind>-s<seed> (no env.kind for
/// theory-suite and counterexample).
std::string resolve_output_dir(const RunConfig& config);

/// Runs the configured experiment and writes every artifact into the output
/// directory. Progress goes to `log`, one line per planner iteration.
RunOutcome run_experiment(const RunConfig& config, std::ostream& log);

/// 2 r_max (1 - gamma^H) / (1 - gamma): spread of achievable discounted
/// returns over an H-step episode.
double value_range(double r_max, double gamma, int horizon);

}  // namespace morel
