// morel: run offline model-based experiments from a key = value config.
//
//   morel run <config>
//   morel validate <config>
//   morel theory-suite [--instances N] [--seed S]
//   morel report <dir>
//
// Exit codes: 0 ok, 1 invalid config, 2 runtime failure, 3 theory violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "morel/config.hpp"
#include "morel/runner.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;
constexpr int kViolation = 3;

int report_config_error(const morel::ConfigError& e) {
  std::cerr << "invalid config:\n";
  for (const morel::ConfigIssue& i : e.issues()) std::cerr << "  " << i.key << ": " << i.message << '\n';
  return kInvalid;
}

int execute(const morel::RunConfig& config) {
  try {
    const morel::RunOutcome out = morel::run_experiment(config, std::cerr);
    std::cout << out.output_dir << '\n';
    return out.violation ? kViolation : kOk;
  } catch (const morel::RunFailure& e) {
    std::cerr << "run failed in " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
  }
  return kRuntime;
}

int report(const std::string& dir) {
  const std::filesystem::path path = std::filesystem::path(dir) / "summary.json";
  std::ifstream in(path);
  if (!in) {
    const std::filesystem::path failure = std::filesystem::path(dir) / "failure.json";
    if (std::filesystem::exists(failure)) {
      std::ifstream f(failure);
      std::cout << "run failed:\n" << nlohmann::json::parse(f).dump(2) << '\n';
      return kRuntime;
    }
    std::cerr << "no summary.json in " << dir << '\n';
    return kRuntime;
  }
  nlohmann::json summary;
  try {
    summary = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << path.string() << ": " << e.what() << '\n';
    return kRuntime;
  }
  std::size_t width = 0;
  for (const auto& item : summary.items()) width = std::max(width, item.key().size());
  for (const auto& item : summary.items()) {
    std::cout << item.key() << std::string(width + 2 - item.key().size(), ' ');
    if (item.value().is_string()) {
      std::cout << item.value().get<std::string>() << '\n';
    } else {
      std::cout << item.value().dump() << '\n';
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline model-based RL with a pessimistic learned MDP"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "config file")->required();

  auto* validate = app.add_subcommand("validate", "check a config and print it with defaults filled in");
  validate->add_option("config", config_path, "config file")->required();

  int instances = 100;
  std::uint64_t seed = 0;
  auto* theory = app.add_subcommand("theory-suite", "check the value bounds on random tabular instances");
  theory->add_option("--instances", instances, "random instances for the value bounds")
      ->check(CLI::PositiveNumber);
  theory->add_option("--seed", seed, "root seed");

  std::string dir;
  auto* rep = app.add_subcommand("report", "print the summary of a finished run");
  rep->add_option("dir", dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return execute(morel::RunConfig::load(config_path));
    if (*validate) {
      std::cout << morel::RunConfig::load(config_path).resolved();
      return kOk;
    }
    if (*theory) {
      morel::RunConfig config = morel::RunConfig::parse(
          "experiment = theory-suite\nseed = " + std::to_string(seed) + "\n", "theory-suite");
      config.set("theory.instances", std::to_string(instances));
      return execute(config);
    }
    if (*rep) return report(dir);
  } catch (const morel::ConfigError& e) {
    return report_config_error(e);
  }
  return kOk;
}
