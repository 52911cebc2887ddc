#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "smflow/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out = "out";
};

int run(const std::string& command, const Options& opt) {
  std::ifstream in(opt.config);
  if (!in) {
    std::cerr << "smflow: cannot open " << opt.config << "\n";
    return 2;
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "smflow: " << opt.config << ": " << e.what() << "\n";
    return 2;
  }
  if (opt.seed) doc["seed"] = *opt.seed;
  if (opt.workers) doc["workers"] = *opt.workers;
  smflow::ExperimentConfig cfg;
  try {
    cfg = smflow::parse_config(doc, command);
  } catch (const smflow::ConfigError& e) {
    std::cerr << "smflow: " << e.what() << "\n";
    return 2;
  }
  try {
    const auto result = smflow::run_experiment(cfg);
    smflow::write_outputs(result, opt.out);
    for (const auto& check : result.summary["checks"]) {
      std::cout << (check["passed"].get<bool>() ? "PASS " : "FAIL ") << check["name"].get<std::string>() << ": "
                << check["detail"].get<std::string>() << "\n";
    }
    std::cout << cfg.command << ": " << (result.passed ? "passed" : "failed") << ", outputs in " << opt.out << "\n";
    return result.passed ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "smflow: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic modified flows: experiment runner"};
  app.require_subcommand(1);
  Options opt;
  std::string chosen;
  for (const auto& name : smflow::available_commands()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", opt.config, "JSON experiment description")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "override the config seed");
    sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->callback([&chosen, name] { chosen = name; });
  }
  CLI11_PARSE(app, argc, argv);
  return run(chosen, opt);
}
