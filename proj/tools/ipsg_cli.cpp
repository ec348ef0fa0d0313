#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ipsg/diagnostics.hpp"
#include "ipsg/experiment.hpp"

namespace {

int cmd_run(const std::string& path) {
  const auto cfg = ipsg::load_config_file(path);
  const auto result = ipsg::run_experiment(cfg, &std::cerr);
  std::cout << "wrote " << result.runs.size() << " run(s) to "
            << result.output_dir << "\n";
  if (!result.ok()) {
    std::cerr << "one or more runs failed; see summary.csv\n";
    return 1;
  }
  return 0;
}

int cmd_check(const std::string& path) {
  const auto cfg = ipsg::load_config_file(path);
  if (!cfg.conditions.regime) {
    std::cerr << "config has no 'conditions' section\n";
    return 2;
  }
  const auto data = ipsg::make_instance(cfg.problem);
  const auto problem = ipsg::build_problem(data, cfg.problem);
  bool all_feasible = true;
  for (const auto& spec : ipsg::expand_runs(cfg, problem->num_samples())) {
    const auto report = ipsg::run_conditions(cfg, spec.cfg, *problem);
    std::cout << spec.id << "\n" << report->to_text();
    all_feasible = all_feasible && report->feasible;
  }
  return all_feasible ? 0 : 1;
}

int cmd_gen(const std::string& path, const std::string& out) {
  const auto cfg = ipsg::load_config_file(path);
  ipsg::save_instance_file(ipsg::make_instance(cfg.problem), out);
  std::cout << "wrote " << cfg.problem.kind << " instance to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inertial proximal stochastic subgradient experiments"};
  app.set_version_flag("--version", std::string(IPSG_VERSION));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  auto* run = app.add_subcommand("run", "Run the experiment grid of a config");
  run->add_option("config", config, "JSON config")->required();
  auto* check = app.add_subcommand(
      "check-conditions", "Evaluate the parameter conditions of every run");
  check->add_option("config", config, "JSON config")->required();
  auto* gen = app.add_subcommand("gen-instance",
                                 "Write the configured problem instance");
  gen->add_option("config", config, "JSON config")->required();
  gen->add_option("-o,--output", out, "Instance file")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config);
    if (*check) return cmd_check(config);
    if (*gen) return cmd_gen(config, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
