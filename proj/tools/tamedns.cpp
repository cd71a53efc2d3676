#include <iostream>

#include <CLI11.hpp>

#include "tamed/cli.hpp"

int main(int argc, char** argv) {
  using namespace tamed::cli;
  CLI::App app{"tamedns: tamed Navier-Stokes with Poisson noise on the 3-torus"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  std::string out;

  auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    if (config_required) c->required();
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--threads", o.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  };

  common(app.add_subcommand("skeleton", "deterministic skeleton equation for a control"), true);
  common(app.add_subcommand("simulate", "ensemble of small-noise runs"), true);
  common(app.add_subcommand("controlled", "ensemble of controlled small-noise runs"), true);
  common(app.add_subcommand("sweep-eps", "small-noise convergence sweep"), true);
  auto* verify = app.add_subcommand("verify", "run verification reports");
  common(verify, false);
  verify->add_option("selector", o.selector, "skew, leray, taming, energy-h0, energy-h1, monotone-h0, "
                                             "monotone-h1, isometry, thinning, cost or all");
  auto* cost = app.add_subcommand("cost", "print the cost L_T(g) of a control");
  cost->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  cost->add_option("--control", o.control, "control JSON file");
  cost->add_option("--marks", o.marks, "mark weights (default: all 1)")->delimiter(',');
  double horizon = 0.0;
  auto* horizon_opt = cost->add_option("--horizon", horizon, "horizon T (must match the control grid)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : validation_failure;
  }
  o.command = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommands().front();
  if (auto* opt = sub->get_option_no_throw("--seed"); opt && opt->count()) o.seed = seed;
  if (auto* opt = sub->get_option_no_throw("--out"); opt && opt->count()) o.out = out;
  if (horizon_opt->count()) o.horizon = horizon;
  return run(o, std::cout, std::cerr);
}
