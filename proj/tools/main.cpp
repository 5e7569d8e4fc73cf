#include "mmd_drccp/experiments.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace mmd_drccp;

int main(int argc, char** argv) {
  CLI::App app{"Kernel-MMD distributionally robust chance-constrained programs"};
  app.require_subcommand(1);

  CommandOptions opt;
  std::int64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "YAML configuration file")->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed-override", seed, "replace the configured seeds");
  };

  auto* radius = app.add_subcommand("radius", "compute the ambiguity radius of the configured sample");
  add_common(radius);
  auto* solve = app.add_subcommand("solve", "solve the configured program, writes solution.json");
  add_common(solve);
  auto* eval = app.add_subcommand("eval", "out-of-sample risk of a solution, writes eval.csv");
  add_common(eval);
  eval->add_option("--solution", opt.solution, "solution record (default <out>/solution.json)");
  auto* port = app.add_subcommand("reproduce-portfolio", "run the portfolio sweep, writes results.csv and summary.csv");
  add_common(port);
  port->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  for (auto* sub : {radius, solve, eval, port}) {
    if (sub->parsed() && sub->count("--seed-override")) opt.seed_override = seed;
  }

  if (radius->parsed()) return cmd_radius(opt, std::cout, std::cerr);
  if (solve->parsed()) return cmd_solve(opt, std::cout, std::cerr);
  if (eval->parsed()) return cmd_eval(opt, std::cout, std::cerr);
  return cmd_reproduce_portfolio(opt, std::cout, std::cerr);
}
