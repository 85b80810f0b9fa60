#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "assignkit/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Label assignment toolkit: adaptive anchor assignment, loss "
               "analysis, and a deterministic toy training simulator"};
  app.require_subcommand(1);

  std::string scene_path;
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<std::string> variants;
  int trials = 200;

  CLI::App* assign = app.add_subcommand(
      "assign", "Assign anchors to the ground truths of one scene file");
  assign->add_option("scene", scene_path, "scene JSON file")->required();
  assign->add_option("--config", config_path, "experiment config JSON")
      ->required();
  assign->add_option("--out", out, "output file (default assignment.json)");

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run the training simulator and write metrics");
  simulate->add_option("--config", config_path, "experiment config JSON")
      ->required();
  simulate->add_option("--out", out, "output directory (overrides config)");
  simulate->add_option("--seed", seed, "run seed (overrides config)");

  CLI::App* compare = app.add_subcommand(
      "compare", "Run paired simulations, one per assigner variant");
  compare->add_option("--config", config_path, "experiment config JSON")
      ->required();
  compare->add_option("--variants", variants, "comma-separated variant names")
      ->required()
      ->delimiter(',');
  compare->add_option("--out", out, "output directory (overrides config)");
  compare->add_option("--seed", seed, "run seed (overrides config)");

  CLI::App* oracle = app.add_subcommand(
      "oracle-check", "Cross-check fast paths against brute-force references");
  oracle->add_option("--seed", seed, "random seed");
  oracle->add_option("--trials", trials, "scenes / gradient points per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? assignkit::kExitOk : assignkit::kExitUserError;
  }

  assignkit::CommonOpts opts;
  if (!out.empty()) opts.out_dir = out;

  if (assign->parsed()) {
    std::optional<std::string> out_file;
    if (!out.empty()) out_file = out;
    return assignkit::cmd_assign(scene_path, config_path, out_file);
  }
  if (simulate->parsed()) {
    if (simulate->count("--seed") > 0) opts.seed = seed;
    return assignkit::cmd_simulate(config_path, opts);
  }
  if (compare->parsed()) {
    if (compare->count("--seed") > 0) opts.seed = seed;
    return assignkit::cmd_compare(config_path, variants, opts);
  }
  return assignkit::cmd_oracle_check(seed, trials);
}
