// Command-line front end for the incentive-mechanism simulator.
//
// Exit codes: 0 success (including valid game terminations), 1 config
// error, 2 runtime/model error.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "flgame/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Path to the JSON experiment config")
      ->required();
  cmd->add_option("--out", args.out_dir, "Output directory (default: config output_dir)");
  cmd->add_option("--seed", args.seed, "Master seed override");
  cmd->add_option("--jobs", args.jobs, "Parallel scenario fan-out")->check(CLI::PositiveNumber);
}

// Precedence: explicit flag, then environment variable, then config value.
int run(const CommonArgs& args,
        const std::function<int(const flgame::ExperimentConfig&, const flgame::RunOptions&)>& fn) {
  std::optional<std::uint64_t> seed = args.seed;
  if (!seed) {
    if (const char* env = std::getenv("FLGAME_SEED"))
      seed = static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
  }
  const auto cfg = flgame::ExperimentConfig::load_file(args.config_path, seed);

  flgame::RunOptions opts;
  opts.jobs = args.jobs;
  opts.out_dir = args.out_dir;
  if (opts.out_dir.empty()) {
    if (const char* env = std::getenv("FLGAME_OUT")) opts.out_dir = env;
  }
  if (opts.out_dir.empty()) opts.out_dir = cfg.output_dir;
  return fn(cfg, opts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-tier federated-learning incentive mechanism simulator"};
  app.require_subcommand(1);

  CommonArgs equilibrium_args, train_args, obsa_args, asosa_args, compare_args;
  auto* equilibrium =
      app.add_subcommand("equilibrium", "Closed-form equilibrium report and sweeps");
  add_common(equilibrium, equilibrium_args);
  auto* train = app.add_subcommand("train", "Train per-LMO worker policies");
  add_common(train, train_args);
  auto* obsa = app.add_subcommand("obsa", "Budget binary search per LMO");
  add_common(obsa, obsa_args);
  auto* asosa = app.add_subcommand("asosa", "Adaptive pricing loop (or pricing baseline)");
  add_common(asosa, asosa_args);
  auto* compare = app.add_subcommand("compare", "Adaptive loop vs pricing baselines");
  add_common(compare, compare_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (equilibrium->parsed()) return run(equilibrium_args, flgame::cmd_equilibrium);
    if (train->parsed()) return run(train_args, flgame::cmd_train);
    if (obsa->parsed()) return run(obsa_args, flgame::cmd_obsa);
    if (asosa->parsed()) return run(asosa_args, flgame::cmd_asosa);
    if (compare->parsed()) return run(compare_args, flgame::cmd_compare);
  } catch (const flgame::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const flgame::MechanismUndefinedError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
