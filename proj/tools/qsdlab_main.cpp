// qsdlab — simulation and learning workbench for a layered
// displacement/photodetector receiver discriminating two opposite-phase
// coherent states.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qsdlab/runner.hpp"
#include "qsdlab/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"coherent-state receiver calibration workbench"};
  app.set_version_flag("--version", std::string(qsdlab::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string snapshot;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t workers = 0;

  app.add_option("--config", config_path, "configuration file")->required();
  app.add_option("--out", out_dir, "output directory (default: current)");
  app.add_option("--seed", seed, "override the config base seed")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--workers", workers,
                 "worker threads (default: QSDLAB_WORKERS env or available parallelism)");

  auto* plan = app.add_subcommand("plan", "model-aware optimum vs layers and energy");
  auto* train = app.add_subcommand("train", "train an ensemble of learning agents");
  auto* bandit = app.add_subcommand("bandit", "single-layer bandit regret benchmark");
  auto* sweep = app.add_subcommand("sweep", "parameter sweep of trained performance");
  auto* eval = app.add_subcommand("eval", "guess-map export from a table snapshot");
  eval->add_option("--snapshot", snapshot, "table snapshot CSV produced by train")->required();

  CLI11_PARSE(app, argc, argv);

  qsdlab::RunOptions opts;
  opts.out_dir = out_dir;
  if (seed_set) opts.seed = seed;
  opts.workers = workers;
  if (workers == 0)
    if (const char* env = std::getenv("QSDLAB_WORKERS"))
      opts.workers = static_cast<std::size_t>(std::strtoull(env, nullptr, 10));
  opts.snapshot = snapshot;

  try {
    const qsdlab::ConfigFile cfg = qsdlab::ConfigFile::load(config_path);
    if (plan->parsed()) qsdlab::cmd_plan(cfg, opts);
    if (train->parsed()) qsdlab::cmd_train(cfg, opts);
    if (bandit->parsed()) qsdlab::cmd_bandit(cfg, opts);
    if (sweep->parsed()) qsdlab::cmd_sweep(cfg, opts);
    if (eval->parsed()) qsdlab::cmd_eval(cfg, opts);
  } catch (const qsdlab::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const qsdlab::capacity_error& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
