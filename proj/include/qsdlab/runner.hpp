#pragma once

// Command implementations shared by the CLI and the test suite. Every run
// writes its CSV outputs plus a manifest.json recording the config hash,
// effective seed, code version, duration and output list.

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qsdlab/bandit.hpp"
#include "qsdlab/config.hpp"
#include "qsdlab/csv.hpp"
#include "qsdlab/harness.hpp"
#include "qsdlab/version.hpp"

namespace qsdlab {

struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides the config's base_seed
  std::size_t workers = 0;            // 0 = available parallelism
  std::string snapshot;               // eval input file
};

inline const ConfigSchema& config_schema() {
  static const ConfigSchema schema = {
      {"receiver",
       {"layers", "beta_min", "beta_max", "beta_points", "attenuation", "prior0"}},
      {"noise", {"p_dark", "p_flip"}},
      {"policy", {"kind", "epsilon", "tau", "epsilon0", "schedule"}},
      {"experiment",
       {"alpha", "episodes", "agents", "base_seed", "checkpoints_per_decade", "snapshot"}},
      {"plan",
       {"energy_min", "energy_max", "energy_points", "l_min", "l_max", "belief_points",
        "theta_points", "modes"}},
      {"bandit",
       {"alpha", "displacements", "strategies", "epsilon", "tau", "epsilon0", "schedule",
        "horizon", "agents", "base_seed", "checkpoints_per_decade"}},
      {"sweep", {"parameter", "values", "eval_episode"}},
  };
  return schema;
}

inline ReceiverConfig receiver_from_config(const ConfigFile& cfg) {
  ReceiverConfig rc;
  rc.layers = cfg.get_uint("receiver", "layers", 2);
  rc.beta_grid = make_beta_grid(cfg.get_double("receiver", "beta_min", -1.0),
                                cfg.get_double("receiver", "beta_max", 1.0),
                                cfg.get_uint("receiver", "beta_points", 21));
  const std::string mode = cfg.get_string("receiver", "attenuation", "fixed");
  if (mode == "fixed")
    rc.attenuation = AttenuationMode::FixedEqualSplit;
  else if (mode == "adaptive")
    rc.attenuation = AttenuationMode::AdaptiveGrid;
  else
    throw config_error("receiver.attenuation must be 'fixed' or 'adaptive', got '" + mode + "'");
  rc.prior0 = cfg.get_double("receiver", "prior0", 0.5);
  rc.noise.p_dark = cfg.get_double("noise", "p_dark", 0.0);
  rc.noise.p_flip = cfg.get_double("noise", "p_flip", 0.0);
  rc.validate();
  return rc;
}

inline PolicySpec policy_from_config(const ConfigFile& cfg, const std::string& section = "policy") {
  PolicySpec spec;
  const std::string kind = cfg.get_string(section, "kind", "epsilon_greedy");
  if (kind == "epsilon_greedy")
    spec.kind = PolicyKind::EpsilonGreedy;
  else if (kind == "exp_greedy")
    spec.kind = PolicyKind::ExpGreedy;
  else if (kind == "ucb")
    spec.kind = PolicyKind::Ucb;
  else if (kind == "thompson")
    spec.kind = PolicyKind::Thompson;
  else
    throw config_error(section + ".kind must be epsilon_greedy|exp_greedy|ucb|thompson, got '" +
                       kind + "'");
  spec.epsilon = cfg.get_double(section, "epsilon", 0.3);
  spec.tau = cfg.get_double(section, "tau", 200.0);
  spec.epsilon0 = cfg.get_double(section, "epsilon0", 0.01);
  const std::string sched = cfg.get_string(section, "schedule", "ucb1");
  if (sched == "ucb1")
    spec.schedule = UcbSchedule::Ucb1;
  else if (sched == "ucb2")
    spec.schedule = UcbSchedule::Ucb2;
  else if (sched == "ucb3")
    spec.schedule = UcbSchedule::Ucb3;
  else
    throw config_error(section + ".schedule must be ucb1|ucb2|ucb3, got '" + sched + "'");
  spec.validate();
  return spec;
}

inline ExperimentConfig experiment_from_config(const ConfigFile& cfg, const RunOptions& opts) {
  ExperimentConfig ec;
  ec.alpha = cfg.get_double("experiment", "alpha", 0.4);
  ec.receiver = receiver_from_config(cfg);
  ec.policy = policy_from_config(cfg);
  ec.episodes = cfg.get_uint("experiment", "episodes", 500000);
  ec.n_agents = cfg.get_uint("experiment", "agents", 24);
  ec.base_seed = opts.seed.value_or(cfg.get_uint("experiment", "base_seed", 1));
  ec.checkpoints =
      geometric_checkpoints(ec.episodes, cfg.get_double("experiment", "checkpoints_per_decade", 25.0));
  ec.validate();
  return ec;
}

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016" PRIx64, h);
  return buf;
}

inline void write_manifest(const RunOptions& opts, const std::string& command,
                           const ConfigFile& cfg, std::uint64_t base_seed, double seconds,
                           const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = hash_hex(cfg.hash());
  j["base_seed"] = base_seed;
  j["version"] = kVersion;
  j["duration_seconds"] = seconds;
  j["outputs"] = outputs;
  std::ofstream out(opts.out_dir / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest.json");
  out << j.dump(2) << '\n';
}

template <typename Body>
std::vector<std::string> with_manifest(const std::string& command, const ConfigFile& cfg,
                                       const RunOptions& opts, std::uint64_t base_seed,
                                       Body&& body) {
  std::filesystem::create_directories(opts.out_dir);
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> outputs = body();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(opts, command, cfg, base_seed, seconds, outputs);
  return outputs;
}

}  // namespace detail

// Dataset behind the layered-receiver benchmark figure: optimal success
// probability per (alpha, L, attenuation mode) against the Helstrom bound.
inline std::vector<std::string> cmd_plan(const ConfigFile& cfg, const RunOptions& opts) {
  cfg.validate_schema(config_schema());
  const double e_min = cfg.get_double("plan", "energy_min", 0.01);
  const double e_max = cfg.get_double("plan", "energy_max", 2.0);
  const std::size_t e_points = cfg.get_uint("plan", "energy_points", 20);
  const std::size_t l_min = cfg.get_uint("plan", "l_min", 1);
  const std::size_t l_max = cfg.get_uint("plan", "l_max", 5);
  const std::size_t belief_points = cfg.get_uint("plan", "belief_points", 1001);
  const std::size_t theta_points = cfg.get_uint("plan", "theta_points", 11);
  const std::string modes = cfg.get_string("plan", "modes", "both");
  if (e_min <= 0 || e_max < e_min || e_points < 1 || l_min < 1 || l_max < l_min)
    throw config_error("plan: bad energy or layer range");
  if (modes != "fixed" && modes != "adaptive" && modes != "both")
    throw config_error("plan.modes must be fixed|adaptive|both");
  ReceiverConfig base = receiver_from_config(cfg);

  std::vector<double> theta_grid;
  for (std::size_t i = 0; i < theta_points; ++i)
    theta_grid.push_back(static_cast<double>(i) / static_cast<double>(theta_points - 1));

  struct Job {
    double alpha;
    std::size_t layers;
    AttenuationMode mode;
    double value = 0.0;
  };
  std::vector<Job> jobs;
  for (std::size_t L = l_min; L <= l_max; ++L)
    for (const auto mode : {AttenuationMode::FixedEqualSplit, AttenuationMode::AdaptiveGrid}) {
      if (mode == AttenuationMode::FixedEqualSplit && modes == "adaptive") continue;
      if (mode == AttenuationMode::AdaptiveGrid && modes == "fixed") continue;
      for (std::size_t i = 0; i < e_points; ++i) {
        const double energy =
            e_points == 1 ? e_min
                          : e_min + static_cast<double>(i) * (e_max - e_min) /
                                        static_cast<double>(e_points - 1);
        jobs.push_back({std::sqrt(energy), L, mode});
      }
    }

  return detail::with_manifest("plan", cfg, opts, 0, [&] {
    parallel_for(jobs.size(), opts.workers, [&](std::size_t i) {
      ReceiverConfig rc = base;
      rc.layers = jobs[i].layers;
      rc.attenuation = jobs[i].mode;
      DpOptions dp;
      dp.belief_points = belief_points;
      dp.theta_grid = theta_grid;
      jobs[i].value = dp_optimal_value(jobs[i].alpha, rc, dp);
    });
    CsvWriter csv(opts.out_dir / "plan.csv");
    csv.header({"alpha", "L", "mode", "P_star", "P_star_minus_helstrom", "homodyne"});
    for (const Job& j : jobs)
      csv.row(j.alpha, j.layers,
              j.mode == AttenuationMode::FixedEqualSplit ? "fixed" : "adaptive", j.value,
              j.value - helstrom_bound(j.alpha), homodyne_limit(j.alpha));
    return std::vector<std::string>{"plan.csv"};
  });
}

inline std::vector<std::string> cmd_train(const ConfigFile& cfg, const RunOptions& opts) {
  cfg.validate_schema(config_schema());
  const ExperimentConfig ec = experiment_from_config(cfg, opts);
  return detail::with_manifest("train", cfg, opts, ec.base_seed, [&] {
    const LearningCurves curves = run_ensemble(ec, opts.workers);
    double p_star;
    try {
      p_star = exhaustive_optimal(ec.alpha, ec.receiver).p_star;
    } catch (const capacity_error&) {
      p_star = dp_optimal_value(ec.alpha, ec.receiver);
    }
    const double hel = helstrom_bound(ec.alpha);
    const double hom = homodyne_limit(ec.alpha);

    std::vector<std::string> outputs{"learning_curves.csv"};
    CsvWriter csv(opts.out_dir / "learning_curves.csv");
    csv.header({"t", "R_mean", "R_std", "P_mean", "P_std", "P_star", "helstrom", "homodyne"});
    for (std::size_t j = 0; j < curves.checkpoints.size(); ++j)
      csv.row(curves.checkpoints[j], curves.reward_rate_mean[j], curves.reward_rate_std[j],
              curves.policy_value_mean[j], curves.policy_value_std[j], p_star, hel, hom);

    if (cfg.get_bool("experiment", "snapshot", false)) {
      const AgentResult agent0 = run_agent_full(ec.base_seed, ec);
      CsvWriter snap(opts.out_dir / "snapshot.csv");
      snap.header({"history", "action", "visits", "q_hat", "mu", "nu"});
      for (const SnapshotRow& r : export_snapshot(agent0.table))
        snap.row(r.history, r.action, r.visits, r.q, r.mu, r.nu);
      outputs.push_back("snapshot.csv");
    }
    return outputs;
  });
}

inline std::vector<std::string> cmd_bandit(const ConfigFile& cfg, const RunOptions& opts) {
  cfg.validate_schema(config_schema());
  const double alpha = cfg.get_double("bandit", "alpha", 0.4);
  const std::vector<double> betas =
      cfg.get_double_list("bandit", "displacements", {0.0, -0.4, -0.74});
  const std::vector<std::string> strategies = cfg.get_string_list(
      "bandit", "strategies", {"epsilon_greedy", "ucb", "thompson"});
  const std::uint64_t horizon = cfg.get_uint("bandit", "horizon", 10000);
  const std::size_t n_agents = cfg.get_uint("bandit", "agents", 1000);
  const std::uint64_t base_seed = opts.seed.value_or(cfg.get_uint("bandit", "base_seed", 1));
  const double per_decade = cfg.get_double("bandit", "checkpoints_per_decade", 10.0);

  NoiseConfig noise;
  noise.p_dark = cfg.get_double("noise", "p_dark", 0.0);
  noise.p_flip = cfg.get_double("noise", "p_flip", 0.0);
  const BanditProblem problem = make_problem_from_displacements(alpha, betas, noise);
  const std::vector<std::uint64_t> checkpoints = geometric_checkpoints(horizon, per_decade);
  const double c_lr = lai_robbins_constant(problem);

  return detail::with_manifest("bandit", cfg, opts, base_seed, [&] {
    std::vector<std::string> outputs;
    for (const std::string& name : strategies) {
      PolicySpec spec = policy_from_config(cfg, "bandit");
      if (name == "epsilon_greedy")
        spec.kind = PolicyKind::EpsilonGreedy;
      else if (name == "exp_greedy")
        spec.kind = PolicyKind::ExpGreedy;
      else if (name == "ucb")
        spec.kind = PolicyKind::Ucb;
      else if (name == "thompson")
        spec.kind = PolicyKind::Thompson;
      else
        throw config_error("bandit.strategies: unknown strategy '" + name + "'");

      const BanditEnsembleCurves curves =
          run_bandit_ensemble(problem, spec, horizon, n_agents, base_seed, checkpoints,
                              opts.workers);
      const std::string file = "bandit_" + name + ".csv";
      CsvWriter csv(opts.out_dir / file);
      csv.header({"t", "mean_cumulative_regret", "std", "mean_simple_regret",
                  "lai_robbins_reference", "ucb1_bound"});
      for (std::size_t j = 0; j < checkpoints.size(); ++j)
        csv.row(checkpoints[j], curves.mean_cumulative_regret[j],
                curves.std_cumulative_regret[j], curves.mean_simple_regret[j],
                c_lr * std::log(static_cast<double>(checkpoints[j])),
                ucb1_regret_upper_bound(problem, checkpoints[j]));
      outputs.push_back(file);
    }
    return outputs;
  });
}

inline std::vector<std::string> cmd_sweep(const ConfigFile& cfg, const RunOptions& opts) {
  cfg.validate_schema(config_schema());
  ExperimentConfig ec = experiment_from_config(cfg, opts);
  const std::string parameter = cfg.get_string("sweep", "parameter", "p_dark");
  SweepParameter param;
  if (parameter == "alpha")
    param = SweepParameter::Alpha;
  else if (parameter == "p_dark")
    param = SweepParameter::DarkCount;
  else if (parameter == "p_flip")
    param = SweepParameter::PhaseFlip;
  else
    throw config_error("sweep.parameter must be alpha|p_dark|p_flip, got '" + parameter + "'");
  const std::vector<double> values = cfg.get_double_list("sweep", "values", {0.0, 0.25, 0.5});
  const std::uint64_t eval_episode = cfg.get_uint("sweep", "eval_episode", ec.episodes);

  return detail::with_manifest("sweep", cfg, opts, ec.base_seed, [&] {
    const std::vector<SweepRow> rows = sweep(param, values, ec, eval_episode, opts.workers);
    CsvWriter csv(opts.out_dir / "sweep.csv");
    csv.header({"value", "R_t", "P_t", "P_star"});
    for (const SweepRow& r : rows) csv.row(r.value, r.reward_rate, r.policy_value, r.p_star);
    return std::vector<std::string>{"sweep.csv"};
  });
}

namespace detail {

struct Snapshot {
  std::vector<SnapshotRow> rows;
};

inline Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open snapshot file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "history,action,visits,q_hat,mu,nu")
    throw config_error("snapshot file has unexpected header: " + path);
  Snapshot snap;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SnapshotRow row;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, row.history, ',');
    std::getline(ss, cell, ',');
    row.action = static_cast<std::uint32_t>(std::stoul(cell));
    std::getline(ss, cell, ',');
    row.visits = static_cast<std::uint32_t>(std::stoul(cell));
    std::getline(ss, cell, ',');
    row.q = std::stod(cell);
    std::getline(ss, cell, ',');
    row.mu = std::stod(cell);
    if (!std::getline(ss, cell, ',')) throw config_error("snapshot row too short");
    row.nu = std::stod(cell);
    snap.rows.push_back(std::move(row));
  }
  return snap;
}

}  // namespace detail

// Per (a0, o1, a1, o2): learned guess preference Q(h2,1)-Q(h2,0) next to the
// model-aware maximum-likelihood guess, for guessing-rule density maps.
inline std::vector<std::string> cmd_eval(const ConfigFile& cfg, const RunOptions& opts) {
  cfg.validate_schema(config_schema());
  const ReceiverConfig rc = receiver_from_config(cfg);
  const double alpha = cfg.get_double("experiment", "alpha", 0.4);
  if (rc.layers != 2) throw config_error("eval: guess maps are defined for layers = 2");
  if (opts.snapshot.empty()) throw config_error("eval: missing snapshot file (--snapshot)");

  const detail::Snapshot snap = detail::load_snapshot(opts.snapshot);
  const std::size_t g = rc.beta_grid.size();
  std::unordered_map<std::uint64_t, double> terminal_q;  // key = code*2 + guess
  for (const SnapshotRow& row : snap.rows) {
    const std::size_t level =
        row.history == "-" ? 0
                           : 1 + static_cast<std::size_t>(std::count(row.history.begin(),
                                                                     row.history.end(), '.'));
    std::uint64_t code;
    try {
      code = history_from_string(row.history, g);
    } catch (const std::exception&) {
      throw config_error("eval: snapshot/config mismatch (history '" + row.history +
                         "' does not decode on a " + std::to_string(g) + "-point grid)");
    }
    if (level > rc.layers || row.action >= (level == rc.layers ? 2 : g))
      throw config_error("eval: snapshot/config mismatch (entry '" + row.history + "', action " +
                         std::to_string(row.action) + ")");
    if (level == rc.layers) terminal_q.emplace(code * 2 + row.action, row.q);
  }

  const auto thetas = fixed_attenuations(rc.layers);
  const auto w = sent_received_weights(rc.prior0, rc.noise.p_flip);

  return detail::with_manifest("eval", cfg, opts, 0, [&] {
    CsvWriter csv(opts.out_dir / "guess_map.csv");
    csv.header({"beta0", "o1", "beta1", "o2", "q_diff", "ml_guess"});
    for (std::size_t a0 = 0; a0 < g; ++a0)
      for (int o1 = 0; o1 < 2; ++o1)
        for (std::size_t a1 = 0; a1 < g; ++a1)
          for (int o2 = 0; o2 < 2; ++o2) {
            std::uint64_t h = kHistoryRoot;
            h = history_push(h, g, static_cast<std::uint32_t>(a0), o1);
            h = history_push(h, g, static_cast<std::uint32_t>(a1), o2);
            double q0 = 0.0, q1 = 0.0;
            if (const auto it = terminal_q.find(h * 2 + 0); it != terminal_q.end()) q0 = it->second;
            if (const auto it = terminal_q.find(h * 2 + 1); it != terminal_q.end()) q1 = it->second;

            double like[2];
            for (int s = 0; s < 2; ++s) {
              const double amp = s == 0 ? alpha : -alpha;
              const LayerAction act0{rc.beta_grid[a0], thetas[0]};
              const LayerAction act1{rc.beta_grid[a1], thetas[1]};
              const double p01 = prob_no_click(displaced_amplitude(amp, act0), rc.noise.p_dark);
              const double p02 = prob_no_click(
                  displaced_amplitude(amp * std::sqrt(thetas[0]), act1), rc.noise.p_dark);
              like[s] = (o1 == 0 ? p01 : 1.0 - p01) * (o2 == 0 ? p02 : 1.0 - p02);
            }
            const double v0 = w[0][0] * like[0] + w[0][1] * like[1];
            const double v1 = w[1][0] * like[0] + w[1][1] * like[1];
            csv.row(rc.beta_grid[a0], o1, rc.beta_grid[a1], o2, q1 - q0, v1 > v0 ? 1 : 0);
          }
    return std::vector<std::string>{"guess_map.csv"};
  });
}

}  // namespace qsdlab
