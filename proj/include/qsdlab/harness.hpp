#pragma once

// Training orchestration: seeded agents, checkpointed learning curves,
// ensembles and parameter sweeps. Agents are independent tasks; per-agent
// results land in pre-assigned slots so aggregation order never varies.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qsdlab/agents.hpp"
#include "qsdlab/parallel.hpp"
#include "qsdlab/planner.hpp"
#include "qsdlab/receiver.hpp"

namespace qsdlab {

// ~points_per_decade log-spaced episode indices in [1, total], always ending at total.
inline std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t total,
                                                        double points_per_decade = 25.0) {
  std::vector<std::uint64_t> out;
  if (total == 0) return out;
  const double ratio = std::pow(10.0, 1.0 / points_per_decade);
  double x = 1.0;
  std::uint64_t last = 0;
  while (true) {
    const auto t = static_cast<std::uint64_t>(std::llround(x));
    if (t >= total) break;
    if (t > last) {
      out.push_back(t);
      last = t;
    }
    x = std::max(x * ratio, x + 1.0);
  }
  out.push_back(total);
  return out;
}

struct ExperimentConfig {
  double alpha = 0.4;
  ReceiverConfig receiver;
  PolicySpec policy;
  std::uint64_t episodes = 500000;
  std::size_t n_agents = 24;
  std::vector<std::uint64_t> checkpoints;  // empty -> geometric_checkpoints(episodes)
  std::uint64_t base_seed = 1;

  std::vector<std::uint64_t> effective_checkpoints() const {
    return checkpoints.empty() ? geometric_checkpoints(episodes) : checkpoints;
  }

  void validate() const {
    receiver.validate();
    policy.validate();
    if (episodes < 1) throw std::domain_error("ExperimentConfig: episodes must be >= 1");
    if (n_agents < 1) throw std::domain_error("ExperimentConfig: n_agents must be >= 1");
    if (receiver.attenuation != AttenuationMode::FixedEqualSplit)
      throw std::domain_error("ExperimentConfig: training uses fixed equal-split attenuations");
    for (std::size_t i = 0; i < checkpoints.size(); ++i)
      if (checkpoints[i] < 1 || checkpoints[i] > episodes ||
          (i > 0 && checkpoints[i] <= checkpoints[i - 1]))
        throw std::domain_error("ExperimentConfig: checkpoints must be sorted within [1, episodes]");
  }
};

struct LearningCurves {
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> reward_rate_mean;   // R_t
  std::vector<double> reward_rate_std;
  std::vector<double> policy_value_mean;  // P_t
  std::vector<double> policy_value_std;
};

namespace detail {

// Selects per PolicySpec while recording the visited chain for the update.
struct LearningPolicy {
  QTable& table;
  const PolicySpec& spec;
  std::mt19937_64& rng;
  const std::vector<double>& beta_grid;
  const std::vector<double>& thetas;
  std::uint64_t episode = 1;
  std::uint64_t h = kHistoryRoot;
  EpisodeTrace trace;

  void begin_episode(std::uint64_t t) {
    episode = t;
    h = kHistoryRoot;
    trace.action_indices.clear();
    trace.outcomes.clear();
  }

  std::size_t select(std::size_t level) {
    switch (spec.kind) {
      case PolicyKind::EpsilonGreedy:
      case PolicyKind::ExpGreedy:
        return select_action_epsilon_greedy(rng, table, h, level, spec.epsilon_at(episode));
      case PolicyKind::Ucb:
        return select_action_ucb(table, h, level, episode, spec.schedule);
      case PolicyKind::Thompson:
        return select_action_thompson(rng, table, h, level);
    }
    return 0;
  }

  LayerAction action(std::size_t layer, std::span<const std::uint8_t> outcomes) {
    if (layer > 0) {
      trace.outcomes.push_back(outcomes[layer - 1]);
      h = history_push(h, table.grid_size(), trace.action_indices[layer - 1], outcomes[layer - 1]);
    }
    const std::size_t idx = select(layer);
    trace.action_indices.push_back(static_cast<std::uint32_t>(idx));
    return LayerAction{beta_grid[idx], thetas[layer]};
  }

  int guess(std::span<const std::uint8_t> outcomes) {
    const std::size_t layers = table.layers();
    trace.outcomes.push_back(outcomes[layers - 1]);
    h = history_push(h, table.grid_size(), trace.action_indices[layers - 1],
                     outcomes[layers - 1]);
    trace.guess = static_cast<std::uint32_t>(select(layers));
    return static_cast<int>(trace.guess);
  }
};

}  // namespace detail

struct AgentResult {
  LearningCurves curves;
  QTable table;
};

// Trains one agent for T episodes; P_t is the exact (noise-aware) success
// probability of the greedy tree at each checkpoint.
inline AgentResult run_agent_full(std::uint64_t seed, const ExperimentConfig& cfg) {
  cfg.validate();
  const auto checkpoints = cfg.effective_checkpoints();
  QTable table(cfg.receiver.beta_grid.size(), cfg.receiver.layers);
  std::mt19937_64 env_rng(seed);
  std::mt19937_64 policy_rng(seed ^ 0x9E3779B97F4A7C15ULL);
  const auto thetas = fixed_attenuations(cfg.receiver.layers);
  detail::LearningPolicy policy{table, cfg.policy, policy_rng, cfg.receiver.beta_grid, thetas};
  const GreedyMode mode =
      cfg.policy.kind == PolicyKind::Thompson ? GreedyMode::PosteriorMean : GreedyMode::QValue;

  LearningCurves out;
  out.checkpoints = checkpoints;
  std::uint64_t reward_count = 0;
  std::size_t next_cp = 0;
  for (std::uint64_t t = 1; t <= cfg.episodes && next_cp < checkpoints.size(); ++t) {
    policy.begin_episode(t);
    const EpisodeRecord rec = run_episode(env_rng, cfg.alpha, cfg.receiver, policy);
    policy.trace.reward = rec.reward;
    if (cfg.policy.kind == PolicyKind::Thompson)
      ts_update_episode(table, policy.trace);
    else
      q_update_episode(table, policy.trace);
    reward_count += static_cast<std::uint64_t>(rec.reward);

    if (t == checkpoints[next_cp]) {
      ActionTree tree = greedy_action_tree(table, mode, cfg.receiver.beta_grid, thetas);
      out.reward_rate_mean.push_back(static_cast<double>(reward_count) / static_cast<double>(t));
      out.reward_rate_std.push_back(0.0);
      out.policy_value_mean.push_back(exact_success_probability(cfg.alpha, tree, cfg.receiver));
      out.policy_value_std.push_back(0.0);
      ++next_cp;
    }
  }
  return {std::move(out), std::move(table)};
}

inline LearningCurves run_agent(std::uint64_t seed, const ExperimentConfig& cfg) {
  return run_agent_full(seed, cfg).curves;
}

// Agents run with seeds base_seed .. base_seed + n_agents - 1; curves report
// ensemble mean and population standard deviation per checkpoint.
inline LearningCurves run_ensemble(const ExperimentConfig& cfg, std::size_t workers = 0) {
  cfg.validate();
  std::vector<LearningCurves> per_agent(cfg.n_agents);
  parallel_for(cfg.n_agents, workers,
               [&](std::size_t i) { per_agent[i] = run_agent(cfg.base_seed + i, cfg); });

  LearningCurves out;
  out.checkpoints = cfg.effective_checkpoints();
  const std::size_t m = out.checkpoints.size();
  const double n = static_cast<double>(cfg.n_agents);
  out.reward_rate_mean.assign(m, 0.0);
  out.reward_rate_std.assign(m, 0.0);
  out.policy_value_mean.assign(m, 0.0);
  out.policy_value_std.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double rs = 0, rss = 0, ps = 0, pss = 0;
    for (const auto& a : per_agent) {
      rs += a.reward_rate_mean[j];
      rss += a.reward_rate_mean[j] * a.reward_rate_mean[j];
      ps += a.policy_value_mean[j];
      pss += a.policy_value_mean[j] * a.policy_value_mean[j];
    }
    out.reward_rate_mean[j] = rs / n;
    out.reward_rate_std[j] = std::sqrt(std::max(0.0, rss / n - (rs / n) * (rs / n)));
    out.policy_value_mean[j] = ps / n;
    out.policy_value_std[j] = std::sqrt(std::max(0.0, pss / n - (ps / n) * (ps / n)));
  }
  return out;
}

enum class SweepParameter { Alpha, DarkCount, PhaseFlip };

struct SweepRow {
  double value = 0.0;
  double reward_rate = 0.0;   // R_t at the evaluation episode
  double policy_value = 0.0;  // P_t at the evaluation episode
  double p_star = 0.0;        // exhaustive optimum for the swept setting
};

// Ensemble per swept value, evaluated at a single episode index.
inline std::vector<SweepRow> sweep(SweepParameter parameter, const std::vector<double>& values,
                                   ExperimentConfig base, std::uint64_t eval_episode,
                                   std::size_t workers = 0) {
  if (eval_episode < 1 || eval_episode > base.episodes)
    throw std::domain_error("sweep: eval_episode must lie in [1, episodes]");
  base.episodes = eval_episode;
  base.checkpoints = {eval_episode};
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (const double v : values) {
    ExperimentConfig cfg = base;
    switch (parameter) {
      case SweepParameter::Alpha: cfg.alpha = v; break;
      case SweepParameter::DarkCount: cfg.receiver.noise.p_dark = v; break;
      case SweepParameter::PhaseFlip: cfg.receiver.noise.p_flip = v; break;
    }
    const LearningCurves curves = run_ensemble(cfg, workers);
    const double p_star = exhaustive_optimal(cfg.alpha, cfg.receiver).p_star;
    rows.push_back({v, curves.reward_rate_mean.back(), curves.policy_value_mean.back(), p_star});
  }
  return rows;
}

}  // namespace qsdlab
