#pragma once

// Single-state bandit experiments with regret analytics.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "qsdlab/agents.hpp"
#include "qsdlab/parallel.hpp"
#include "qsdlab/planner.hpp"

namespace qsdlab {

struct BanditProblem {
  std::vector<double> arm_values;  // Bernoulli success probability per arm
  std::size_t best_arm = 0;        // lowest-index argmax

  double best_value() const { return arm_values[best_arm]; }
  double gap(std::size_t a) const { return best_value() - arm_values[a]; }
  std::size_t arms() const { return arm_values.size(); }
};

inline BanditProblem make_problem(std::vector<double> arm_values) {
  if (arm_values.empty()) throw std::invalid_argument("make_problem: no arms");
  BanditProblem p{std::move(arm_values), 0};
  for (std::size_t a = 1; a < p.arm_values.size(); ++a)
    if (p.arm_values[a] > p.arm_values[p.best_arm]) p.best_arm = a;
  return p;
}

inline BanditProblem make_problem_from_displacements(double alpha, const std::vector<double>& betas,
                                                     const NoiseConfig& noise) {
  if (betas.empty()) throw std::invalid_argument("make_problem_from_displacements: no arms");
  std::vector<double> q;
  q.reserve(betas.size());
  for (const double b : betas) q.push_back(single_layer_ml_success(alpha, b, noise));
  return make_problem(std::move(q));
}

struct RegretCurve {
  std::vector<std::uint32_t> arms;
  std::vector<std::uint8_t> rewards;
  std::vector<double> cumulative_regret;      // pseudo-regret of the arms played
  std::vector<std::uint32_t> recommendations; // agent's current best-arm claim
  std::vector<double> simple_regret;          // gap of the recommendation
};

inline std::vector<double> cumulative_regret(const std::vector<std::uint32_t>& arms,
                                             const BanditProblem& problem) {
  std::vector<double> out(arms.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < arms.size(); ++i) {
    acc += problem.gap(arms[i]);
    out[i] = acc;
  }
  return out;
}

inline double bernoulli_kl(double p, double q) {
  if (p <= 0.0 || p >= 1.0 || q <= 0.0 || q >= 1.0)
    throw std::domain_error("bernoulli_kl: arguments must lie strictly inside (0,1)");
  return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

// C_LR = sum over sub-optimal arms of gap / KL(arm || best). Arms tied with
// the best contribute nothing.
inline double lai_robbins_constant(const BanditProblem& problem) {
  double c = 0.0;
  for (std::size_t a = 0; a < problem.arms(); ++a) {
    const double gap = problem.gap(a);
    if (gap <= 0.0) continue;
    if (problem.arm_values[a] <= 0.0 || problem.arm_values[a] >= 1.0 ||
        problem.best_value() <= 0.0 || problem.best_value() >= 1.0)
      throw std::domain_error("lai_robbins_constant: arm values on {0,1} give divergent KL");
    c += gap / bernoulli_kl(problem.arm_values[a], problem.best_value());
  }
  return c;
}

// L_t <= 8 sum(log t / gap) + K pi^2 / 3, zero-gap arms excluded.
inline double ucb1_regret_upper_bound(const BanditProblem& problem, std::uint64_t t) {
  if (t < 1) throw std::invalid_argument("ucb1_regret_upper_bound: t must be >= 1");
  double s = 0.0;
  for (std::size_t a = 0; a < problem.arms(); ++a) {
    const double gap = problem.gap(a);
    if (gap > 0.0) s += std::log(static_cast<double>(t)) / gap;
  }
  return 8.0 * s + static_cast<double>(problem.arms()) * std::numbers::pi * std::numbers::pi / 3.0;
}

// Simulates T episodes of the chosen strategy. Estimates are running means for
// the (exp-)greedy and UCB policies and Beta posteriors for Thompson sampling;
// the recommendation is the arg-max of the matching estimate.
inline RegretCurve run_bandit(std::mt19937_64& rng, const BanditProblem& problem,
                              const PolicySpec& strategy, std::uint64_t horizon) {
  strategy.validate();
  const std::size_t n = problem.arms();
  if (strategy.kind == PolicyKind::Ucb && horizon > 0 && horizon < n)
    throw std::invalid_argument("run_bandit: UCB needs horizon >= number of arms");

  std::vector<double> q(n, 0.0), mu(n, 1.0), nu(n, 1.0);
  std::vector<std::uint32_t> visits(n, 0);
  RegretCurve curve;
  curve.arms.reserve(horizon);
  curve.rewards.reserve(horizon);
  curve.cumulative_regret.reserve(horizon);
  curve.recommendations.reserve(horizon);
  curve.simple_regret.reserve(horizon);

  double regret = 0.0;
  for (std::uint64_t t = 1; t <= horizon; ++t) {
    std::size_t a = 0;
    switch (strategy.kind) {
      case PolicyKind::EpsilonGreedy:
      case PolicyKind::ExpGreedy: {
        if (uniform01(rng) < strategy.epsilon_at(t)) {
          a = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        } else {
          for (std::size_t i = 1; i < n; ++i)
            if (q[i] > q[a]) a = i;
        }
        break;
      }
      case PolicyKind::Ucb: {
        if (t <= n) {
          a = static_cast<std::size_t>(t - 1);  // choose each action once
        } else {
          double bv = -std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < n; ++i) {
            const double bonus =
                std::sqrt(ucb_log_inverse_confidence(strategy.schedule, t, visits[i]) /
                          (2.0 * visits[i]));
            if (q[i] + bonus > bv) {
              bv = q[i] + bonus;
              a = i;
            }
          }
        }
        break;
      }
      case PolicyKind::Thompson: {
        double bv = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double r = sample_beta(rng, mu[i], nu[i]);
          if (r > bv) {
            bv = r;
            a = i;
          }
        }
        break;
      }
    }

    const int r = uniform01(rng) < problem.arm_values[a] ? 1 : 0;
    visits[a] += 1;
    q[a] += (static_cast<double>(r) - q[a]) / static_cast<double>(visits[a]);
    mu[a] += static_cast<double>(r);
    nu[a] += 1.0 - static_cast<double>(r);

    std::size_t rec = 0;
    if (strategy.kind == PolicyKind::Thompson) {
      double bv = mu[0] / (mu[0] + nu[0]);
      for (std::size_t i = 1; i < n; ++i) {
        const double m = mu[i] / (mu[i] + nu[i]);
        if (m > bv) {
          bv = m;
          rec = i;
        }
      }
    } else {
      for (std::size_t i = 1; i < n; ++i)
        if (q[i] > q[rec]) rec = i;
    }

    regret += problem.gap(a);
    curve.arms.push_back(static_cast<std::uint32_t>(a));
    curve.rewards.push_back(static_cast<std::uint8_t>(r));
    curve.cumulative_regret.push_back(regret);
    curve.recommendations.push_back(static_cast<std::uint32_t>(rec));
    curve.simple_regret.push_back(problem.gap(rec));
  }
  return curve;
}

struct BanditEnsembleCurves {
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> mean_cumulative_regret;
  std::vector<double> std_cumulative_regret;
  std::vector<double> mean_simple_regret;
};

// Mean/std across independent seeded agents (seeds base_seed..base_seed+n-1),
// sampled at the given checkpoints. Aggregation is a fixed-order fold over
// per-agent slots, so results do not depend on scheduling.
inline BanditEnsembleCurves run_bandit_ensemble(const BanditProblem& problem,
                                                const PolicySpec& strategy, std::uint64_t horizon,
                                                std::size_t n_agents, std::uint64_t base_seed,
                                                const std::vector<std::uint64_t>& checkpoints,
                                                std::size_t workers = 0) {
  BanditEnsembleCurves out;
  out.checkpoints = checkpoints;
  const std::size_t m = checkpoints.size();
  std::vector<std::vector<double>> regret(n_agents), simple(n_agents);
  parallel_for(n_agents, workers, [&](std::size_t i) {
    std::mt19937_64 rng(base_seed + i);
    const RegretCurve c = run_bandit(rng, problem, strategy, horizon);
    regret[i].resize(m);
    simple[i].resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t idx = static_cast<std::size_t>(checkpoints[j]) - 1;
      regret[i][j] = c.cumulative_regret[idx];
      simple[i][j] = c.simple_regret[idx];
    }
  });
  out.mean_cumulative_regret.resize(m);
  out.std_cumulative_regret.resize(m);
  out.mean_simple_regret.resize(m);
  const double n = static_cast<double>(n_agents);
  for (std::size_t j = 0; j < m; ++j) {
    double sum = 0.0, sumsq = 0.0, simp = 0.0;
    for (std::size_t i = 0; i < n_agents; ++i) {
      sum += regret[i][j];
      sumsq += regret[i][j] * regret[i][j];
      simp += simple[i][j];
    }
    const double mean = sum / n;
    out.mean_cumulative_regret[j] = mean;
    out.std_cumulative_regret[j] = std::sqrt(std::max(0.0, sumsq / n - mean * mean));
    out.mean_simple_regret[j] = simp / n;
  }
  return out;
}

}  // namespace qsdlab
