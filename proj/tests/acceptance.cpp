// temporary validation scaffold for acceptance configs
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "qsdlab/harness.hpp"
#include "qsdlab/runner.hpp"

using namespace qsdlab;
using Clock = std::chrono::steady_clock;

static double secs(Clock::time_point a) {
  return std::chrono::duration<double>(Clock::now() - a).count();
}

static ExperimentConfig base21() {
  ExperimentConfig ec;
  ec.alpha = 0.4;
  ec.receiver.layers = 2;
  ec.receiver.beta_grid = make_beta_grid(-1.0, 1.0, 21);
  ec.base_seed = 20001;
  ec.n_agents = 24;
  return ec;
}

int main() {
  // criterion 6a: 0.3-greedy P_t at 3e3
  {
    auto ec = base21();
    ec.policy.kind = PolicyKind::EpsilonGreedy;
    ec.policy.epsilon = 0.3;
    ec.episodes = 3000;
    auto t0 = Clock::now();
    auto c = run_ensemble(ec, 1);
    std::printf("[6a] %.1fs 0.3-greedy mean P_t(3000)=%.5f (need > 0.78817)\n", secs(t0),
                c.policy_value_mean.back());
    // also find first crossing
    for (std::size_t j = 0; j < c.checkpoints.size(); ++j)
      if (c.policy_value_mean[j] > 0.78817) {
        std::printf("     first P_t crossing at t=%llu\n",
                    (unsigned long long)c.checkpoints[j]);
        break;
      }
  }
  // criterion 6b: exp-greedy R_t at 5e4
  {
    auto ec = base21();
    ec.policy.kind = PolicyKind::ExpGreedy;
    ec.episodes = 50000;
    auto t0 = Clock::now();
    auto c = run_ensemble(ec, 1);
    std::printf("[6b] %.1fs exp-greedy mean R_t(5e4)=%.5f (need > 0.78817)\n", secs(t0),
                c.reward_rate_mean.back());
    for (std::size_t j = 0; j < c.checkpoints.size(); ++j)
      if (c.reward_rate_mean[j] > 0.78817) {
        std::printf("     first R_t crossing at t=%llu\n",
                    (unsigned long long)c.checkpoints[j]);
        break;
      }
  }
  // criterion 7: P_t at 1e5 for 0.3-greedy and thompson (24 agents)
  {
    const double p_star = exhaustive_optimal(0.4, base21().receiver).p_star;
    for (auto kind : {PolicyKind::EpsilonGreedy, PolicyKind::Thompson}) {
      auto ec = base21();
      ec.policy.kind = kind;
      ec.policy.epsilon = 0.3;
      ec.episodes = 100000;
      ec.checkpoints = {100000};
      auto t0 = Clock::now();
      auto c = run_ensemble(ec, 1);
      std::printf("[7] %.1fs kind=%d mean P_t(1e5)=%.5f ratio=%.4f (need >= 0.97)\n", secs(t0),
                  (int)kind, c.policy_value_mean.back(), c.policy_value_mean.back() / p_star);
    }
  }
  // criterion 5: 5-grid, 1-greedy, 1e6 episodes, 8 agents
  {
    ExperimentConfig ec;
    ec.alpha = 0.4;
    ec.receiver.layers = 2;
    ec.receiver.beta_grid = {-0.8, -0.4, 0.0, 0.4, 0.8};
    ec.policy.kind = PolicyKind::EpsilonGreedy;
    ec.policy.epsilon = 1.0;
    ec.episodes = 1000000;
    ec.checkpoints = {1000000};
    ec.base_seed = 501;
    const auto profile = exhaustive_root_values(0.4, ec.receiver);
    std::vector<double> mean_q(5, 0.0);
    auto t0 = Clock::now();
    for (int i = 0; i < 8; ++i) {
      auto r = run_agent_full(ec.base_seed + i, ec);
      const QEntry* root = r.table.find_block(kHistoryRoot);
      for (int a = 0; a < 5; ++a) mean_q[a] += root[a].q / 8.0;
    }
    double maxdev = 0.0;
    for (int a = 0; a < 5; ++a) {
      std::printf("   a%d analytic=%.5f qhat=%.5f\n", a, profile[a], mean_q[a]);
      maxdev = std::max(maxdev, std::abs(mean_q[a] - profile[a]));
    }
    std::printf("[5] %.1fs maxdev=%.4f (need < 0.02)\n", secs(t0), maxdev);
  }
  // criterion 9 mid-range: 3 points each
  {
    auto t0 = Clock::now();
    for (auto [param, vals] : {std::pair{SweepParameter::DarkCount,
                                         std::vector<double>{0.25, 0.5, 0.75}},
                               std::pair{SweepParameter::PhaseFlip,
                                         std::vector<double>{0.1, 0.25, 0.4}}}) {
      auto ec = base21();
      ec.policy.kind = PolicyKind::EpsilonGreedy;
      ec.policy.epsilon = 0.3;
      ec.episodes = 100000;
      auto rows = sweep(param, vals, ec, 100000, 1);
      for (auto& r : rows)
        std::printf("   param=%d v=%.2f P_t=%.5f P*=%.5f ratio=%.4f (need >= 0.95)\n",
                    (int)param, r.value, r.policy_value, r.p_star, r.policy_value / r.p_star);
    }
    std::printf("[9] %.1fs\n", secs(t0));
  }
  // criterion 8: regret fits, 1000 agents, T=1e4
  {
    auto problem = make_problem_from_displacements(0.4, {0.0, -0.4, -0.74}, {});
    const auto cps = geometric_checkpoints(10000, 10);
    const double mean_gap = (problem.gap(0) + problem.gap(1) + problem.gap(2)) / 3.0;
    auto t0 = Clock::now();

    PolicySpec eps;
    eps.kind = PolicyKind::EpsilonGreedy;
    eps.epsilon = 0.3;
    auto ce = run_bandit_ensemble(problem, eps, 10000, 1000, 31, cps);
    PolicySpec ucb;
    ucb.kind = PolicyKind::Ucb;
    auto cu = run_bandit_ensemble(problem, ucb, 10000, 1000, 32, cps);
    PolicySpec ts;
    ts.kind = PolicyKind::Thompson;
    auto ct = run_bandit_ensemble(problem, ts, 10000, 1000, 33, cps);

    std::printf("[8] %.1fs\n", secs(t0));
    std::printf("   eps: L_T/T=%.5f target=%.5f ratio=%.3f (need within 20%%)\n",
                ce.mean_cumulative_regret.back() / 10000.0, 0.3 * mean_gap,
                ce.mean_cumulative_regret.back() / 10000.0 / (0.3 * mean_gap));
    bool ucb_ok = true;
    for (std::size_t j = 0; j < cps.size(); ++j)
      if (cu.mean_cumulative_regret[j] > ucb1_regret_upper_bound(problem, cps[j])) ucb_ok = false;
    std::printf("   ucb <= bound at all cps: %d  L_T=%.1f bound=%.1f\n", ucb_ok,
                cu.mean_cumulative_regret.back(), ucb1_regret_upper_bound(problem, 10000));
    std::printf("   ts L_T=%.2f vs eps L_T=%.2f factor=%.1f (need >= 3)\n",
                ct.mean_cumulative_regret.back(), ce.mean_cumulative_regret.back(),
                ce.mean_cumulative_regret.back() / ct.mean_cumulative_regret.back());

    // linear fit of eps regret vs t, and of ts/ucb regret vs log t (t >= 100)
    auto fit = [&](const BanditEnsembleCurves& c, bool logx) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
      int n = 0;
      for (std::size_t j = 0; j < cps.size(); ++j) {
        if (logx && cps[j] < 100) continue;
        const double x = logx ? std::log((double)cps[j]) : (double)cps[j];
        const double y = c.mean_cumulative_regret[j];
        sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
        ++n;
      }
      const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      const double r = (n * sxy - sx * sy) /
                       std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
      return std::pair{slope, r * r};
    };
    auto [se, r2e] = fit(ce, false);
    auto [su, r2u] = fit(cu, true);
    auto [st, r2t] = fit(ct, true);
    std::printf("   eps linear fit: slope=%.5f R2=%.5f (need R2>0.99)\n", se, r2e);
    std::printf("   ucb log fit: slope=%.3f R2=%.5f\n", su, r2u);
    std::printf("   ts  log fit: slope=%.3f R2=%.5f  C_LR=%.3f\n", st, r2t,
                lai_robbins_constant(problem));
  }
  return 0;
}
