#pragma once

// Model-aware benchmarks: exact policy evaluation, exhaustive optimization
// over the discrete action grid, and belief-state dynamic programming.
//
// Beliefs are one-dimensional: b = p(received amplitude is +alpha | history).
// With phase flips the received and sent hypotheses differ, so terminal
// guessing mixes the belief with the flip channel; rewards always follow the
// sent hypothesis.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "qsdlab/receiver.hpp"

namespace qsdlab {

struct capacity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A deterministic policy: one action per outcome prefix, one guess per leaf.
// Prefixes are outcome bits packed o1-first: child of p under outcome o is 2p+o.
struct ActionTree {
  std::size_t depth = 0;
  std::vector<std::vector<LayerAction>> actions;  // actions[l] has 2^l entries
  std::vector<int> guesses;                       // 2^depth entries

  static ActionTree make(std::size_t depth) {
    ActionTree t;
    t.depth = depth;
    t.actions.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) t.actions[l].assign(std::size_t{1} << l, LayerAction{});
    t.guesses.assign(std::size_t{1} << depth, 0);
    return t;
  }

  void validate() const {
    if (actions.size() != depth || guesses.size() != (std::size_t{1} << depth))
      throw std::invalid_argument("ActionTree: malformed shape");
    for (std::size_t l = 0; l < depth; ++l)
      if (actions[l].size() != (std::size_t{1} << l))
        throw std::invalid_argument("ActionTree: level " + std::to_string(l) + " has wrong arity");
  }
};

// Adapter playing an ActionTree through run_episode.
struct TreePolicy {
  const ActionTree* tree = nullptr;

  LayerAction action(std::size_t layer, std::span<const std::uint8_t> outcomes) const {
    std::size_t p = 0;
    for (std::size_t i = 0; i < layer; ++i) p = 2 * p + outcomes[i];
    return tree->actions[layer][p];
  }
  int guess(std::span<const std::uint8_t> outcomes) const {
    std::size_t p = 0;
    for (const auto o : outcomes) p = 2 * p + o;
    return tree->guesses[p];
  }
};

// W[k][s]: joint probability that hypothesis k was sent and the receiver got
// amplitude (-1)^s * alpha.
inline std::array<std::array<double, 2>, 2> sent_received_weights(double prior0, double p_flip) {
  const double priors[2] = {prior0, 1.0 - prior0};
  std::array<std::array<double, 2>, 2> w{};
  for (int k = 0; k < 2; ++k)
    for (int s = 0; s < 2; ++s) w[k][s] = priors[k] * (s == k ? 1.0 - p_flip : p_flip);
  return w;
}

// Bayes update of the received-amplitude belief after one detector outcome.
inline double belief_update(double b0, int outcome, const LayerAction& action, double amp_k0,
                            double amp_k1, const NoiseConfig& noise) {
  const double p0_k0 = prob_no_click(displaced_amplitude(amp_k0, action), noise.p_dark);
  const double p0_k1 = prob_no_click(displaced_amplitude(amp_k1, action), noise.p_dark);
  const double like0 = outcome == 0 ? p0_k0 : 1.0 - p0_k0;
  const double like1 = outcome == 0 ? p0_k1 : 1.0 - p0_k1;
  const double total = like0 * b0 + like1 * (1.0 - b0);
  if (total <= 0.0)
    throw std::domain_error("belief_update: outcome has zero likelihood under both hypotheses");
  return like0 * b0 / total;
}

// Exact success probability of a fixed tree, enumerating all 2^L outcome strings.
inline double exact_success_probability(double alpha, const ActionTree& tree,
                                        const ReceiverConfig& cfg) {
  cfg.validate();
  tree.validate();
  if (tree.depth != cfg.layers)
    throw std::invalid_argument("exact_success_probability: tree depth != layers");

  const auto w = sent_received_weights(cfg.prior0, cfg.noise.p_flip);
  const std::size_t leaves = std::size_t{1} << tree.depth;
  double total = 0.0;
  for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
    double like[2];
    for (int s = 0; s < 2; ++s) {
      double amp = s == 0 ? alpha : -alpha;
      double p = 1.0;
      std::size_t prefix = 0;
      for (std::size_t l = 0; l < tree.depth; ++l) {
        const LayerAction& a = tree.actions[l][prefix];
        const int o = static_cast<int>((leaf >> (tree.depth - 1 - l)) & 1u);
        const double p0 = prob_no_click(displaced_amplitude(amp, a), cfg.noise.p_dark);
        p *= o == 0 ? p0 : 1.0 - p0;
        amp *= std::sqrt(a.theta);
        prefix = 2 * prefix + static_cast<std::size_t>(o);
      }
      like[s] = p;
    }
    const int g = tree.guesses[leaf];
    total += w[g][0] * like[0] + w[g][1] * like[1];
  }
  return total;
}

// Per-arm value of a one-layer receiver with displacement beta and
// maximum-likelihood guessing, equal priors. Used as the bandit arm mean.
inline double single_layer_ml_success(double alpha, double beta, const NoiseConfig& noise) {
  const auto w = sent_received_weights(0.5, noise.p_flip);
  const LayerAction a{beta, 0.0};
  const double p0s[2] = {prob_no_click(displaced_amplitude(alpha, a), noise.p_dark),
                         prob_no_click(displaced_amplitude(-alpha, a), noise.p_dark)};
  double total = 0.0;
  for (int o = 0; o < 2; ++o) {
    const double q0 = o == 0 ? p0s[0] : 1.0 - p0s[0];
    const double q1 = o == 0 ? p0s[1] : 1.0 - p0s[1];
    total += std::max(w[0][0] * q0 + w[0][1] * q1, w[1][0] * q0 + w[1][1] * q1);
  }
  return total;
}

// Candidate theta values per layer. Fixed mode pins the equal-split schedule;
// adaptive mode searches a grid that always contains the fixed schedule, so
// the adaptive optimum can never fall below the fixed one.
inline std::vector<double> adaptive_theta_candidates(std::size_t layers,
                                                     std::vector<double> theta_grid) {
  if (theta_grid.empty())
    for (int i = 0; i <= 10; ++i) theta_grid.push_back(0.1 * i);
  for (const double t : fixed_attenuations(layers)) theta_grid.push_back(t);
  std::sort(theta_grid.begin(), theta_grid.end());
  theta_grid.erase(std::unique(theta_grid.begin(), theta_grid.end()), theta_grid.end());
  for (const double t : theta_grid)
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("theta grid value outside [0,1]");
  return theta_grid;
}

struct ExhaustiveResult {
  double p_star = 0.0;
  ActionTree tree;
};

namespace detail {

class ExhaustiveSolver {
 public:
  ExhaustiveSolver(double alpha, const ReceiverConfig& cfg, const std::vector<double>& theta_grid)
      : alpha_(alpha), cfg_(cfg), w_(sent_received_weights(cfg.prior0, cfg.noise.p_flip)) {
    cfg.validate();
    candidates_.resize(cfg.layers);
    const auto fixed = fixed_attenuations(cfg.layers);
    std::vector<double> thetas;
    if (cfg.attenuation == AttenuationMode::AdaptiveGrid)
      thetas = adaptive_theta_candidates(cfg.layers, theta_grid);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      const std::vector<double> level_thetas =
          cfg.attenuation == AttenuationMode::FixedEqualSplit ? std::vector<double>{fixed[l]}
                                                              : thetas;
      for (const double th : level_thetas)
        for (const double b : cfg.beta_grid) candidates_[l].push_back({b, th});
    }
    const double branching = 2.0 * static_cast<double>(candidates_[0].size());
    if (std::pow(branching, static_cast<double>(cfg.layers)) > 2.5e8)
      throw capacity_error("exhaustive_optimal: history enumeration too large for L=" +
                           std::to_string(cfg.layers));
  }

  double value(std::size_t level, double qp, double qm, double amp) const {
    if (level == cfg_.layers)
      return std::max(w_[0][0] * qp + w_[0][1] * qm, w_[1][0] * qp + w_[1][1] * qm);
    double best = -1.0;
    for (const LayerAction& a : candidates_[level]) {
      const double v = branch_value(level, qp, qm, amp, a);
      if (v > best) best = v;
    }
    return best;
  }

  std::vector<double> root_values() const {
    std::vector<double> vals;
    vals.reserve(candidates_[0].size());
    for (const LayerAction& a : candidates_[0]) vals.push_back(branch_value(0, 1.0, 1.0, alpha_, a));
    return vals;
  }

  ExhaustiveResult solve() const {
    ExhaustiveResult r;
    r.p_star = value(0, 1.0, 1.0, alpha_);
    r.tree = ActionTree::make(cfg_.layers);
    extract(0, 0, 1.0, 1.0, alpha_, r.tree);
    return r;
  }

 private:
  double branch_value(std::size_t level, double qp, double qm, double amp,
                      const LayerAction& a) const {
    const double det = amp * std::sqrt(1.0 - a.theta);
    const double p0p = prob_no_click(det + a.beta, cfg_.noise.p_dark);
    const double p0m = prob_no_click(-det + a.beta, cfg_.noise.p_dark);
    const double next_amp = amp * std::sqrt(a.theta);
    return value(level + 1, qp * p0p, qm * p0m, next_amp) +
           value(level + 1, qp * (1.0 - p0p), qm * (1.0 - p0m), next_amp);
  }

  void extract(std::size_t level, std::size_t prefix, double qp, double qm, double amp,
               ActionTree& tree) const {
    if (level == cfg_.layers) {
      const double v0 = w_[0][0] * qp + w_[0][1] * qm;
      const double v1 = w_[1][0] * qp + w_[1][1] * qm;
      tree.guesses[prefix] = v1 > v0 ? 1 : 0;
      return;
    }
    double best = -1.0;
    LayerAction best_a = candidates_[level].front();
    for (const LayerAction& a : candidates_[level]) {
      const double v = branch_value(level, qp, qm, amp, a);
      if (v > best) {
        best = v;
        best_a = a;
      }
    }
    tree.actions[level][prefix] = best_a;
    const double det = amp * std::sqrt(1.0 - best_a.theta);
    const double p0p = prob_no_click(det + best_a.beta, cfg_.noise.p_dark);
    const double p0m = prob_no_click(-det + best_a.beta, cfg_.noise.p_dark);
    const double next_amp = amp * std::sqrt(best_a.theta);
    extract(level + 1, 2 * prefix, qp * p0p, qm * p0m, next_amp, tree);
    extract(level + 1, 2 * prefix + 1, qp * (1.0 - p0p), qm * (1.0 - p0m), next_amp, tree);
  }

  double alpha_;
  const ReceiverConfig& cfg_;
  std::array<std::array<double, 2>, 2> w_;
  std::vector<std::vector<LayerAction>> candidates_;
};

}  // namespace detail

// Backward induction over histories with the exact model. Intended for small L;
// throws capacity_error when the enumeration would be infeasible.
inline ExhaustiveResult exhaustive_optimal(double alpha, const ReceiverConfig& cfg,
                                           const std::vector<double>& theta_grid = {}) {
  return detail::ExhaustiveSolver(alpha, cfg, theta_grid).solve();
}

// Optimal continuation value for each level-0 action candidate (grid order;
// in adaptive mode candidates enumerate theta-major, beta-minor).
inline std::vector<double> exhaustive_root_values(double alpha, const ReceiverConfig& cfg,
                                                  const std::vector<double>& theta_grid = {}) {
  return detail::ExhaustiveSolver(alpha, cfg, theta_grid).root_values();
}

struct DpOptions {
  std::size_t belief_points = 1001;
  std::vector<double> theta_grid;  // adaptive search grid; empty -> 11 uniform points
};

// Finite-horizon value iteration on a uniform belief grid with linear
// interpolation. Value tables are memoized per (level, remaining amplitude),
// which makes conditional attenuations affordable: each distinct attenuation
// product gets its own table. Terminal values are evaluated analytically.
class BeliefDp {
 public:
  BeliefDp(double alpha, ReceiverConfig cfg, DpOptions opt = {})
      : alpha_(std::abs(alpha)), cfg_(std::move(cfg)), opt_(std::move(opt)) {
    cfg_.validate();
    if (opt_.belief_points < 2) throw std::domain_error("BeliefDp: belief grid needs >= 2 points");
    belief_.resize(opt_.belief_points);
    for (std::size_t i = 0; i < opt_.belief_points; ++i)
      belief_[i] = static_cast<double>(i) / static_cast<double>(opt_.belief_points - 1);
    fixed_ = fixed_attenuations(cfg_.layers);
    if (cfg_.attenuation == AttenuationMode::AdaptiveGrid)
      theta_candidates_ = adaptive_theta_candidates(cfg_.layers, opt_.theta_grid);

    const auto w = sent_received_weights(cfg_.prior0, cfg_.noise.p_flip);
    for (int s = 0; s < 2; ++s) {
      const double mass = w[0][s] + w[1][s];
      for (int k = 0; k < 2; ++k)
        c_[k][s] = mass > 0.0 ? w[k][s] / mass : (k == 0 ? cfg_.prior0 : 1.0 - cfg_.prior0);
    }
    prior_recv_ = w[0][0] + w[1][0];
  }

  double value() { return best_at(0, alpha_, prior_recv_).value; }

  ActionTree extract_policy() {
    ActionTree tree = ActionTree::make(cfg_.layers);
    extract(0, 0, prior_recv_, alpha_, tree);
    return tree;
  }

  double terminal_value(double b) const {
    return std::max(b * c_[0][0] + (1.0 - b) * c_[0][1], b * c_[1][0] + (1.0 - b) * c_[1][1]);
  }
  int terminal_guess(double b) const {
    return b * c_[1][0] + (1.0 - b) * c_[1][1] > b * c_[0][0] + (1.0 - b) * c_[0][1] ? 1 : 0;
  }

 private:
  struct Best {
    double value = -1.0;
    LayerAction action;
  };

  std::vector<double> thetas_at(std::size_t level) const {
    if (cfg_.attenuation == AttenuationMode::FixedEqualSplit) return {fixed_[level]};
    return theta_candidates_;
  }

  double child_value(std::size_t level, double amp, double b) {
    if (level == cfg_.layers) return terminal_value(b);
    const std::vector<double>& t = table(level, amp);
    const double pos = std::clamp(b, 0.0, 1.0) * static_cast<double>(t.size() - 1);
    std::size_t i = std::min(static_cast<std::size_t>(pos), t.size() - 2);
    const double frac = pos - static_cast<double>(i);
    return t[i] + (t[i + 1] - t[i]) * frac;
  }

  // One Bellman step at an exact belief (no interpolation at this level).
  Best best_at(std::size_t level, double amp, double b) {
    Best best;
    for (const double th : thetas_at(level)) {
      const double det = amp * std::sqrt(1.0 - th);
      const double next_amp = amp * std::sqrt(th);
      for (const double beta : cfg_.beta_grid) {
        const double q0p = prob_no_click(det + beta, cfg_.noise.p_dark);
        const double q0m = prob_no_click(-det + beta, cfg_.noise.p_dark);
        double v = 0.0;
        for (int o = 0; o < 2; ++o) {
          const double qp = o == 0 ? q0p : 1.0 - q0p;
          const double qm = o == 0 ? q0m : 1.0 - q0m;
          const double pred = b * qp + (1.0 - b) * qm;
          if (pred <= 0.0) continue;
          v += pred * child_value(level + 1, next_amp, b * qp / pred);
        }
        if (v > best.value) best = {v, LayerAction{beta, th}};
      }
    }
    return best;
  }

  const std::vector<double>& table(std::size_t level, double amp) {
    const std::uint64_t key = (static_cast<std::uint64_t>(level) << 48) |
                              static_cast<std::uint64_t>(std::llround(amp * 1e12));
    auto it = tables_.find(key);
    if (it != tables_.end()) return it->second;

    std::vector<double> vals(belief_.size(), -1.0);
    for (const double th : thetas_at(level)) {
      const double det = amp * std::sqrt(1.0 - th);
      const double next_amp = amp * std::sqrt(th);
      const bool last = level + 1 == cfg_.layers;
      const std::vector<double>* child = last ? nullptr : &table(level + 1, next_amp);
      const double scale = last ? 0.0 : static_cast<double>(child->size() - 1);
      for (const double beta : cfg_.beta_grid) {
        const double q0p = prob_no_click(det + beta, cfg_.noise.p_dark);
        const double q0m = prob_no_click(-det + beta, cfg_.noise.p_dark);
        for (std::size_t i = 0; i < belief_.size(); ++i) {
          const double b = belief_[i];
          double v = 0.0;
          for (int o = 0; o < 2; ++o) {
            const double qp = o == 0 ? q0p : 1.0 - q0p;
            const double qm = o == 0 ? q0m : 1.0 - q0m;
            const double pred = b * qp + (1.0 - b) * qm;
            if (pred <= 0.0) continue;
            const double post = b * qp / pred;
            if (last) {
              v += pred * terminal_value(post);
            } else {
              const double pos = std::clamp(post, 0.0, 1.0) * scale;
              const std::size_t j = std::min(static_cast<std::size_t>(pos), child->size() - 2);
              const double frac = pos - static_cast<double>(j);
              v += pred * ((*child)[j] + ((*child)[j + 1] - (*child)[j]) * frac);
            }
          }
          if (v > vals[i]) vals[i] = v;
        }
      }
    }
    return tables_.emplace(key, std::move(vals)).first->second;
  }

  void extract(std::size_t level, std::size_t prefix, double b, double amp, ActionTree& tree) {
    if (level == cfg_.layers) {
      tree.guesses[prefix] = terminal_guess(b);
      return;
    }
    const Best bst = best_at(level, amp, b);
    tree.actions[level][prefix] = bst.action;
    const double det = amp * std::sqrt(1.0 - bst.action.theta);
    const double next_amp = amp * std::sqrt(bst.action.theta);
    const double q0p = prob_no_click(det + bst.action.beta, cfg_.noise.p_dark);
    const double q0m = prob_no_click(-det + bst.action.beta, cfg_.noise.p_dark);
    for (int o = 0; o < 2; ++o) {
      const double qp = o == 0 ? q0p : 1.0 - q0p;
      const double qm = o == 0 ? q0m : 1.0 - q0m;
      const double pred = b * qp + (1.0 - b) * qm;
      if (pred <= 0.0) {
        fill_default(level + 1, 2 * prefix + static_cast<std::size_t>(o), tree);
        continue;
      }
      extract(level + 1, 2 * prefix + static_cast<std::size_t>(o), b * qp / pred, next_amp, tree);
    }
  }

  // Unreachable branch (zero predictive probability): any valid subtree works.
  void fill_default(std::size_t level, std::size_t prefix, ActionTree& tree) {
    if (level == cfg_.layers) {
      tree.guesses[prefix] = 0;
      return;
    }
    tree.actions[level][prefix] = LayerAction{cfg_.beta_grid.front(), thetas_at(level).front()};
    fill_default(level + 1, 2 * prefix, tree);
    fill_default(level + 1, 2 * prefix + 1, tree);
  }

  double alpha_;
  ReceiverConfig cfg_;
  DpOptions opt_;
  std::vector<double> belief_;
  std::vector<double> fixed_;
  std::vector<double> theta_candidates_;
  double c_[2][2];
  double prior_recv_ = 0.5;
  std::unordered_map<std::uint64_t, std::vector<double>> tables_;
};

inline double dp_optimal_value(double alpha, const ReceiverConfig& cfg, DpOptions opt = {}) {
  return BeliefDp(alpha, cfg, std::move(opt)).value();
}

inline ActionTree dp_policy_extract(double alpha, const ReceiverConfig& cfg, DpOptions opt = {}) {
  return BeliefDp(alpha, cfg, std::move(opt)).extract_policy();
}

}  // namespace qsdlab
