#pragma once

// Physical model of the layered displacement/photodetector receiver.
//
// Conventions used throughout the library:
//  - amplitudes and displacements are real; hypothesis k in {0,1} sends
//    amplitude (-1)^k * alpha
//  - outcome 0 means "no click", outcome 1 means "click"
//  - a phase flip negates the amplitude after the source, so the reward
//    still follows the *sent* hypothesis
//  - every episode consumes RNG draws in a fixed order: hypothesis, flip,
//    then one draw per layer outcome

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsdlab {

struct LayerAction {
  double beta = 0.0;   // displacement
  double theta = 0.0;  // beamsplitter transmissivity, in [0,1]
};

struct NoiseConfig {
  double p_dark = 0.0;  // dark-count probability, identical at every detector
  double p_flip = 0.0;  // probability the source phase is flipped
};

enum class AttenuationMode { FixedEqualSplit, AdaptiveGrid };

struct ReceiverConfig {
  std::size_t layers = 2;
  std::vector<double> beta_grid;  // strictly increasing, non-empty
  AttenuationMode attenuation = AttenuationMode::FixedEqualSplit;
  double prior0 = 0.5;  // prior of hypothesis k=0; prior of k=1 is 1-prior0
  NoiseConfig noise;

  void validate() const {
    if (layers == 0) throw std::domain_error("ReceiverConfig: layers must be >= 1");
    if (beta_grid.empty()) throw std::domain_error("ReceiverConfig: beta_grid is empty");
    if (!std::is_sorted(beta_grid.begin(), beta_grid.end(),
                        [](double a, double b) { return a <= b; }))
      throw std::domain_error("ReceiverConfig: beta_grid must be strictly increasing");
    if (prior0 < 0.0 || prior0 > 1.0)
      throw std::domain_error("ReceiverConfig: prior0 outside [0,1]");
    if (noise.p_dark < 0.0 || noise.p_dark > 1.0 || noise.p_flip < 0.0 || noise.p_flip > 1.0)
      throw std::domain_error("ReceiverConfig: noise probabilities outside [0,1]");
  }
};

inline std::vector<double> make_beta_grid(double lo, double hi, std::size_t points) {
  if (points == 0 || (points == 1 && lo != hi) || hi < lo)
    throw std::domain_error("make_beta_grid: bad range");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = points == 1 ? lo : lo + static_cast<double>(i) * (hi - lo) / static_cast<double>(points - 1);
  return g;
}

inline double hypothesis_amplitude(int k, double alpha) { return k == 0 ? alpha : -alpha; }

// Beamsplitter of transmissivity theta: |a>|0> -> |a sqrt(theta)>|a sqrt(1-theta)>.
inline std::pair<double, double> beam_split(double alpha_in, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0))
    throw std::domain_error("beam_split: theta outside [0,1]");
  return {alpha_in * std::sqrt(theta), alpha_in * std::sqrt(1.0 - theta)};
}

// Amplitude seen by the detector after the reflected arm is displaced by beta.
inline double displaced_amplitude(double alpha_in, const LayerAction& a) {
  if (!(a.theta >= 0.0 && a.theta <= 1.0))
    throw std::domain_error("displaced_amplitude: theta outside [0,1]");
  return alpha_in * std::sqrt(1.0 - a.theta) + a.beta;
}

// p(o=0 | displaced amplitude), including dark counts.
inline double prob_no_click(double alpha_tilde, double p_dark) {
  return (1.0 - p_dark) * std::exp(-alpha_tilde * alpha_tilde);
}

// Transmissivity schedule giving every detector the same amplitude |alpha|/sqrt(L);
// the last layer reflects everything: 1 - theta_l = 1/(L-l).
inline std::vector<double> fixed_attenuations(std::size_t layers) {
  if (layers == 0) throw std::domain_error("fixed_attenuations: layers must be >= 1");
  std::vector<double> thetas(layers);
  for (std::size_t l = 0; l < layers; ++l)
    thetas[l] = 1.0 - 1.0 / static_cast<double>(layers - l);
  return thetas;
}

// Optimal success probability over all measurements for |+alpha> vs |-alpha>.
inline double helstrom_bound(double alpha) {
  return 0.5 * (1.0 + std::sqrt(1.0 - std::exp(-4.0 * alpha * alpha)));
}

// Best Gaussian receiver: homodyne detection with a sign threshold.
inline double homodyne_limit(double alpha) {
  return 0.5 * (1.0 + std::erf(std::sqrt(2.0) * std::abs(alpha)));
}

struct EpisodeRecord {
  int true_k = 0;  // sent hypothesis
  bool flipped = false;
  std::vector<std::uint8_t> outcomes;
  std::vector<LayerAction> actions;
  int guess = 0;
  int reward = 0;  // 1 iff guess == true_k
};

inline double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

namespace detail {
inline bool in_grid(const std::vector<double>& grid, double beta) {
  auto it = std::lower_bound(grid.begin(), grid.end(), beta);
  return it != grid.end() && *it == beta;
}
}  // namespace detail

// Samples one discrimination experiment. The policy sees only its own
// outcome history:
//   LayerAction policy.action(std::size_t layer, std::span<const std::uint8_t> outcomes)
//   int         policy.guess(std::span<const std::uint8_t> outcomes)
template <typename Policy>
EpisodeRecord run_episode(std::mt19937_64& rng, double alpha, const ReceiverConfig& cfg,
                          Policy&& policy) {
  cfg.validate();
  EpisodeRecord rec;
  rec.true_k = uniform01(rng) < cfg.prior0 ? 0 : 1;
  rec.flipped = uniform01(rng) < cfg.noise.p_flip;
  double amp = hypothesis_amplitude(rec.true_k, alpha) * (rec.flipped ? -1.0 : 1.0);

  rec.outcomes.reserve(cfg.layers);
  rec.actions.reserve(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const LayerAction a = policy.action(l, std::span<const std::uint8_t>(rec.outcomes));
    if (!detail::in_grid(cfg.beta_grid, a.beta))
      throw std::invalid_argument("run_episode: policy displacement " + std::to_string(a.beta) +
                                  " is not on the configured grid");
    const double detected = displaced_amplitude(amp, a);
    const double p0 = prob_no_click(detected, cfg.noise.p_dark);
    rec.outcomes.push_back(uniform01(rng) < p0 ? 0 : 1);
    rec.actions.push_back(a);
    amp *= std::sqrt(a.theta);
  }

  rec.guess = policy.guess(std::span<const std::uint8_t>(rec.outcomes));
  if (rec.guess != 0 && rec.guess != 1)
    throw std::invalid_argument("run_episode: guess must be 0 or 1");
  rec.reward = rec.guess == rec.true_k ? 1 : 0;
  return rec;
}

}  // namespace qsdlab
