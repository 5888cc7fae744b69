#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qsdlab/planner.hpp"
#include "qsdlab/receiver.hpp"

using namespace qsdlab;

TEST_CASE("beam splitter") {
  auto [t1, r1] = beam_split(0.4, 1.0);
  CHECK(t1 == Catch::Approx(0.4));
  CHECK(r1 == Catch::Approx(0.0));
  auto [t0, r0] = beam_split(0.4, 0.0);
  CHECK(t0 == Catch::Approx(0.0));
  CHECK(r0 == Catch::Approx(0.4));
  auto [th, rh] = beam_split(0.4, 0.5);
  CHECK(th == Catch::Approx(0.4 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(rh == Catch::Approx(0.4 / std::sqrt(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(beam_split(0.4, -0.01), std::domain_error);
  CHECK_THROWS_AS(beam_split(0.4, 1.01), std::domain_error);

  SECTION("energy conservation") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 2000; ++i) {
      const double a = 4.0 * uniform01(rng) - 2.0;
      const double theta = uniform01(rng);
      auto [t, r] = beam_split(a, theta);
      CHECK(std::abs(t * t + r * r - a * a) < 1e-12);
    }
  }
}

TEST_CASE("displaced amplitude") {
  CHECK(displaced_amplitude(0.4, {-0.4, 0.0}) == Catch::Approx(0.0).margin(1e-15));
  CHECK(displaced_amplitude(-0.4, {-0.4, 0.0}) == Catch::Approx(-0.8));
  CHECK(displaced_amplitude(0.4, {-0.74, 0.0}) == Catch::Approx(-0.34));
}

TEST_CASE("no-click probability") {
  CHECK(prob_no_click(0.0, 0.0) == 1.0);
  CHECK(prob_no_click(-0.8, 0.0) == Catch::Approx(0.527292424043).epsilon(1e-9));
  CHECK(prob_no_click(-0.8, 0.0) == Catch::Approx(std::exp(-0.64)).epsilon(1e-15));
  CHECK(prob_no_click(0.0, 1.0) == 0.0);

  SECTION("valid probabilities, symmetric in the amplitude sign") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
      const double a = 6.0 * uniform01(rng) - 3.0;
      const double pdc = uniform01(rng);
      const double p0 = prob_no_click(a, pdc);
      CHECK(p0 >= 0.0);
      CHECK(p0 <= 1.0);
      CHECK(p0 + (1.0 - p0) == 1.0);
      CHECK(p0 == prob_no_click(-a, pdc));
    }
  }
}

TEST_CASE("fixed attenuation schedule") {
  CHECK(fixed_attenuations(1) == std::vector<double>{0.0});
  const auto t2 = fixed_attenuations(2);
  CHECK(t2[0] == Catch::Approx(0.5));
  CHECK(t2[1] == Catch::Approx(0.0));
  const auto t4 = fixed_attenuations(4);
  CHECK(t4[0] == Catch::Approx(0.75));
  CHECK(t4[1] == Catch::Approx(2.0 / 3.0));
  CHECK(t4[2] == Catch::Approx(0.5));
  CHECK(t4[3] == Catch::Approx(0.0));
  CHECK_THROWS_AS(fixed_attenuations(0), std::domain_error);

  SECTION("every detector sees |alpha|/sqrt(L), nothing survives the last layer") {
    for (std::size_t layers = 1; layers <= 8; ++layers) {
      const auto thetas = fixed_attenuations(layers);
      double amp = 0.7;
      for (std::size_t l = 0; l < layers; ++l) {
        auto [t, r] = beam_split(amp, thetas[l]);
        CHECK(std::abs(r - 0.7 / std::sqrt(static_cast<double>(layers))) < 1e-12);
        amp = t;
      }
      CHECK(std::abs(amp) < 1e-12);
    }
  }
}

TEST_CASE("helstrom bound") {
  CHECK(helstrom_bound(0.0) == Catch::Approx(0.5));
  CHECK(helstrom_bound(50.0) == Catch::Approx(1.0));
  CHECK(helstrom_bound(0.4) == Catch::Approx(0.843768663478).epsilon(1e-10));
  // independent evaluation of the closed form
  CHECK(helstrom_bound(0.4) ==
        Catch::Approx(0.5 * (1.0 + std::sqrt(1.0 - std::exp(-0.64)))).epsilon(1e-15));
}

namespace {

// Numeric oracle for the homodyne baseline: outcome quadrature is Gaussian
// with mean +-sqrt(2)*alpha and variance 1/2; integrate the ML success
// probability with Simpson's rule.
double homodyne_numeric(double alpha) {
  const double mu = std::sqrt(2.0) * alpha;
  const double var = 0.5;
  auto integrand = [&](double x) {
    const double pp = std::exp(-(x - mu) * (x - mu) / (2.0 * var));
    const double pm = std::exp(-(x + mu) * (x + mu) / (2.0 * var));
    return 0.5 * std::max(pp, pm) / std::sqrt(2.0 * M_PI * var);
  };
  const double lo = -12.0, hi = 12.0;
  const int n = 40000;  // even
  const double h = (hi - lo) / n;
  double sum = integrand(lo) + integrand(hi);
  for (int i = 1; i < n; ++i) sum += integrand(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("homodyne limit") {
  CHECK(homodyne_limit(0.0) == Catch::Approx(0.5));
  CHECK(homodyne_limit(0.4) == Catch::Approx(0.788144601417).epsilon(1e-10));

  SECTION("matches the Gaussian-integral oracle to 1e-9") {
    for (const double a : {0.1, 0.4, 0.75, 1.2})
      CHECK(std::abs(homodyne_limit(a) - homodyne_numeric(a)) < 1e-9);
  }
  SECTION("monotone, sandwiched by 1/2 and helstrom") {
    double prev = 0.5;
    for (double a = 0.0; a <= 2.0; a += 0.05) {
      const double h = homodyne_limit(a);
      CHECK(h >= prev - 1e-15);
      CHECK(h >= 0.5);
      CHECK(helstrom_bound(a) >= h - 1e-12);
      prev = h;
    }
  }
}

namespace {

struct ConstantPolicy {
  LayerAction act;
  int fixed_guess;
  LayerAction action(std::size_t, std::span<const std::uint8_t>) const { return act; }
  int guess(std::span<const std::uint8_t>) const { return fixed_guess; }
};

ReceiverConfig one_layer_config() {
  ReceiverConfig cfg;
  cfg.layers = 1;
  cfg.beta_grid = {-0.4, 0.0, 0.4};
  return cfg;
}

}  // namespace

TEST_CASE("run_episode basics") {
  std::mt19937_64 rng(123);

  SECTION("deterministic hypothesis") {
    ReceiverConfig cfg = one_layer_config();
    cfg.prior0 = 1.0;
    for (int i = 0; i < 200; ++i) {
      const auto rec = run_episode(rng, 0.4, cfg, ConstantPolicy{{0.0, 0.0}, 0});
      CHECK(rec.true_k == 0);
      CHECK(rec.reward == 1);
    }
  }

  SECTION("saturated detector clicks always") {
    ReceiverConfig cfg = one_layer_config();
    cfg.noise.p_dark = 1.0;
    for (int i = 0; i < 200; ++i) {
      const auto rec = run_episode(rng, 0.4, cfg, ConstantPolicy{{-0.4, 0.0}, 0});
      REQUIRE(rec.outcomes.size() == 1);
      CHECK(rec.outcomes[0] == 1);
    }
  }

  SECTION("same seed, same episodes") {
    ReceiverConfig cfg = one_layer_config();
    cfg.noise.p_flip = 0.25;
    std::mt19937_64 a(999), b(999);
    for (int i = 0; i < 500; ++i) {
      const auto ra = run_episode(a, 0.4, cfg, ConstantPolicy{{-0.4, 0.0}, 1});
      const auto rb = run_episode(b, 0.4, cfg, ConstantPolicy{{-0.4, 0.0}, 1});
      CHECK(ra.true_k == rb.true_k);
      CHECK(ra.flipped == rb.flipped);
      CHECK(ra.outcomes == rb.outcomes);
      CHECK(ra.reward == rb.reward);
    }
  }

  SECTION("off-grid action is a contract violation") {
    ReceiverConfig cfg = one_layer_config();
    CHECK_THROWS_AS(run_episode(rng, 0.4, cfg, ConstantPolicy{{-0.3, 0.0}, 0}),
                    std::invalid_argument);
  }
}

TEST_CASE("monte carlo agrees with the exact tree value") {
  ReceiverConfig cfg;
  cfg.layers = 2;
  cfg.beta_grid = {-0.8, -0.4, 0.0, 0.4, 0.8};

  ActionTree tree = ActionTree::make(2);
  tree.actions[0][0] = {-0.4, 0.5};
  tree.actions[1][0] = {0.4, 0.0};
  tree.actions[1][1] = {-0.8, 0.0};
  tree.guesses = {0, 1, 1, 1};

  SECTION("ideal model") {
    const double exact = exact_success_probability(0.4, tree, cfg);
    std::mt19937_64 rng(2024);
    const int n = 1'000'000;
    int wins = 0;
    for (int i = 0; i < n; ++i) wins += run_episode(rng, 0.4, cfg, TreePolicy{&tree}).reward;
    const double freq = static_cast<double>(wins) / n;
    const double sigma = std::sqrt(exact * (1.0 - exact) / n);
    CHECK(std::abs(freq - exact) < 4.0 * sigma);
  }

  SECTION("noisy model") {
    cfg.noise = {0.15, 0.1};
    const double exact = exact_success_probability(0.4, tree, cfg);
    std::mt19937_64 rng(77);
    const int n = 400'000;
    int wins = 0;
    for (int i = 0; i < n; ++i) wins += run_episode(rng, 0.4, cfg, TreePolicy{&tree}).reward;
    const double freq = static_cast<double>(wins) / n;
    const double sigma = std::sqrt(exact * (1.0 - exact) / n);
    CHECK(std::abs(freq - exact) < 4.0 * sigma);
  }

  SECTION("p_flip = 1/2 erases the sent phase") {
    cfg.noise = {0.0, 0.5};
    CHECK(exact_success_probability(0.4, tree, cfg) == Catch::Approx(0.5).margin(1e-12));
    std::mt19937_64 rng(5);
    const int n = 100'000;
    int wins = 0;
    for (int i = 0; i < n; ++i) wins += run_episode(rng, 0.4, cfg, TreePolicy{&tree}).reward;
    CHECK(std::abs(static_cast<double>(wins) / n - 0.5) < 4.0 * 0.5 / std::sqrt(n));
  }
}
