#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/sinh_sinh.hpp>

#include "gbpa/engine.hpp"
#include "gbpa/environments.hpp"
#include "gbpa/perturbation.hpp"
#include "gbpa/stats.hpp"

using namespace gbpa;
using Catch::Approx;

namespace {

PerturbationConfig ftpl(const PerturbationModel& m, double eta, std::size_t cap = 100) {
  PerturbationConfig c;
  c.model = m;
  c.eta = eta;
  c.gr_cap = cap;
  return c;
}

}  // namespace

TEST_CASE("overwhelming gap selects the leader") {
  const std::vector<double> g{0.0, -1e6};
  const auto est = ftpl_gradient_mc(g, ftpl(PerturbationModel::exponential(1.0), 1.0), 10000, 1);
  REQUIRE(est.raw[0] >= 0.999);
}

TEST_CASE("symmetric gains give uniform frequencies") {
  for (const auto& m : {PerturbationModel::exponential(1.0), PerturbationModel::gumbel(),
                        PerturbationModel::frechet(3.0), PerturbationModel::pareto_modified(2.0)}) {
    const auto est = ftpl_gradient_mc(std::vector<double>(4, -2.0), ftpl(m, 1.0), 100000, 3);
    for (std::size_t i = 0; i < 4; ++i) {
      REQUIRE(std::abs(est.raw[i] - 0.25) <= 3.0 * std::sqrt(0.25 * 0.75 / 100000));
    }
  }
}

TEST_CASE("Gumbel perturbation reproduces softmax") {
  const std::vector<double> g{-1.0, 0.0};
  const auto est = ftpl_gradient_mc(g, ftpl(PerturbationModel::gumbel(), 1.0), 1000000, 5);
  const double p1 = 1.0 / (1.0 + std::exp(-1.0));
  REQUIRE(p1 == Approx(0.73106).margin(1e-5));
  REQUIRE(std::abs(est.raw[1] - p1) <= 3.0 * est.std_errors[1]);
  REQUIRE(std::abs(est.raw[0] - (1.0 - p1)) <= 3.0 * est.std_errors[0]);
}

TEST_CASE("two-arm mirrored exponential matches quadrature") {
  // P(arm 1 wins) = int f(z) P(Z' < z + G_1 - G_0) dz for G = (-0.5, 0).
  const auto m = PerturbationModel::exponential(1.0).mirrored();
  boost::math::quadrature::sinh_sinh<double> integrator;
  const double p1 = integrator.integrate([&](double z) { return m.pdf(z) * m.cdf(z + 0.5); });
  const std::vector<double> g{-0.5, 0.0};
  const auto est = ftpl_gradient_mc(g, ftpl(m, 1.0), 1000000, 9);
  REQUIRE(std::abs(est.raw[1] - p1) <= 3.0 * est.std_errors[1]);

  // The conditional gradient estimator targets the same quantity.
  const NoiseBank bank(m, 1.0, 2, 200000, 11);
  const auto [grad, se] = bank.conditional_gradient(g);
  REQUIRE(std::abs(grad[1] - p1) <= 4.0 * se[1]);
}

TEST_CASE("scale equivariance and Gumbel location invariance") {
  Rng rng(13);
  std::vector<double> u(6);
  std::vector<double> g(6);
  int mismatches = 0;
  for (int k = 0; k < 20000; ++k) {
    for (double& v : u) v = rng.uniform();
    for (double& v : g) v = -5.0 * rng.uniform();
    const std::size_t base = perturbed_argmax(g, PerturbationModel::gumbel(0.0, 1.0), 0.7, u);
    mismatches += base != perturbed_argmax(g, PerturbationModel::gumbel(0.0, 4.0), 0.7 / 4.0, u);
    mismatches += base != perturbed_argmax(g, PerturbationModel::gumbel(2.5, 1.0), 0.7, u);
    const std::size_t fr = perturbed_argmax(g, PerturbationModel::frechet(3.0, 1.0), 0.7, u);
    mismatches += fr != perturbed_argmax(g, PerturbationModel::frechet(3.0, 2.0), 0.35, u);
  }
  REQUIRE(mismatches == 0);
}

TEST_CASE("geometric resampling law") {
  SECTION("degenerate leader gives K = 1") {
    const auto cfg = ftpl(PerturbationModel::exponential(1.0), 1.0, 50);
    Rng rng(1);
    for (int k = 0; k < 100; ++k) {
      const auto r = geometric_resampling_estimate(std::vector<double>{0.0, -1e6}, cfg, 0, -0.7, rng);
      REQUIRE(r.draws == 1);
      REQUIRE(r.estimate[0] == -0.7);
      REQUIRE(r.estimate[1] == 0.0);
    }
  }
  SECTION("truncated geometric mean") {
    REQUIRE(truncated_geometric_mean(0.5, 2) == Approx(1.5));
    REQUIRE(truncated_geometric_mean(1.0, 7) == 1.0);
    REQUIRE(truncated_geometric_mean(0.1, 1) == Approx(1.0));
    // Direct summation oracle.
    for (double p : {0.03, 0.2, 0.7}) {
      for (std::size_t m : {1u, 5u, 40u}) {
        double s = 0.0;
        for (std::size_t k = 1; k < m; ++k) s += k * p * std::pow(1 - p, k - 1);
        s += m * std::pow(1 - p, m - 1);
        REQUIRE(truncated_geometric_mean(p, m) == Approx(s).epsilon(1e-12));
      }
    }
  }
  SECTION("empirical K matches min(Geometric(p), M)") {
    // Two-arm Gumbel: P(arm 0) = 1 / (1 + e^{-G_0}) exactly.
    const double p = 0.3;
    const std::size_t cap = 8;
    const auto cfg = ftpl(PerturbationModel::gumbel(), 1.0, cap);
    const std::vector<double> g{std::log(p / (1 - p)), 0.0};
    Rng rng(21);
    std::vector<double> obs(cap, 0.0);
    double sum = 0.0;
    double sq = 0.0;
    const int reps = 50000;
    for (int r = 0; r < reps; ++r) {
      const std::size_t k = geometric_resample_count(g, cfg, 0, rng);
      obs[k - 1] += 1.0;
      sum += k;
      sq += double(k) * k;
    }
    std::vector<double> expct(cap);
    for (std::size_t k = 1; k <= cap; ++k) {
      const double tail = std::pow(1 - p, k - 1);
      expct[k - 1] = reps * (k < cap ? p * tail : tail);
    }
    REQUIRE(stats::chi_square_test(obs, expct).p_value >= 0.01);
    const double mean = sum / reps;
    const double se = std::sqrt((sq / reps - mean * mean) / reps);
    REQUIRE(std::abs(mean - truncated_geometric_mean(p, cap)) <= 3.0 * se);
  }
}

TEST_CASE("resampled estimate has the truncated-bias mean") {
  // E[K g_i 1{i chosen}] = g_i (1 - (1 - p_i)^M) for Gumbel noise with p = softmax.
  const std::vector<double> g{-0.5, 0.0, -2.0};
  const std::vector<double> loss{-0.8, -0.3, -1.0};
  const std::size_t cap = 4;
  const auto cfg = ftpl(PerturbationModel::gumbel(), 1.0, cap);
  double z = 0.0;
  for (double v : g) z += std::exp(v);
  RunStreams streams(31);
  const int reps = 200000;
  std::vector<double> sum(3, 0.0);
  std::vector<double> sq(3, 0.0);
  for (int r = 0; r < reps; ++r) {
    const std::size_t arm = ftpl_sample(g, cfg, streams.sampling);
    const auto est = geometric_resampling_estimate(g, cfg, arm, loss[arm], streams.resampling);
    for (int i = 0; i < 3; ++i) {
      sum[i] += est.estimate[i];
      sq[i] += est.estimate[i] * est.estimate[i];
    }
  }
  for (int i = 0; i < 3; ++i) {
    const double p = std::exp(g[i]) / z;
    const double expected = loss[i] * (1.0 - std::pow(1.0 - p, cap));
    const double mean = sum[i] / reps;
    const double se = std::sqrt((sq[i] / reps - mean * mean) / reps);
    REQUIRE(std::abs(mean - expected) <= 4.0 * se);
  }
}

TEST_CASE("hazard-rate bound calculator") {
  REQUIRE(gr_bias_bound(10, 1000, 100) == Approx(10000.0 / (100.0 * std::numbers::e)));
  REQUIRE(gr_bias_bound(10, 1000, 100) == Approx(36.79).margin(0.01));
  REQUIRE(default_gr_cap(10, 10000) == 317);

  const auto ex = PerturbationModel::exponential(1.0);
  const double eta = tune_eta(ex, 10, 1000);
  REQUIRE(eta == Approx(std::sqrt(10.0 * 1000.0 / 2.9289682539682538)));
  const HazardBound b = hazard_regret_bound(ex, eta, 10, 1000);
  REQUIRE(b.value == Approx(2.0 * std::sqrt(10.0 * 1000.0 * 2.9289682539682538)));
  REQUIRE(b.value == Approx(342.3).margin(0.05));

  const auto gu = PerturbationModel::gumbel();
  const HazardBound bg = hazard_regret_bound(gu, tune_eta(gu, 10, 1000), 10, 1000);
  REQUIRE(bg.value == Approx(2.0 * std::sqrt(1000.0 * 10.0 * (std::log(10.0) + kEulerGamma))));

  REQUIRE(tune_eta(ex, 10, 0) == 0.0);
  REQUIRE(hazard_regret_bound(ex, 0.0, 10, 0).value == 0.0);
  REQUIRE(hazard_regret_bound(PerturbationModel::gaussian(), 1.0, 10, 100).unbounded);
  REQUIRE_THROWS_AS(tune_eta(PerturbationModel::gaussian(), 10, 100), InvalidArgument);

  // Scaling identities of the noise.
  REQUIRE(scaled_expected_max(2.0, 3.0) == 6.0);
  REQUIRE(scaled_sup_hazard(2.0, 4.0) == 0.5);
}

TEST_CASE("noise bank estimates are coherent") {
  const auto m = PerturbationModel::exponential(1.0);
  const NoiseBank bank(m, 2.0, 4, 50000, 41);
  const std::vector<double> g{-1.0, -0.2, 0.0, -3.0};
  const auto [phi, se] = bank.potential(g);
  REQUIRE(phi >= max_potential(g));
  REQUIRE(se > 0.0);
  const auto f = bank.argmax_frequencies(g);
  double total = 0.0;
  for (double v : f) total += v;
  REQUIRE(total == Approx(1.0).epsilon(1e-14));
  const auto [grad, gse] = bank.conditional_gradient(g);
  for (std::size_t i = 0; i < 4; ++i) {
    REQUIRE(std::abs(grad[i] - f[i]) <= 5.0 * std::sqrt(f[i] * (1 - f[i]) / 50000) + 5.0 * gse[i]);
    const auto [h, hse] = bank.hessian_diagonal(g, i, 1e-5);
    REQUIRE(h >= -5.0 * hse);
  }
  // Potential(G + c) = Potential(G) + c exactly under common random numbers.
  std::vector<double> shifted = g;
  for (double& v : shifted) v -= 1.5;
  REQUIRE(bank.potential(shifted).first == Approx(phi - 1.5).epsilon(1e-12));
}

TEST_CASE("perturbation smoothers are differentially consistent with (1, sup h)") {
  for (const auto& m : {PerturbationModel::exponential(1.0), PerturbationModel::gumbel(),
                        PerturbationModel::pareto_modified(3.0)}) {
    INFO(m.name());
    PerturbationConfig cfg = ftpl(m, 1.5);
    const auto probes = random_probes(4, 10, 43);
    ConsistencyOptions co;
    co.mc_samples = 50000;
    co.seed = 47;
    const double c = scaled_sup_hazard(sup_hazard(m).value, cfg.eta);
    REQUIRE(check_differential_consistency(cfg, probes, 1.0, c, co).ok());
  }
}

TEST_CASE("per-round divergence stays under N sup h / eta in simulation") {
  const std::size_t n = 5;
  const std::size_t t = 300;
  const auto m = PerturbationModel::exponential(1.0);
  PerturbationConfig cfg = ftpl(m, tune_eta(m, n, t), default_gr_cap(n, t));
  const LossMatrix losses = generate(BestArmGap{}, n, t, 3);
  LedgerOptions lo;
  lo.mc_samples = 20000;
  lo.seed = 5;
  std::vector<double> per_round;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Trace tr = run_gbpa(cfg, losses, seed_for_index(7, s));
    const PenaltyLedger l = penalty_decomposition(tr, cfg, lo);
    for (double d : l.per_round_divergence) {
      REQUIRE(d >= -1e-8);
      per_round.push_back(d);
    }
  }
  const double mean = mean_of(per_round);
  const double se = std_error_of(per_round);
  const double cap = static_cast<double>(n) * sup_hazard(m).value / cfg.eta;
  REQUIRE(mean <= cap * (1.0 + 5.0 * se / cap) + 5.0 * se);
}
