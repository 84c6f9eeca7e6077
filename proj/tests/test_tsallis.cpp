#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gbpa/engine.hpp"
#include "gbpa/rng.hpp"
#include "gbpa/tsallis.hpp"

using namespace gbpa;
using Catch::Approx;

namespace {

TsallisConfig ts(double alpha, double eta) {
  TsallisConfig c;
  c.alpha = alpha;
  c.eta = eta;
  return c;
}

// Independent oracle: objective <p, G> - eta S_alpha(p) written out directly.
double objective(const std::vector<double>& p, const std::vector<double>& g, double alpha,
                 double eta) {
  double lin = 0.0;
  double pw = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    lin += p[i] * g[i];
    pw += std::pow(p[i], alpha);
  }
  return lin - eta * (1.0 - pw) / (1.0 - alpha);
}

std::vector<double> softmax_oracle(const std::vector<double>& g, double eta) {
  std::vector<double> p(g.size());
  double z = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) z += std::exp(eta * g[i]);
  for (std::size_t i = 0; i < g.size(); ++i) p[i] = std::exp(eta * g[i]) / z;
  return p;
}

}  // namespace

TEST_CASE("uniform gains give the uniform distribution") {
  for (double alpha : {0.1, 0.5, 0.9}) {
    for (double eta : {0.3, 1.0, 50.0}) {
      const SimplexPoint p = tsallis_distribution(std::vector<double>(4, 0.0), ts(alpha, eta));
      for (std::size_t i = 0; i < 4; ++i) REQUIRE(p[i] == Approx(0.25).margin(1e-12));
    }
  }
}

TEST_CASE("two-arm Tsallis matches a brute-force grid maximiser") {
  const std::vector<double> g{-1.0, 0.0};
  double best = -1e300;
  double best_q = 0.0;
  for (int k = 0; k <= 10000; ++k) {
    const double q = k * 1e-4;
    const double v = objective({q, 1.0 - q}, g, 0.5, 1.0);
    if (v > best) {
      best = v;
      best_q = q;
    }
  }
  const SimplexPoint p = tsallis_distribution(g, ts(0.5, 1.0));
  REQUIRE(std::abs(p[0] - best_q) <= 2e-4);
  REQUIRE(std::abs(p[1] - (1.0 - best_q)) <= 2e-4);
  // The potential is the maximum value of the objective.
  REQUIRE(tsallis_potential(g, ts(0.5, 1.0)) == Approx(best).margin(1e-6));
  REQUIRE(tsallis_potential(g, ts(0.5, 1.0)) >= best - 1e-12);
}

TEST_CASE("three-arm Tsallis matches a simplex grid to twice the resolution") {
  Rng r(17);
  const int res = 300;
  const double h = 1.0 / res;
  for (int rep = 0; rep < 6; ++rep) {
    const std::vector<double> g{-3.0 * r.uniform(), -3.0 * r.uniform(), -3.0 * r.uniform()};
    const double alpha = 0.2 + 0.6 * r.uniform();
    std::vector<double> best_p;
    double best = -1e300;
    for (int a = 0; a <= res; ++a) {
      for (int b = 0; a + b <= res; ++b) {
        const std::vector<double> p{a * h, b * h, 1.0 - (a + b) * h};
        const double v = objective(p, g, alpha, 1.0);
        if (v > best) {
          best = v;
          best_p = p;
        }
      }
    }
    const SimplexPoint p = tsallis_distribution(g, ts(alpha, 1.0));
    for (int i = 0; i < 3; ++i) REQUIRE(std::abs(p[i] - best_p[i]) <= 2 * h);
  }
}

TEST_CASE("finite-difference gradient of the potential equals the distribution") {
  Rng r(19);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + k % 5;
    std::vector<double> g(n);
    for (double& v : g) v = -10.0 * r.uniform();
    const TsallisConfig cfg = ts(0.1 + 0.8 * r.uniform(), 0.5 + 2.0 * r.uniform());
    const SimplexPoint p = tsallis_distribution(g, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      auto shifted = [&](double d) {
        std::vector<double> x = g;
        x[i] += d;
        const double top = std::max(0.0, *std::max_element(x.begin(), x.end()));
        for (double& v : x) v -= top;
        return tsallis_potential(x, cfg) + top;
      };
      const double fd = (shifted(1e-5) - shifted(-1e-5)) / 2e-5;
      worst = std::max(worst, std::abs(fd - p[i]));
    }
  }
  REQUIRE(worst <= 1e-6);
}

TEST_CASE("alpha close to one recovers softmax") {
  const std::vector<double> g{-1.0, 0.0};
  const SimplexPoint p = tsallis_distribution(g, ts(1.0 - 1e-6, 1.0));
  REQUIRE(p[0] == Approx(0.26894).margin(1e-4));
  REQUIRE(p[1] == Approx(0.73106).margin(1e-4));

  // Error shrinks monotonically along alpha -> 1.
  const std::vector<double> g5{-0.3, -2.0, 0.0, -1.1, -0.7};
  const auto ref = softmax_oracle(g5, 1.0);
  double prev = 1e300;
  for (double alpha : {0.9, 0.99, 0.999, 1.0 - 1e-6}) {
    const SimplexPoint q = tsallis_distribution(g5, ts(alpha, 1.0));
    double err = 0.0;
    for (std::size_t i = 0; i < g5.size(); ++i) err = std::max(err, std::abs(q[i] - ref[i]));
    REQUIRE(err < prev);
    prev = err;
  }
  REQUIRE(prev < 1e-5);
}

TEST_CASE("softmax distribution examples") {
  const SimplexPoint p = softmax_distribution(std::vector<double>{-1.0, 0.0}, 1.0);
  REQUIRE(p[0] == Approx(std::exp(-1.0) / (1.0 + std::exp(-1.0))).epsilon(1e-14));
  REQUIRE(p[0] == Approx(0.26894).margin(1e-5));
  REQUIRE(p[1] == Approx(0.73106).margin(1e-5));

  const SimplexPoint u = softmax_distribution(std::vector<double>{-3.0, -3.0, -3.0}, 2.0);
  for (std::size_t i = 0; i < 3; ++i) REQUIRE(u[i] == Approx(1.0 / 3.0).epsilon(1e-14));

  const SimplexPoint z = softmax_distribution(std::vector<double>{-100.0, 0.0, -7.0}, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) REQUIRE(z[i] == Approx(1.0 / 3.0).epsilon(1e-9));

  // Large gaps stay on the simplex.
  const SimplexPoint far = softmax_distribution(std::vector<double>{-1e6, 0.0}, 1.0);
  REQUIRE(far[0] > 0.0);
  REQUIRE(far[1] == Approx(1.0));
}

TEST_CASE("potential at the origin equals the overestimation term") {
  for (double alpha : {0.25, 0.5, 0.75}) {
    for (std::size_t n : {2u, 5u, 10u}) {
      const double eta = 1.7;
      const double expected = eta * (std::pow(n, 1.0 - alpha) - 1.0) / (1.0 - alpha);
      const std::vector<double> zero(n, 0.0);
      REQUIRE(tsallis_potential(zero, ts(alpha, eta)) == Approx(expected).epsilon(1e-12));
      REQUIRE(tsallis_overestimation(alpha, eta, n) == Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("potential dominates the max and survives extreme gaps") {
  const std::vector<double> g{0.0, -1e6, -1e6};
  const double v = tsallis_potential(g, ts(0.5, 1.0));
  REQUIRE(v >= 0.0);
  REQUIRE(v < 1e-3);
  Rng r(23);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> x(4);
    for (double& e : x) e = -20.0 * r.uniform();
    REQUIRE(tsallis_potential(x, ts(0.5, 1.0)) >= max_potential(x));
  }
}

TEST_CASE("dual solve meets its tolerance and reports failures") {
  Rng r(29);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> g(6);
    for (double& v : g) v = -1e3 * r.uniform() * r.uniform();
    const TsallisSolution s = solve_tsallis(g, ts(0.05 + 0.9 * r.uniform(), 0.1 + r.uniform()));
    double sum = 0.0;
    for (double p : s.probs) {
      REQUIRE(p > 0.0);
      sum += p;
    }
    REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    REQUIRE(s.residual <= 1e-13);
    REQUIRE(s.lambda > *std::max_element(g.begin(), g.end()));
  }
  for (double alpha : {1e-3, 0.999, 1.0 - 1e-6}) {
    for (int k = 0; k < 100; ++k) {
      std::vector<double> g(5);
      for (double& v : g) v = -50.0 * r.uniform();
      const TsallisSolution s = solve_tsallis(g, ts(alpha, 0.1 + 10.0 * r.uniform()));
      REQUIRE(s.residual <= 1e-13);
    }
  }
  TsallisConfig one_step = ts(0.5, 1.0);
  one_step.max_iter = 1;
  REQUIRE_THROWS_AS(solve_tsallis(std::vector<double>{-5.0, 0.0, -1.0}, one_step), RootFindError);
}

TEST_CASE("invalid Tsallis arguments are rejected") {
  const std::vector<double> g{-1.0, 0.0};
  REQUIRE_THROWS_AS(tsallis_distribution(g, ts(1.0, 1.0)), InvalidArgument);
  REQUIRE_THROWS_AS(tsallis_distribution(g, ts(0.0, 1.0)), InvalidArgument);
  REQUIRE_THROWS_AS(tsallis_distribution(g, ts(0.5, 0.0)), InvalidArgument);
  REQUIRE_THROWS_AS(tsallis_distribution(std::vector<double>{0.5, 0.0}, ts(0.5, 1.0)),
                    InvalidArgument);
}

TEST_CASE("regret bound calculator") {
  const double eta = minimax_eta(0.5, 10, 1000);
  REQUIRE(eta == Approx(std::sqrt(500.0)));
  REQUIRE(tsallis_regret_bound(0.5, eta, 10, 1000) <= 2.0 * std::sqrt(2.0 * 1000 * 10));
  REQUIRE(2.0 * std::sqrt(2.0 * 1000 * 10) == Approx(282.84).margin(0.01));

  // T = 0 leaves only the overestimation term.
  REQUIRE(tsallis_regret_bound(0.3, 2.0, 7, 0) == Approx(tsallis_overestimation(0.3, 2.0, 7)));

  // The minimax eta minimises eta N^(1-a)/(1-a) + N^a T/(2 eta a).
  auto relaxed = [](double a, double eta, double n, double t) {
    return eta * std::pow(n, 1.0 - a) / (1.0 - a) + std::pow(n, a) * t / (2.0 * eta * a);
  };
  const double b = relaxed(0.3, minimax_eta(0.3, 10, 5000), 10, 5000);
  for (double f : {0.5, 0.9, 0.99, 1.01, 1.1, 2.0}) {
    REQUIRE(relaxed(0.3, f * minimax_eta(0.3, 10, 5000), 10, 5000) > b);
  }

  // At the minimax eta the bound stays under sqrt(2TN / (alpha (1 - alpha))).
  for (double a = 0.1; a < 0.95; a += 0.1) {
    REQUIRE(tsallis_regret_bound(a, minimax_eta(a, 10, 1000), 10, 1000) <=
            std::sqrt(2.0 * 1000 * 10 / (a * (1.0 - a))) + 1e-9);
  }
}

TEST_CASE("alpha -> 1 bound tends to the exponential-weights bound") {
  const std::size_t n = 10;
  const std::size_t t = 1000;
  const double ln = std::log(10.0);
  const double w = 3.0;  // regulariser weight
  const double limit = w * ln + n * t / (2.0 * w);
  REQUIRE(tsallis_regret_bound(1.0 - 1e-9, w, n, t) == Approx(limit).epsilon(1e-6));
  REQUIRE(softmax_regret_bound(1.0 / w, n, t) == Approx(limit).epsilon(1e-12));
  // Tuned learning rate gives sqrt(2 T N log N) <= 2 sqrt(T N log N).
  const double lr = std::sqrt(2.0 * ln / (n * t));
  REQUIRE(softmax_regret_bound(lr, n, t) == Approx(std::sqrt(2.0 * t * n * ln)));
  REQUIRE(softmax_regret_bound(lr, n, t) <= 2.0 * std::sqrt(t * n * ln));
}

TEST_CASE("regulariser divergences are non-negative and vanish on the diagonal") {
  Rng r(31);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> a(5);
    std::vector<double> b(5);
    double sa = 0.0;
    double sb = 0.0;
    for (int i = 0; i < 5; ++i) {
      a[i] = 0.01 + r.uniform();
      b[i] = 0.01 + r.uniform();
      sa += a[i];
      sb += b[i];
    }
    for (int i = 0; i < 5; ++i) {
      a[i] /= sa;
      b[i] /= sb;
    }
    REQUIRE(tsallis_regularizer_divergence(a, b, 0.5, 1.0) >= -1e-15);
    REQUIRE(softmax_regularizer_divergence(a, b, 1.0) >= -1e-15);
    REQUIRE(std::abs(tsallis_regularizer_divergence(a, a, 0.5, 1.0)) <= 1e-14);
  }
}

TEST_CASE("Tsallis differential consistency at the origin and random probes") {
  const TsallisConfig cfg = ts(0.5, 1.0);
  const std::vector<std::vector<double>> origin{{0.0, 0.0}};
  const ConsistencyReport r0 = check_differential_consistency(cfg, origin, 1.5, 2.0);
  REQUIRE(r0.ok());
  REQUIRE(r0.entries[0].gradient == Approx(0.5));
  REQUIRE(r0.entries[0].hessian <= 2.0 * std::pow(0.5, 1.5));

  for (double alpha : {0.2, 0.5, 0.8}) {
    const TsallisConfig c = ts(alpha, 1.5);
    const auto probes = random_probes(4, 20, 37);
    REQUIRE(check_differential_consistency(c, probes, 2.0 - alpha, 1.0 / (1.5 * alpha)).ok());
  }
}
