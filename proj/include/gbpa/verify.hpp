#pragma once

// Self-check battery: gradient oracles, hazard grids, Geometric Resampling
// law, Gumbel-softmax equivalence, telescoping identity, differential
// consistency and adapter identities. Failures are report entries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gbpa/distributions.hpp"
#include "gbpa/engine.hpp"
#include "gbpa/environments.hpp"
#include "gbpa/perturbation.hpp"
#include "gbpa/rng.hpp"
#include "gbpa/stats.hpp"
#include "gbpa/tsallis.hpp"

namespace gbpa {

enum class CheckStatus { kPass, kFail, kInfo };

inline std::string status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::kPass: return "pass";
    case CheckStatus::kFail: return "fail";
    case CheckStatus::kInfo: return "info";
  }
  return "fail";
}

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::kFail;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 20240601;
  // Fault injection: overrides the Tsallis root-finder tolerance.
  std::optional<double> tsallis_tolerance;
  std::size_t gumbel_samples = 1000000;
  std::size_t gr_replicates = 20000;
  std::size_t hessian_samples = 200000;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool all_passed() const {
    return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) {
      return c.status == CheckStatus::kFail;
    });
  }
};

namespace detail {

inline std::string fmt_g(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

inline CheckResult make_check(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok ? CheckStatus::kPass : CheckStatus::kFail,
          std::move(detail)};
}

// Tsallis potential at an arbitrary G, using Phi(G + c 1) = Phi(G) + c.
inline double shifted_tsallis_potential(std::vector<double> g, const TsallisConfig& cfg) {
  const double top = *std::max_element(g.begin(), g.end());
  const double shift = top > 0.0 ? top : 0.0;
  for (double& v : g) v -= shift;
  return tsallis_potential(g, cfg) + shift;
}

}  // namespace detail

/// Largest |dPhi/dG_i (central difference) - p_i| over random probes.
inline double tsallis_fd_gradient_error(const TsallisConfig& cfg, std::size_t probes,
                                        std::uint64_t seed, double step = 1e-5) {
  Rng rng(seed, Stream::kProbe);
  double worst = 0.0;
  for (std::size_t k = 0; k < probes; ++k) {
    const std::size_t n = 2 + k % 5;
    std::vector<double> g(n);
    for (double& v : g) v = -10.0 * rng.uniform();
    std::vector<double> p;
    try {
      const SimplexPoint sp = tsallis_distribution(g, cfg);
      p.assign(sp.probs().begin(), sp.probs().end());
    } catch (const Error&) {
      return kInf;
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> up = g;
      std::vector<double> dn = g;
      up[i] += step;
      dn[i] -= step;
      const double fd = (detail::shifted_tsallis_potential(up, cfg) -
                         detail::shifted_tsallis_potential(dn, cfg)) /
                        (2.0 * step);
      worst = std::max(worst, std::abs(fd - p[i]));
    }
  }
  return worst;
}

/// Brute-force maximiser of <p, G> - eta S_alpha(p) over the simplex grid
/// with spacing 1/resolution (N = 2 or 3).
inline std::vector<double> tsallis_grid_oracle(std::span<const double> g, double alpha,
                                               double eta, std::size_t resolution) {
  const std::size_t n = g.size();
  detail::require(n == 2 || n == 3, "grid oracle: N must be 2 or 3");
  const double h = 1.0 / static_cast<double>(resolution);
  std::vector<double> best;
  double best_v = -kInf;
  auto consider = [&](const std::vector<double>& p) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += p[i] * g[i];
    v -= eta * tsallis_entropy(p, alpha);
    if (v > best_v) {
      best_v = v;
      best = p;
    }
  };
  for (std::size_t a = 0; a <= resolution; ++a) {
    if (n == 2) {
      consider({a * h, 1.0 - a * h});
      continue;
    }
    for (std::size_t b = 0; a + b <= resolution; ++b) {
      consider({a * h, b * h, 1.0 - (a + b) * h});
    }
  }
  return best;
}

inline CheckResult check_tsallis_gradient(const VerifyOptions& o) {
  TsallisConfig cfg;
  if (o.tsallis_tolerance) cfg.newton_tol = *o.tsallis_tolerance;
  const double err = tsallis_fd_gradient_error(cfg, 100, seed_for_index(o.seed, 1));
  return detail::make_check("tsallis_fd_gradient", err <= 1e-6,
                            "Linf=" + detail::fmt_g(err) + " (tol 1e-6, 100 probes, N<=6)");
}

inline CheckResult check_tsallis_grid(const VerifyOptions& o) {
  TsallisConfig cfg;
  if (o.tsallis_tolerance) cfg.newton_tol = *o.tsallis_tolerance;
  Rng rng(seed_for_index(o.seed, 2), Stream::kProbe);
  double worst_ratio = 0.0;
  for (std::size_t n : {2u, 3u}) {
    const std::size_t res = n == 2 ? 20000 : 400;
    const double h = 1.0 / static_cast<double>(res);
    for (int k = 0; k < 5; ++k) {
      std::vector<double> g(n);
      for (double& v : g) v = -3.0 * rng.uniform();
      const auto grid = tsallis_grid_oracle(g, cfg.alpha, cfg.eta, res);
      const SimplexPoint p = tsallis_distribution(g, cfg);
      for (std::size_t i = 0; i < n; ++i) {
        worst_ratio = std::max(worst_ratio, std::abs(grid[i] - p[i]) / h);
      }
    }
  }
  return detail::make_check("tsallis_grid_oracle", worst_ratio <= 2.0,
                            "max error / grid step=" + detail::fmt_g(worst_ratio) +
                                " (tol 2)");
}

/// Families exercised by the distribution grids.
inline std::vector<PerturbationModel> verification_models() {
  return {PerturbationModel::gumbel(0.0, 1.0),
          PerturbationModel::frechet(3.0),
          PerturbationModel::weibull_modified(0.5),
          PerturbationModel::pareto_modified(3.0),
          PerturbationModel::gamma(2.0, 1.0),
          PerturbationModel::exponential(1.0),
          PerturbationModel::gaussian(0.0, 1.0),
          PerturbationModel::exponential(1.0).mirrored(),
          PerturbationModel::pareto(2.0, 1.0).conditioned_above(1.0),
          PerturbationModel::weibull(0.5).conditioned_above(1.0)};
}

/// u grid on [1e-6, 1 - 1e-6]: linear in the bulk, geometric toward both ends.
inline std::vector<double> unit_grid() {
  std::vector<double> u;
  for (int k = 1; k < 1000; ++k) u.push_back(k / 1000.0);
  for (double e = 1e-6; e < 1e-3; e *= 2.0) {
    u.push_back(e);
    u.push_back(1.0 - e);
  }
  return u;
}

inline CheckResult check_hazard_identity() {
  double worst = 0.0;
  for (const PerturbationModel& m : verification_models()) {
    for (double u : unit_grid()) {
      const double x = m.quantile(u);
      const double h = m.hazard(x);
      const double ref = m.pdf(x) / m.sf(x);
      worst = std::max(worst, std::abs(h - ref) / std::max(1.0, std::abs(ref)));
    }
  }
  return detail::make_check("hazard_identity", worst <= 1e-12,
                            "max rel error=" + detail::fmt_g(worst) + " (tol 1e-12)");
}

inline CheckResult check_inverse_cdf() {
  double worst = 0.0;
  for (const PerturbationModel& m : verification_models()) {
    for (double u : unit_grid()) {
      worst = std::max(worst, std::abs(m.cdf(m.quantile(u)) - u));
    }
  }
  return detail::make_check("inverse_cdf", worst <= 1e-10,
                            "max |F(Q(u)) - u|=" + detail::fmt_g(worst) + " (tol 1e-10)");
}

/// Adapter identities checked against closed forms of the base law.
inline double adapter_identity_error() {
  double worst = 0.0;
  auto track = [&](double a, double b) {
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
  };
  const double rate = 1.5;
  const PerturbationModel ex = PerturbationModel::exponential(rate);
  const PerturbationModel mir = ex.mirrored();
  for (int k = -400; k <= 400; ++k) {
    const double x = k / 40.0;
    const double ax = std::abs(x);
    // Mirrored Exponential: density rate e^{-rate|x|}/2.
    track(mir.pdf(x), 0.5 * rate * std::exp(-rate * ax));
    if (x >= 0.0) {
      track(mir.hazard(x), rate);
    } else {
      const double f = rate * std::exp(-rate * ax);
      const double cdf = -std::expm1(-rate * ax);
      track(mir.hazard(x), f / (1.0 + cdf));
    }
  }
  for (double t : {0.25, 1.0, 3.0}) {
    const PerturbationModel pareto = PerturbationModel::pareto(2.0, 1.0);
    const PerturbationModel cond = pareto.conditioned_above(t);
    const PerturbationModel cond_ex = ex.conditioned_above(t);
    for (int k = 0; k <= 400; ++k) {
      const double y = k / 20.0;
      // Pareto(2, 1): h(x) = 2/x on x >= 1.
      const double xt = std::max(1.0, t + y);
      if (t + y >= 1.0) track(cond.hazard(y), 2.0 / xt);
      track(cond.hazard(y), pareto.hazard(t + y));
      // Memorylessness: the conditioned law is the base law.
      track(cond_ex.sf(y), std::exp(-rate * y));
      track(cond_ex.hazard(y), rate);
      track(cond_ex.cdf(y), ex.cdf(y));
    }
  }
  return worst;
}

inline CheckResult check_adapters() {
  const double err = adapter_identity_error();
  return detail::make_check("adapter_identities", err <= 1e-10,
                            "max rel error=" + detail::fmt_g(err) + " (tol 1e-10)");
}

struct GrLawResult {
  double p = 0.0;
  std::size_t cap = 0;
  double chi2_p_value = 0.0;
  double mean_k = 0.0;
  double se_k = 0.0;
  double expected_k = 0.0;
  bool ok = false;
};

/// Empirical law of K for a two-arm Gumbel smoother whose arm-0 probability
/// is exactly p.
inline GrLawResult gr_law(double p, std::size_t cap, std::size_t replicates,
                          std::uint64_t seed) {
  PerturbationConfig cfg;
  cfg.model = PerturbationModel::gumbel(0.0, 1.0);
  cfg.eta = 1.0;
  cfg.gr_cap = cap;
  const std::vector<double> g{std::log(p / (1.0 - p)), 0.0};
  Rng rng(seed, Stream::kResampling);
  std::vector<double> observed(cap, 0.0);
  std::vector<double> ks;
  ks.reserve(replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    const std::size_t k = geometric_resample_count(g, cfg, 0, rng);
    observed[k - 1] += 1.0;
    ks.push_back(static_cast<double>(k));
  }
  std::vector<double> expected(cap);
  const double dr = static_cast<double>(replicates);
  for (std::size_t k = 1; k <= cap; ++k) {
    const double tail = std::pow(1.0 - p, static_cast<double>(k - 1));
    expected[k - 1] = dr * (k < cap ? p * tail : tail);
  }
  GrLawResult out;
  out.p = p;
  out.cap = cap;
  out.chi2_p_value = stats::chi_square_test(observed, expected).p_value;
  out.mean_k = mean_of(ks);
  out.se_k = std_error_of(ks);
  out.expected_k = truncated_geometric_mean(p, cap);
  out.ok = out.chi2_p_value >= 0.01 &&
           std::abs(out.mean_k - out.expected_k) <= 3.0 * out.se_k + 1e-12;
  return out;
}

inline CheckResult check_gr_law(const VerifyOptions& o) {
  bool ok = true;
  std::string detail;
  std::uint64_t s = 0;
  for (double p : {0.1, 0.5}) {
    for (std::size_t m : {2u, 10u, 100u}) {
      const GrLawResult r = gr_law(p, m, o.gr_replicates, seed_for_index(o.seed, 100 + s++));
      ok = ok && r.ok;
      detail += "p=" + detail::fmt_g(p) + ",M=" + std::to_string(m) +
                ": chi2 p=" + detail::fmt_g(r.chi2_p_value) +
                " E[K]=" + detail::fmt_g(r.mean_k) + "/" + detail::fmt_g(r.expected_k) + "; ";
    }
  }
  return detail::make_check("geometric_resampling_law", ok, detail);
}

/// Largest |freq_i - softmax_i| / SE_i-scaled statistic over probes:
/// returns max over probes of Linf / max_i SE_i.
inline double gumbel_softmax_ratio(std::size_t samples, std::size_t probes,
                                   std::uint64_t seed) {
  PerturbationConfig cfg;
  cfg.model = PerturbationModel::gumbel(0.0, 1.0);
  cfg.eta = 1.0;
  Rng rng(seed, Stream::kProbe);
  double worst = 0.0;
  for (std::size_t k = 0; k < probes; ++k) {
    std::vector<double> g(5);
    for (double& v : g) v = -5.0 * rng.uniform();
    const GradientEstimate est = ftpl_gradient_mc(g, cfg, samples, seed + k);
    const SimplexPoint ref = softmax_distribution(g, 1.0);
    double linf = 0.0;
    double se = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      linf = std::max(linf, std::abs(est.raw[i] - ref[i]));
      se = std::max(se, est.std_errors[i]);
    }
    worst = std::max(worst, linf / se);
  }
  return worst;
}

inline CheckResult check_gumbel_softmax(const VerifyOptions& o) {
  const double r = gumbel_softmax_ratio(o.gumbel_samples, 20, seed_for_index(o.seed, 3));
  return detail::make_check("gumbel_softmax_equivalence", r <= 3.0,
                            "max Linf/SE=" + detail::fmt_g(r) + " (tol 3, " +
                                std::to_string(o.gumbel_samples) + " samples)");
}

/// Largest telescoping residual over random deterministic loss sequences.
inline double telescoping_residual(const SmootherConfig& s, std::size_t sequences,
                                   std::size_t rounds, std::uint64_t seed) {
  Rng rng(seed, Stream::kProbe);
  double worst = 0.0;
  for (std::size_t k = 0; k < sequences; ++k) {
    const std::size_t n = 2 + k % 7;
    std::vector<std::vector<double>> inc(rounds, std::vector<double>(n));
    for (auto& row : inc) {
      for (double& v : row) v = -rng.uniform();
    }
    worst = std::max(worst, penalty_decomposition(inc, n, s).telescoping_residual);
  }
  return worst;
}

inline CheckResult check_telescoping(const VerifyOptions& o) {
  TsallisConfig cfg;
  if (o.tsallis_tolerance) cfg.newton_tol = *o.tsallis_tolerance;
  cfg.eta = 5.0;
  double r = kInf;
  std::string what;
  try {
    r = telescoping_residual(cfg, 20, 200, seed_for_index(o.seed, 4));
  } catch (const Error& e) {
    what = std::string(" error: ") + e.what();
  }
  return detail::make_check("telescoping_identity", r <= 1e-8,
                            "max residual=" + detail::fmt_g(r) + " (tol 1e-8)" + what);
}

inline CheckResult check_consistency_tsallis(const VerifyOptions& o) {
  TsallisConfig cfg;
  if (o.tsallis_tolerance) cfg.newton_tol = *o.tsallis_tolerance;
  cfg.alpha = 0.5;
  cfg.eta = 2.0;
  const auto probes = random_probes(5, 20, seed_for_index(o.seed, 5));
  ConsistencyOptions co;
  const ConsistencyReport rep = check_differential_consistency(
      cfg, probes, 2.0 - cfg.alpha, 1.0 / (cfg.eta * cfg.alpha), co);
  return detail::make_check("differential_consistency_tsallis", rep.ok(),
                            "max H/g^gamma=" + detail::fmt_g(rep.max_ratio) +
                                " vs C=" + detail::fmt_g(rep.c) +
                                ", violations=" + std::to_string(rep.violations));
}

inline CheckResult check_consistency_ftpl(const VerifyOptions& o,
                                          const PerturbationModel& model,
                                          const std::string& name) {
  PerturbationConfig cfg;
  cfg.model = model;
  cfg.eta = 1.0;
  const auto probes = random_probes(5, 20, seed_for_index(o.seed, 6));
  ConsistencyOptions co;
  co.mc_samples = o.hessian_samples;
  co.seed = seed_for_index(o.seed, 7);
  const double c = scaled_sup_hazard(sup_hazard(model).value, cfg.eta);
  const ConsistencyReport rep = check_differential_consistency(cfg, probes, 1.0, c, co);
  return detail::make_check("differential_consistency_" + name, rep.ok(),
                            "max H/g=" + detail::fmt_g(rep.max_ratio) +
                                " vs sup h=" + detail::fmt_g(c) +
                                ", violations=" + std::to_string(rep.violations));
}

/// FTPL with Gaussian noise has no hazard bound; only observed regret is
/// reported.
inline CheckResult gaussian_probe(const VerifyOptions& o) {
  const std::size_t n = 10;
  const std::size_t t = 2000;
  PerturbationConfig cfg;
  cfg.model = PerturbationModel::gaussian(0.0, 1.0);
  cfg.eta = std::sqrt(static_cast<double>(t) / std::log(static_cast<double>(n)));
  cfg.gr_cap = default_gr_cap(n, t);
  const LossMatrix losses = generate(BestArmGap{}, n, t, seed_for_index(o.seed, 8));
  std::vector<Trace> traces;
  for (std::uint64_t s = 0; s < 10; ++s) {
    traces.push_back(run_gbpa(cfg, losses, seed_for_index(o.seed, s)));
  }
  const RegretEstimate r = expected_regret(losses, traces);
  return {"gaussian_conjecture_probe", CheckStatus::kInfo,
          "no guarantee; observed regret " + detail::fmt_g(r.mean) + " +- " +
              detail::fmt_g(r.std_error) + " (N=10, T=2000, 10 seeds)"};
}

inline VerifyReport verify_suite(const VerifyOptions& o = {}) {
  VerifyReport rep;
  auto guarded = [&](const std::string& name, const std::function<CheckResult()>& fn) {
    try {
      rep.checks.push_back(fn());
    } catch (const std::exception& e) {
      rep.checks.push_back({name, CheckStatus::kFail, std::string("error: ") + e.what()});
    }
  };
  guarded("tsallis_fd_gradient", [&] { return check_tsallis_gradient(o); });
  guarded("tsallis_grid_oracle", [&] { return check_tsallis_grid(o); });
  guarded("hazard_identity", [] { return check_hazard_identity(); });
  guarded("inverse_cdf", [] { return check_inverse_cdf(); });
  guarded("adapter_identities", [] { return check_adapters(); });
  guarded("geometric_resampling_law", [&] { return check_gr_law(o); });
  guarded("gumbel_softmax_equivalence", [&] { return check_gumbel_softmax(o); });
  guarded("telescoping_identity", [&] { return check_telescoping(o); });
  guarded("differential_consistency_tsallis", [&] { return check_consistency_tsallis(o); });
  guarded("differential_consistency_exponential", [&] {
    return check_consistency_ftpl(o, PerturbationModel::exponential(1.0), "exponential");
  });
  guarded("differential_consistency_gumbel", [&] {
    return check_consistency_ftpl(o, PerturbationModel::gumbel(0.0, 1.0), "gumbel");
  });
  guarded("gaussian_conjecture_probe", [&] { return gaussian_probe(o); });
  return rep;
}

inline nlohmann::json verify_to_json(const VerifyReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name}, {"status", status_name(c.status)}, {"detail", c.detail}});
  }
  return {{"all_passed", r.all_passed()}, {"checks", checks}};
}

}  // namespace gbpa
