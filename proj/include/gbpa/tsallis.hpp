#pragma once

// Tsallis-entropy smoothing of max_i G_i.
//
//   Phi(G) = max_{p in simplex} <p, G> - eta * S_alpha(p),
//   S_alpha(p) = (1 - sum_i p_i^alpha) / (1 - alpha),   0 < alpha < 1.
//
// Stationarity gives p_i = (c / (lambda - G_i))^{1/(1-alpha)} with
// c = eta*alpha/(1-alpha); lambda > max_i G_i is the unique root of
// sum_i p_i(lambda) = 1. The alpha = 1 endpoint (exponential weights) has
// its own code path.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "gbpa/error.hpp"
#include "gbpa/types.hpp"

namespace gbpa {

struct TsallisConfig {
  double alpha = 0.5;
  double eta = 1.0;
  double newton_tol = 1e-13;  // on |sum_i p_i - 1|
  int max_iter = 200;

  void validate() const {
    detail::require(alpha > 0.0 && alpha < 1.0,
                    "tsallis: alpha must lie strictly inside (0, 1)");
    detail::require(eta > 0.0 && std::isfinite(eta), "tsallis: eta must be > 0");
    detail::require(newton_tol > 0.0 && max_iter > 0,
                    "tsallis: bad root-finder settings");
  }
};

/// Exponential weights p_i ~ exp(eta * G_i); eta is a learning rate here.
struct SoftmaxConfig {
  double eta = 1.0;

  void validate() const {
    detail::require(eta > 0.0 && std::isfinite(eta), "softmax: eta must be > 0");
  }
};

struct TsallisSolution {
  std::vector<double> probs;
  double lambda = 0.0;  // multiplier, lambda > max_i G_i
  int iterations = 0;
  double residual = 0.0;  // |sum p(lambda) - 1| before normalisation
};

namespace detail {

inline void check_gains(std::span<const double> g) {
  require(g.size() >= 2, "smoother: need at least 2 arms");
  for (double v : g) {
    require(std::isfinite(v), "smoother: non-finite input");
  }
}

inline double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace detail

/// Dual solve for the Tsallis maximiser. With lambda = max_i G_i + c (1 + nu),
/// c = eta alpha / (1 - alpha) and gaps d_i = max_i G_i - G_i,
/// log p_i = -log1p(nu + d_i / c) / (1 - alpha), which keeps full precision
/// for alpha close to 1.
inline TsallisSolution solve_tsallis(std::span<const double> g,
                                     const TsallisConfig& cfg) {
  cfg.validate();
  detail::check_gains(g);
  for (double v : g) detail::require(v <= 0.0, "tsallis: G must be non-positive");

  const std::size_t n = g.size();
  const double gmax = *std::max_element(g.begin(), g.end());
  const double expo = 1.0 / (1.0 - cfg.alpha);
  const double c = cfg.eta * cfg.alpha / (1.0 - cfg.alpha);

  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = (gmax - g[i]) / c;

  std::vector<double> logp(n);
  // f(nu) = log sum_i p_i(nu); strictly decreasing, root at 0.
  auto eval = [&](double nu, double* slope) {
    for (std::size_t i = 0; i < n; ++i) logp[i] = -expo * std::log1p(nu + e[i]);
    const double f = detail::log_sum_exp(logp);
    if (slope != nullptr) {
      double num = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        num += std::exp(logp[i] - f) / (1.0 + nu + e[i]);
      }
      *slope = -expo * num;
    }
    return f;
  };

  // Symmetric point: every arm at 1/n when all gaps vanish.
  const double nu0 = std::expm1((1.0 - cfg.alpha) * std::log(static_cast<double>(n)));
  double lo = -0.5;
  double hi = nu0 + 1.0 / c;
  double f_lo = eval(lo, nullptr);
  double scale = 0.5;
  while (!(f_lo > 0.0)) {
    scale *= 0.5;
    lo = scale - 1.0;
    f_lo = eval(lo, nullptr);
    if (scale < 1e-300) throw RootFindError("tsallis: cannot bracket root", lo, hi);
  }
  double f_hi = eval(hi, nullptr);
  if (!(f_hi < 0.0)) {
    throw RootFindError("tsallis: upper bracket invalid", gmax + c * (1.0 + lo),
                        gmax + c * (1.0 + hi));
  }

  double nu = std::clamp(nu0, lo, hi);
  TsallisSolution sol;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    double slope = 0.0;
    const double f = eval(nu, &slope);
    sol.iterations = it;
    sol.residual = std::abs(std::expm1(f));
    if (sol.residual <= cfg.newton_tol) {
      sol.probs.resize(n);
      for (std::size_t i = 0; i < n; ++i) sol.probs[i] = std::exp(logp[i] - f);
      sol.lambda = gmax + c * (1.0 + nu);
      return sol;
    }
    if (!(slope < 0.0)) {
      throw ConsistencyError("tsallis: dual sum is not strictly decreasing");
    }
    if (f > 0.0) {
      if (nu < lo || f > f_lo) {
        throw ConsistencyError("tsallis: dual sum is not monotone in lambda");
      }
      lo = nu;
      f_lo = f;
    } else {
      if (nu > hi || f < f_hi) {
        throw ConsistencyError("tsallis: dual sum is not monotone in lambda");
      }
      hi = nu;
      f_hi = f;
    }
    const double newton = nu - f / slope;
    nu = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
  }
  throw RootFindError("tsallis: no convergence after " +
                          std::to_string(cfg.max_iter) + " iterations",
                      gmax + c * (1.0 + lo), gmax + c * (1.0 + hi));
}

/// p = grad Phi(G) for the Tsallis smoother.
inline SimplexPoint tsallis_distribution(std::span<const double> g,
                                         const TsallisConfig& cfg) {
  return SimplexPoint(solve_tsallis(g, cfg).probs);
}

/// S_alpha(p), the (negative) Tsallis entropy; non-positive on the simplex.
inline double tsallis_entropy(std::span<const double> p, double alpha) {
  double s = 0.0;
  for (double v : p) s += std::pow(v, alpha);
  return (1.0 - s) / (1.0 - alpha);
}

/// Phi(G) = <p*, G> - eta S_alpha(p*) at the dual-solve maximiser.
inline double tsallis_potential(std::span<const double> g,
                                const TsallisConfig& cfg) {
  const TsallisSolution sol = solve_tsallis(g, cfg);
  const double gmax = *std::max_element(g.begin(), g.end());
  double inner = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) inner += sol.probs[i] * (g[i] - gmax);
  return gmax + inner - cfg.eta * tsallis_entropy(sol.probs, cfg.alpha);
}

/// Bregman divergence of the scaled regulariser eta*S_alpha between two
/// simplex points, D(q, p). Non-negative term by term.
inline double tsallis_regularizer_divergence(std::span<const double> q,
                                             std::span<const double> p,
                                             double alpha, double eta) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    s += -std::pow(q[i], alpha) + (1.0 - alpha) * std::pow(p[i], alpha) +
         alpha * std::pow(p[i], alpha - 1.0) * q[i];
  }
  return eta * s / (1.0 - alpha);
}

/// Exponential weights with max-subtraction.
inline SimplexPoint softmax_distribution(std::span<const double> g, double eta) {
  detail::check_gains(g);
  detail::require(eta > 0.0 && std::isfinite(eta), "softmax: eta must be > 0");
  const double gmax = *std::max_element(g.begin(), g.end());
  std::vector<double> p(g.size());
  double z = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    // Entries that underflow are held at the smallest normal double.
    p[i] = std::max(std::exp(eta * (g[i] - gmax)), std::numeric_limits<double>::min());
    z += p[i];
  }
  for (double& v : p) v /= z;
  return SimplexPoint(std::move(p));
}

/// (1/eta) log sum_i exp(eta G_i).
inline double softmax_potential(std::span<const double> g, double eta) {
  detail::check_gains(g);
  std::vector<double> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = eta * g[i];
  return detail::log_sum_exp(s) / eta;
}

/// (1/eta) KL(q || p): Bregman divergence of the entropic regulariser.
inline double softmax_regularizer_divergence(std::span<const double> q,
                                             std::span<const double> p,
                                             double eta) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) s += q[i] * std::log(q[i] / p[i]);
  }
  return s / eta;
}

/// eta (N^{1-alpha} - 1)/(1-alpha) + N^alpha T / (2 eta alpha).
inline double tsallis_regret_bound(double alpha, double eta, std::size_t n,
                                   std::size_t t) {
  detail::require(alpha > 0.0 && alpha < 1.0 && eta > 0.0 && n >= 1,
                  "tsallis_regret_bound: parameters out of range");
  const double dn = static_cast<double>(n);
  const double over = eta * std::expm1((1.0 - alpha) * std::log(dn)) / (1.0 - alpha);
  const double div = std::pow(dn, alpha) * static_cast<double>(t) / (2.0 * eta * alpha);
  return over + div;
}

/// Overestimation part of the bound alone: eta (N^{1-alpha} - 1)/(1-alpha).
inline double tsallis_overestimation(double alpha, double eta, std::size_t n) {
  return eta * std::expm1((1.0 - alpha) * std::log(static_cast<double>(n))) /
         (1.0 - alpha);
}

/// eta = sqrt(T (1-alpha) / (2 alpha)) N^{alpha - 1/2}.
inline double minimax_eta(double alpha, std::size_t n, std::size_t t) {
  detail::require(alpha > 0.0 && alpha < 1.0 && n >= 1,
                  "minimax_eta: parameters out of range");
  return std::sqrt(static_cast<double>(t) * (1.0 - alpha) / (2.0 * alpha)) *
         std::pow(static_cast<double>(n), alpha - 0.5);
}

/// Relaxed bound at the minimax rate: sqrt(2 T N / (alpha (1 - alpha))).
inline double tsallis_minimax_bound(double alpha, std::size_t n, std::size_t t) {
  detail::require(alpha > 0.0 && alpha < 1.0, "tsallis_minimax_bound: alpha out of range");
  return std::sqrt(2.0 * static_cast<double>(t) * static_cast<double>(n) /
                   (alpha * (1.0 - alpha)));
}

/// Bound for exponential weights with learning rate eta:
/// log N / eta + eta N T / 2 (the alpha -> 1 limit with regulariser weight
/// 1/eta).
inline double softmax_regret_bound(double eta, std::size_t n, std::size_t t) {
  detail::require(eta > 0.0 && n >= 1, "softmax_regret_bound: bad parameters");
  const double dn = static_cast<double>(n);
  return std::log(dn) / eta + eta * dn * static_cast<double>(t) / 2.0;
}

}  // namespace gbpa
