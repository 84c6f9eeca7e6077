#pragma once

// Stochastic smoothing: Phi(G) = E max_i (G_i + eta Z_i), Z_i iid from a
// PerturbationModel. Sampling is a single perturbed argmax; the inverse
// probability needed for the loss estimate is replaced by Geometric
// Resampling, which counts fresh redraws until the perturbed argmax hits the
// played arm again (capped at M).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "gbpa/distributions.hpp"
#include "gbpa/error.hpp"
#include "gbpa/rng.hpp"
#include "gbpa/types.hpp"

namespace gbpa {

struct PerturbationConfig {
  PerturbationModel model = PerturbationModel::exponential(1.0);
  double eta = 1.0;               // noise scale
  std::size_t gr_cap = 1;         // M, maximum number of resampling draws
  std::size_t mc_samples = 100000;  // gradient / potential evaluation only

  void validate() const {
    detail::require(eta > 0.0 && std::isfinite(eta), "perturbation: eta must be > 0");
    detail::require(gr_cap >= 1, "perturbation: gr_cap must be >= 1");
  }
};

/// M = ceil(sqrt(N T)), the resampling cap that keeps the bias term at the
/// same order as the rest of the bound.
inline std::size_t default_gr_cap(std::size_t n, std::size_t t) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n) *
                                                      static_cast<double>(t)))));
}

/// Extra regret from truncating resampling at M draws: N T / (e M).
inline double gr_bias_bound(std::size_t n, std::size_t t, std::size_t m) {
  return static_cast<double>(n) * static_cast<double>(t) /
         (std::numbers::e * static_cast<double>(m));
}

/// argmax_i (G_i + eta * quantile(u_i)) for the given uniforms; ties go to
/// the lowest index.
inline std::size_t perturbed_argmax(std::span<const double> g,
                                    const PerturbationModel& model, double eta,
                                    std::span<const double> uniforms) {
  std::size_t best = 0;
  double best_v = -kInf;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double z = model.sample(uniforms[i]);
    if (!std::isfinite(z)) throw Error("ftpl: non-finite noise draw");
    const double v = g[i] + eta * z;
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

/// One FTPL draw using the generator's next N uniforms.
inline std::size_t ftpl_sample(std::span<const double> g,
                               const PerturbationConfig& cfg, Rng& rng) {
  std::size_t best = 0;
  double best_v = -kInf;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double z = cfg.model.sample(rng.uniform());
    if (!std::isfinite(z)) throw Error("ftpl: non-finite noise draw");
    const double v = g[i] + cfg.eta * z;
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

inline std::size_t ftpl_sample(std::span<const double> g,
                               const PerturbationConfig& cfg,
                               std::uint64_t seed) {
  Rng rng(seed, Stream::kSampling);
  return ftpl_sample(g, cfg, rng);
}

/// Empirical argmax frequencies over `samples` perturbed draws.
struct GradientEstimate {
  SimplexPoint probs;  // floored at 1/(10*samples) and renormalised
  std::vector<std::size_t> counts;
  std::vector<double> raw;  // counts / samples; sums to one exactly
  std::vector<double> std_errors;
  std::size_t samples = 0;
};

inline GradientEstimate ftpl_gradient_mc(std::span<const double> g,
                                         const PerturbationConfig& cfg,
                                         std::size_t samples,
                                         std::uint64_t seed) {
  cfg.validate();
  detail::require(samples >= 1, "ftpl_gradient_mc: samples must be >= 1");
  Rng rng(seed, Stream::kProbe);
  const std::size_t n = g.size();
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t s = 0; s < samples; ++s) ++counts[ftpl_sample(g, cfg, rng)];

  const double ds = static_cast<double>(samples);
  std::vector<double> raw(n);
  std::vector<double> se(n);
  std::vector<double> floored(n);
  const double floor = 1.0 / (10.0 * ds);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = static_cast<double>(counts[i]) / ds;
    se[i] = std::sqrt(raw[i] * (1.0 - raw[i]) / ds);
    floored[i] = std::max(raw[i], floor);
    total += floored[i];
  }
  for (double& v : floored) v /= total;
  return GradientEstimate{SimplexPoint(std::move(floored)), std::move(counts),
                          std::move(raw), std::move(se), samples};
}

struct ResampleResult {
  std::size_t draws = 0;  // K in 1..M
  std::vector<double> estimate;
};

/// Number of fresh perturbed draws until the argmax equals `arm`, capped at
/// `cap`. The stream must be independent of the one that chose `arm`.
inline std::size_t geometric_resample_count(std::span<const double> g,
                                            const PerturbationConfig& cfg,
                                            std::size_t arm, Rng& resample) {
  for (std::size_t k = 1; k < cfg.gr_cap; ++k) {
    if (ftpl_sample(g, cfg, resample) == arm) return k;
  }
  return cfg.gr_cap;
}

/// K * incurred_loss * e_arm. Conditional mean g_i (1 - (1-p_i)^M).
inline ResampleResult geometric_resampling_estimate(std::span<const double> g,
                                                    const PerturbationConfig& cfg,
                                                    std::size_t arm,
                                                    double incurred_loss,
                                                    Rng& resample) {
  cfg.validate();
  detail::require(arm < g.size(), "geometric_resampling: arm out of range");
  ResampleResult r;
  r.draws = geometric_resample_count(g, cfg, arm, resample);
  r.estimate.assign(g.size(), 0.0);
  r.estimate[arm] = static_cast<double>(r.draws) * incurred_loss;
  return r;
}

inline ResampleResult geometric_resampling_estimate(std::span<const double> g,
                                                    const PerturbationConfig& cfg,
                                                    std::size_t arm,
                                                    double incurred_loss,
                                                    std::uint64_t seed) {
  Rng rng(seed, Stream::kResampling);
  return geometric_resampling_estimate(g, cfg, arm, incurred_loss, rng);
}

/// E[min(Geometric(p), M)] = (1 - (1-p)^M) / p.
inline double truncated_geometric_mean(double p, std::size_t m) {
  detail::require(p > 0.0 && p <= 1.0 && m >= 1, "truncated_geometric_mean: bad args");
  if (p == 1.0) return 1.0;
  return -std::expm1(static_cast<double>(m) * std::log1p(-p)) / p;
}

/// A fixed S x N bank of base noise draws shared by every evaluation
/// (common random numbers), so differences of Monte Carlo estimates at
/// nearby G have low variance.
class NoiseBank {
 public:
  NoiseBank(const PerturbationModel& model, double eta, std::size_t arms,
            std::size_t samples, std::uint64_t seed)
      : model_(model), eta_(eta), arms_(arms), samples_(samples),
        z_(arms * samples) {
    detail::require(samples >= 2 && arms >= 1, "NoiseBank: need samples >= 2");
    Rng rng(seed, Stream::kLedger);
    for (double& z : z_) z = model.sample(rng);
  }

  std::size_t samples() const noexcept { return samples_; }
  std::size_t arms() const noexcept { return arms_; }

  /// Scaled noise eta * Z for sample s, arm i.
  double noise(std::size_t s, std::size_t i) const {
    return eta_ * z_[s * arms_ + i];
  }

  /// Monte Carlo E max_i (G_i + eta Z_i) with standard error.
  std::pair<double, double> potential(std::span<const double> g) const {
    check(g);
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t s = 0; s < samples_; ++s) {
      double mx = -kInf;
      for (std::size_t i = 0; i < arms_; ++i) mx = std::max(mx, g[i] + noise(s, i));
      const double delta = mx - mean;
      mean += delta / static_cast<double>(s + 1);
      m2 += delta * (mx - mean);
    }
    return {mean, std::sqrt(m2 / static_cast<double>(samples_ - 1) /
                            static_cast<double>(samples_))};
  }

  /// Argmax frequencies: the exact gradient of the sample-mean potential,
  /// so Bregman divergences built from it are non-negative.
  std::vector<double> argmax_frequencies(std::span<const double> g) const {
    check(g);
    std::vector<double> f(arms_, 0.0);
    for (std::size_t s = 0; s < samples_; ++s) {
      std::size_t best = 0;
      double best_v = -kInf;
      for (std::size_t i = 0; i < arms_; ++i) {
        const double v = g[i] + noise(s, i);
        if (v > best_v) {
          best_v = v;
          best = i;
        }
      }
      f[best] += 1.0;
    }
    for (double& v : f) v /= static_cast<double>(samples_);
    return f;
  }

  /// Competing maximum max_{j != i} (G_j + eta Z_j) for sample s.
  double competitor(std::span<const double> g, std::size_t s, std::size_t i) const {
    double mx = -kInf;
    for (std::size_t j = 0; j < arms_; ++j) {
      if (j != i) mx = std::max(mx, g[j] + noise(s, j));
    }
    return mx;
  }

  /// Conditional (Rao-Blackwellised) gradient:
  /// d Phi / d G_i = E[1 - F((L_{-i} - G_i)/eta)], smooth in G under CRN.
  /// Returns per-coordinate means and standard errors.
  std::pair<std::vector<double>, std::vector<double>> conditional_gradient(
      std::span<const double> g) const {
    check(g);
    std::vector<double> mean(arms_, 0.0);
    std::vector<double> sq(arms_, 0.0);
    for (std::size_t s = 0; s < samples_; ++s) {
      for (std::size_t i = 0; i < arms_; ++i) {
        const double v = model_.sf((competitor(g, s, i) - g[i]) / eta_);
        mean[i] += v;
        sq[i] += v * v;
      }
    }
    std::vector<double> se(arms_);
    const double ds = static_cast<double>(samples_);
    for (std::size_t i = 0; i < arms_; ++i) {
      mean[i] /= ds;
      const double var = std::max(0.0, sq[i] / ds - mean[i] * mean[i]) * ds / (ds - 1.0);
      se[i] = std::sqrt(var / ds);
    }
    return {mean, se};
  }

  /// Central difference of the conditional gradient in coordinate i, with
  /// the per-sample standard error of that difference.
  std::pair<double, double> hessian_diagonal(std::span<const double> g,
                                             std::size_t i, double step) const {
    check(g);
    double mean = 0.0;
    double sq = 0.0;
    for (std::size_t s = 0; s < samples_; ++s) {
      const double l = competitor(g, s, i);
      const double up = model_.sf((l - g[i] - step) / eta_);
      const double dn = model_.sf((l - g[i] + step) / eta_);
      const double v = (up - dn) / (2.0 * step);
      mean += v;
      sq += v * v;
    }
    const double ds = static_cast<double>(samples_);
    mean /= ds;
    const double var = std::max(0.0, sq / ds - mean * mean) * ds / (ds - 1.0);
    return {mean, std::sqrt(var / ds)};
  }

 private:
  void check(std::span<const double> g) const {
    detail::require(g.size() == arms_, "NoiseBank: arm count mismatch");
  }

  PerturbationModel model_;
  double eta_;
  std::size_t arms_;
  std::size_t samples_;
  std::vector<double> z_;
};

/// Regret bound of FTPL with noise eta * Z:
///   eta * E[max_i Z_i] + N * sup h * T / eta.
struct HazardBound {
  double value = 0.0;
  double eta = 0.0;
  double expected_max = 0.0;
  ExpectedMaxKind expected_max_kind = ExpectedMaxKind::kExact;
  double sup_hazard = 0.0;
  bool unbounded = false;
};

/// E[max] used by the bound: closed form when it exists, otherwise the
/// analytic upper bound, otherwise Monte Carlo.
inline ExpectedMax expected_max_for_bound(const PerturbationModel& model,
                                          std::size_t n) {
  try {
    return expected_max(model, n, ExpectedMaxMethod::kClosedForm);
  } catch (const InvalidArgument&) {
  }
  try {
    return expected_max(model, n, ExpectedMaxMethod::kBound);
  } catch (const InvalidArgument&) {
  }
  return expected_max(model, n, ExpectedMaxMethod::kMonteCarlo, 100000, 0x7ab1e1);
}

/// E[max_i eta Z_i] = eta E[max_i Z_i].
inline double scaled_expected_max(double expected_max_z, double eta) {
  return eta * expected_max_z;
}

/// sup h_{eta Z} = sup h_Z / eta.
inline double scaled_sup_hazard(double sup_h_z, double eta) {
  return sup_h_z / eta;
}

inline HazardBound hazard_regret_bound(const PerturbationModel& model, double eta,
                                       std::size_t n, std::size_t t) {
  detail::require(eta >= 0.0 && n >= 1, "hazard_regret_bound: bad parameters");
  HazardBound b;
  const ExpectedMax em = expected_max_for_bound(model, n);
  b.expected_max = em.value;
  b.expected_max_kind = em.kind;
  b.sup_hazard = sup_hazard(model).value;
  b.eta = eta;
  if (!std::isfinite(b.expected_max) || !std::isfinite(b.sup_hazard)) {
    b.unbounded = true;
    b.value = kInf;
    return b;
  }
  const double dn = static_cast<double>(n);
  const double dt = static_cast<double>(t);
  if (t == 0) {
    b.value = eta * b.expected_max;
    return b;
  }
  if (eta == 0.0) {
    b.value = kInf;
    return b;
  }
  b.value = eta * b.expected_max + dn * b.sup_hazard * dt / eta;
  return b;
}

/// eta* = sqrt(N sup h T / E[max]); zero when T = 0.
inline double tune_eta(const PerturbationModel& model, std::size_t n,
                       std::size_t t) {
  const double em = expected_max_for_bound(model, n).value;
  const double sh = sup_hazard(model).value;
  if (!std::isfinite(em) || !std::isfinite(sh) || em <= 0.0) {
    throw InvalidArgument("tune_eta: bound is unbounded for " + model.name());
  }
  return std::sqrt(static_cast<double>(n) * sh * static_cast<double>(t) / em);
}

}  // namespace gbpa
