#pragma once

// Perturbation distributions for follow-the-perturbed-leader smoothing.
//
// Every model exposes pdf, cdf, survival, quantile and hazard, plus an
// inverse-CDF sampler that consumes exactly one uniform per draw. Models
// can be stacked with two adapters:
//
//   Mirror            density f(|y|)/2, turns a half-line law into a
//                     symmetric full-line one with the same sup-hazard.
//   ConditionAbove(t) law of X - t given X > t; hazard h_Y(y) = h_X(t + y).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "gbpa/error.hpp"
#include "gbpa/rng.hpp"

namespace gbpa {

inline constexpr double kEulerGamma = 0.57721566490153286060651209;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Family {
  kGumbel,           // location mu, scale beta
  kFrechet,          // shape alpha, scale s; support x > 0
  kWeibull,          // shape k, scale 1; support x > 0
  kWeibullModified,  // shape k in (0,1]; CDF 1 - exp(1 - (x+1)^k)
  kPareto,           // shape alpha, minimum x_m; support x >= x_m
  kParetoModified,   // shape alpha > 1; CDF 1 - (1+x)^-alpha
  kGamma,            // shape alpha >= 1, rate beta
  kExponential,      // rate lambda
  kGaussian,         // mean, standard deviation
};

inline std::string family_name(Family f) {
  switch (f) {
    case Family::kGumbel: return "gumbel";
    case Family::kFrechet: return "frechet";
    case Family::kWeibull: return "weibull";
    case Family::kWeibullModified: return "weibull_modified";
    case Family::kPareto: return "pareto";
    case Family::kParetoModified: return "pareto_modified";
    case Family::kGamma: return "gamma";
    case Family::kExponential: return "exponential";
    case Family::kGaussian: return "gaussian";
  }
  return "unknown";
}

inline Family parse_family(const std::string& s) {
  for (Family f : {Family::kGumbel, Family::kFrechet, Family::kWeibull,
                   Family::kWeibullModified, Family::kPareto,
                   Family::kParetoModified, Family::kGamma,
                   Family::kExponential, Family::kGaussian}) {
    if (family_name(f) == s) return f;
  }
  throw InvalidArgument("unknown distribution family '" + s + "'");
}

struct Mirror {
  friend bool operator==(const Mirror&, const Mirror&) = default;
};

struct ConditionAbove {
  double threshold = 1.0;
  friend bool operator==(const ConditionAbove&, const ConditionAbove&) = default;
};

using Adapter = std::variant<Mirror, ConditionAbove>;

/// Result of a sup-hazard query.
struct SupHazard {
  double value = 0.0;
  bool analytic = false;  // closed-form value rather than a numeric scan
  bool attained = false;  // false when the sup is only a limit
  double location = 0.0;  // argmax, or +inf for a limit at the right tail
};

enum class ExpectedMaxMethod { kClosedForm, kBound, kMonteCarlo };

enum class ExpectedMaxKind { kExact, kUpperBound, kApproximate, kMonteCarlo };

inline std::string kind_name(ExpectedMaxKind k) {
  switch (k) {
    case ExpectedMaxKind::kExact: return "exact";
    case ExpectedMaxKind::kUpperBound: return "upper_bound";
    case ExpectedMaxKind::kApproximate: return "approximate";
    case ExpectedMaxKind::kMonteCarlo: return "monte_carlo";
  }
  return "unknown";
}

struct ExpectedMax {
  double value = 0.0;
  double std_error = 0.0;  // nonzero only for Monte Carlo
  ExpectedMaxKind kind = ExpectedMaxKind::kExact;
};

/// Immutable distribution model: a base family plus an ordered adapter stack.
class PerturbationModel {
 public:
  // Factories validate parameter ranges.
  static PerturbationModel gumbel(double location = 0.0, double scale = 1.0) {
    detail::require(scale > 0.0 && std::isfinite(location),
                    "gumbel: scale must be > 0");
    return PerturbationModel(Family::kGumbel, location, scale);
  }
  static PerturbationModel frechet(double alpha, double scale = 1.0) {
    detail::require(alpha > 0.0 && scale > 0.0,
                    "frechet: alpha and scale must be > 0");
    return PerturbationModel(Family::kFrechet, alpha, scale);
  }
  static PerturbationModel weibull(double k) {
    detail::require(k > 0.0, "weibull: k must be > 0");
    return PerturbationModel(Family::kWeibull, k, 1.0);
  }
  static PerturbationModel weibull_modified(double k) {
    detail::require(k > 0.0 && k <= 1.0, "weibull_modified: k must be in (0, 1]");
    return PerturbationModel(Family::kWeibullModified, k, 1.0);
  }
  static PerturbationModel pareto(double alpha, double x_m = 1.0) {
    detail::require(alpha > 0.0 && x_m > 0.0, "pareto: alpha and x_m must be > 0");
    return PerturbationModel(Family::kPareto, alpha, x_m);
  }
  static PerturbationModel pareto_modified(double alpha) {
    detail::require(alpha > 1.0, "pareto_modified: alpha must be > 1");
    return PerturbationModel(Family::kParetoModified, alpha, 1.0);
  }
  static PerturbationModel gamma(double shape, double rate = 1.0) {
    detail::require(shape >= 1.0 && rate > 0.0,
                    "gamma: shape must be >= 1 and rate > 0");
    return PerturbationModel(Family::kGamma, shape, rate);
  }
  static PerturbationModel exponential(double rate = 1.0) {
    detail::require(rate > 0.0, "exponential: rate must be > 0");
    return PerturbationModel(Family::kExponential, rate, 1.0);
  }
  static PerturbationModel gaussian(double mean = 0.0, double sd = 1.0) {
    detail::require(sd > 0.0 && std::isfinite(mean), "gaussian: sd must be > 0");
    return PerturbationModel(Family::kGaussian, mean, sd);
  }

  /// Generic factory used by config parsing; params are in the order
  /// documented on Family. Missing trailing params take their defaults.
  static PerturbationModel make(Family f, std::span<const double> params) {
    auto p = [&](std::size_t i, double def) {
      return i < params.size() ? params[i] : def;
    };
    switch (f) {
      case Family::kGumbel: return gumbel(p(0, 0.0), p(1, 1.0));
      case Family::kFrechet: return frechet(p(0, 2.0), p(1, 1.0));
      case Family::kWeibull: return weibull(p(0, 1.0));
      case Family::kWeibullModified: return weibull_modified(p(0, 1.0));
      case Family::kPareto: return pareto(p(0, 2.0), p(1, 1.0));
      case Family::kParetoModified: return pareto_modified(p(0, 2.0));
      case Family::kGamma: return gamma(p(0, 1.0), p(1, 1.0));
      case Family::kExponential: return exponential(p(0, 1.0));
      case Family::kGaussian: return gaussian(p(0, 0.0), p(1, 1.0));
    }
    throw InvalidArgument("unknown family");
  }

  /// Mirror around zero. The current model must live on the non-negative
  /// half-line.
  PerturbationModel mirrored() const {
    if (support_lower(adapters_.size()) < 0.0) {
      throw InvalidArgument("mirror: base support must be the positive half-line");
    }
    PerturbationModel m = *this;
    m.adapters_.push_back(Mirror{});
    return m;
  }

  /// Law of X - threshold conditioned on X > threshold.
  PerturbationModel conditioned_above(double threshold = 1.0) const {
    const std::size_t l = adapters_.size();
    if (!std::isfinite(threshold) || !(sf_at(l, threshold) > 0.0) ||
        !(cdf_at(l, threshold) < 1.0)) {
      throw InvalidArgument("condition_above: degenerate threshold " +
                            std::to_string(threshold));
    }
    PerturbationModel m = *this;
    m.adapters_.push_back(ConditionAbove{threshold});
    return m;
  }

  Family family() const noexcept { return family_; }
  double param0() const noexcept { return a_; }
  double param1() const noexcept { return b_; }
  const std::vector<Adapter>& adapters() const noexcept { return adapters_; }

  std::string name() const {
    std::string s = family_name(family_) + "(" + fmt(a_);
    if (has_second_param()) s += ", " + fmt(b_);
    s += ")";
    for (const auto& ad : adapters_) {
      if (std::holds_alternative<Mirror>(ad)) {
        s = "mirror(" + s + ")";
      } else {
        s = "condition_above(" + s + ", " +
            fmt(std::get<ConditionAbove>(ad).threshold) + ")";
      }
    }
    return s;
  }

  bool has_second_param() const noexcept {
    switch (family_) {
      case Family::kGumbel:
      case Family::kFrechet:
      case Family::kPareto:
      case Family::kGamma:
      case Family::kGaussian: return true;
      default: return false;
    }
  }

  double pdf(double x) const { return pdf_at(adapters_.size(), x); }
  double cdf(double x) const { return cdf_at(adapters_.size(), x); }
  double sf(double x) const { return sf_at(adapters_.size(), x); }

  /// Inverse CDF, u in (0,1).
  double quantile(double u) const {
    detail::require(u > 0.0 && u < 1.0, "quantile: u must be in (0,1)");
    return quantile_at(adapters_.size(), u);
  }

  /// Inverse survival function, q in (0,1).
  double isf(double q) const {
    detail::require(q > 0.0 && q < 1.0, "isf: q must be in (0,1)");
    return isf_at(adapters_.size(), q);
  }

  double sample(double u) const { return quantile_at(adapters_.size(), u); }
  double sample(Rng& rng) const { return sample(rng.uniform()); }

  /// h(x) = f(x) / (1 - F(x)). Throws where F(x) = 1.
  double hazard(double x) const { return hazard_at(adapters_.size(), x); }

  /// Lower end of the support (-inf for full-line laws).
  double support_lower() const { return support_lower(adapters_.size()); }

  friend bool operator==(const PerturbationModel&,
                         const PerturbationModel&) = default;

 private:
  PerturbationModel(Family f, double a, double b) : family_(f), a_(a), b_(b) {}

  static std::string fmt(double v) {
    std::string s = std::to_string(v);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }

  // --- base family -------------------------------------------------------

  double base_lower() const {
    switch (family_) {
      case Family::kGumbel:
      case Family::kGaussian: return -kInf;
      case Family::kPareto: return b_;
      default: return 0.0;
    }
  }

  double base_pdf(double x) const {
    switch (family_) {
      case Family::kGumbel: {
        const double z = (x - a_) / b_;
        return std::exp(-z - std::exp(-z)) / b_;
      }
      case Family::kFrechet: {
        if (x <= 0.0) return 0.0;
        const double z = x / b_;
        const double w = std::pow(z, -a_);
        return a_ / b_ * std::pow(z, -a_ - 1.0) * std::exp(-w);
      }
      case Family::kWeibull:
        if (x <= 0.0) return 0.0;
        return a_ * std::pow(x, a_ - 1.0) * std::exp(-std::pow(x, a_));
      case Family::kWeibullModified:
        if (x < 0.0) return 0.0;
        return a_ * std::pow(x + 1.0, a_ - 1.0) *
               std::exp(1.0 - std::pow(x + 1.0, a_));
      case Family::kPareto:
        if (x < b_) return 0.0;
        return a_ * std::pow(b_, a_) / std::pow(x, a_ + 1.0);
      case Family::kParetoModified:
        if (x < 0.0) return 0.0;
        return a_ / std::pow(1.0 + x, a_ + 1.0);
      case Family::kGamma:
        if (x < 0.0) return 0.0;
        return b_ * boost::math::gamma_p_derivative(a_, b_ * x);
      case Family::kExponential:
        if (x < 0.0) return 0.0;
        return a_ * std::exp(-a_ * x);
      case Family::kGaussian: {
        const double z = (x - a_) / b_;
        return std::exp(-0.5 * z * z) / (b_ * std::sqrt(2.0 * std::numbers::pi));
      }
    }
    return 0.0;
  }

  double base_cdf(double x) const {
    switch (family_) {
      case Family::kGumbel: return std::exp(-std::exp(-(x - a_) / b_));
      case Family::kFrechet:
        if (x <= 0.0) return 0.0;
        return std::exp(-std::pow(x / b_, -a_));
      case Family::kWeibull:
        if (x <= 0.0) return 0.0;
        return -std::expm1(-std::pow(x, a_));
      case Family::kWeibullModified:
        if (x <= 0.0) return 0.0;
        return -std::expm1(1.0 - std::pow(x + 1.0, a_));
      case Family::kPareto:
        if (x <= b_) return 0.0;
        return -std::expm1(a_ * std::log(b_ / x));
      case Family::kParetoModified:
        if (x <= 0.0) return 0.0;
        return -std::expm1(-a_ * std::log1p(x));
      case Family::kGamma:
        if (x <= 0.0) return 0.0;
        return boost::math::gamma_p(a_, b_ * x);
      case Family::kExponential:
        if (x <= 0.0) return 0.0;
        return -std::expm1(-a_ * x);
      case Family::kGaussian:
        return 0.5 * std::erfc(-(x - a_) / (b_ * std::numbers::sqrt2));
    }
    return 0.0;
  }

  double base_sf(double x) const {
    switch (family_) {
      case Family::kGumbel: return -std::expm1(-std::exp(-(x - a_) / b_));
      case Family::kFrechet:
        if (x <= 0.0) return 1.0;
        return -std::expm1(-std::pow(x / b_, -a_));
      case Family::kWeibull:
        if (x <= 0.0) return 1.0;
        return std::exp(-std::pow(x, a_));
      case Family::kWeibullModified:
        if (x <= 0.0) return 1.0;
        return std::exp(1.0 - std::pow(x + 1.0, a_));
      case Family::kPareto:
        if (x <= b_) return 1.0;
        return std::pow(b_ / x, a_);
      case Family::kParetoModified:
        if (x <= 0.0) return 1.0;
        return std::exp(-a_ * std::log1p(x));
      case Family::kGamma:
        if (x <= 0.0) return 1.0;
        return boost::math::gamma_q(a_, b_ * x);
      case Family::kExponential:
        if (x <= 0.0) return 1.0;
        return std::exp(-a_ * x);
      case Family::kGaussian:
        return 0.5 * std::erfc((x - a_) / (b_ * std::numbers::sqrt2));
    }
    return 0.0;
  }

  double base_hazard(double x) const {
    switch (family_) {
      case Family::kGumbel: {
        // f/(1-F) = (w / expm1(w)) / beta with w = exp(-z).
        const double w = std::exp(-(x - a_) / b_);
        if (w == 0.0) return 1.0 / b_;
        return w / std::expm1(w) / b_;
      }
      case Family::kFrechet: {
        if (x <= 0.0) return 0.0;
        const double z = x / b_;
        const double w = std::pow(z, -a_);
        return a_ / b_ * std::pow(z, -a_ - 1.0) / std::expm1(w);
      }
      case Family::kWeibull:
        if (x <= 0.0) return x == 0.0 && a_ == 1.0 ? 1.0 : 0.0;
        return a_ * std::pow(x, a_ - 1.0);
      case Family::kWeibullModified:
        if (x < 0.0) return 0.0;
        return a_ * std::pow(x + 1.0, a_ - 1.0);
      case Family::kPareto:
        if (x < b_) return 0.0;
        return a_ / x;
      case Family::kParetoModified:
        if (x < 0.0) return 0.0;
        return a_ / (1.0 + x);
      case Family::kGamma: {
        if (x < 0.0) return 0.0;
        // Long double keeps the survival function representable far into
        // the right tail, where the hazard approaches the rate.
        const long double a = a_;
        const long double bx = static_cast<long double>(b_) * x;
        if (bx == 0.0L) return a_ == 1.0 ? b_ : 0.0;
        const long double log_pdf =
            (a - 1.0L) * std::log(bx) - bx - std::lgamma(a);
        const long double q = boost::math::gamma_q(a, bx);
        if (q <= 0.0L) throw InvalidArgument("hazard: survival function is 0");
        return static_cast<double>(static_cast<long double>(b_) *
                                   std::exp(log_pdf) / q);
      }
      case Family::kExponential:
        if (x < 0.0) return 0.0;
        return a_;
      case Family::kGaussian: {
        const long double z = (static_cast<long double>(x) - a_) / b_;
        const long double pdf = std::exp(-0.5L * z * z) /
                                std::sqrt(2.0L * std::numbers::pi_v<long double>);
        const long double sf =
            0.5L * std::erfc(z / std::numbers::sqrt2_v<long double>);
        if (sf <= 0.0L) throw InvalidArgument("hazard: survival function is 0");
        return static_cast<double>(pdf / sf / b_);
      }
    }
    return 0.0;
  }

  double base_quantile(double u) const {
    switch (family_) {
      case Family::kGumbel: return a_ - b_ * std::log(-std::log(u));
      case Family::kFrechet: return b_ * std::pow(-std::log(u), -1.0 / a_);
      case Family::kWeibull: return std::pow(-std::log1p(-u), 1.0 / a_);
      case Family::kWeibullModified:
        return std::pow(1.0 - std::log1p(-u), 1.0 / a_) - 1.0;
      case Family::kPareto: return b_ * std::exp(-std::log1p(-u) / a_);
      case Family::kParetoModified: return std::expm1(-std::log1p(-u) / a_);
      case Family::kGamma: return gamma_invert(u, /*upper=*/false);
      case Family::kExponential: return -std::log1p(-u) / a_;
      case Family::kGaussian:
        return a_ - b_ * std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
    }
    return 0.0;
  }

  double base_isf(double q) const {
    switch (family_) {
      case Family::kGumbel: return a_ - b_ * std::log(-std::log1p(-q));
      case Family::kFrechet: return b_ * std::pow(-std::log1p(-q), -1.0 / a_);
      case Family::kWeibull: return std::pow(-std::log(q), 1.0 / a_);
      case Family::kWeibullModified:
        return std::pow(1.0 - std::log(q), 1.0 / a_) - 1.0;
      case Family::kPareto: return b_ * std::pow(q, -1.0 / a_);
      case Family::kParetoModified: return std::expm1(-std::log(q) / a_);
      case Family::kGamma: return gamma_invert(q, /*upper=*/true);
      case Family::kExponential: return -std::log(q) / a_;
      case Family::kGaussian:
        return a_ + b_ * std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
    }
    return 0.0;
  }

  // Bisection on the regularized incomplete gamma function. `upper` selects
  // Q (survival) instead of P. One uniform in, one variate out.
  double gamma_invert(double target, bool upper) const {
    auto f = [&](double x) {
      return upper ? boost::math::gamma_q(a_, b_ * x) - target
                   : boost::math::gamma_p(a_, b_ * x) - target;
    };
    const double sign = upper ? -1.0 : 1.0;  // f is increasing iff !upper
    double lo = 0.0;
    double hi = std::max(1.0, 2.0 * a_) / b_;
    while (sign * f(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (sign * f(mid) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (hi - lo <= 1e-12 * std::max(1e-300, hi)) break;
    }
    return 0.5 * (lo + hi);
  }

  // --- adapter stack -----------------------------------------------------
  // Level l evaluates the model with the first l adapters applied.

  double support_lower(std::size_t level) const {
    if (level == 0) return base_lower();
    const Adapter& ad = adapters_[level - 1];
    if (std::holds_alternative<Mirror>(ad)) return -kInf;
    return 0.0;
  }

  double pdf_at(std::size_t level, double x) const {
    if (level == 0) return base_pdf(x);
    const Adapter& ad = adapters_[level - 1];
    if (std::holds_alternative<Mirror>(ad)) {
      return 0.5 * pdf_at(level - 1, std::abs(x));
    }
    const double t = std::get<ConditionAbove>(ad).threshold;
    if (x < 0.0) return 0.0;
    return pdf_at(level - 1, t + x) / sf_at(level - 1, t);
  }

  double cdf_at(std::size_t level, double x) const {
    if (level == 0) return base_cdf(x);
    const Adapter& ad = adapters_[level - 1];
    if (std::holds_alternative<Mirror>(ad)) {
      return x >= 0.0 ? 0.5 * (1.0 + cdf_at(level - 1, x))
                      : 0.5 * sf_at(level - 1, -x);
    }
    const double t = std::get<ConditionAbove>(ad).threshold;
    if (x <= 0.0) return 0.0;
    const double ft = cdf_at(level - 1, t);
    const double st = sf_at(level - 1, t);
    if (ft < 0.5) return (cdf_at(level - 1, t + x) - ft) / st;
    return 1.0 - sf_at(level - 1, t + x) / st;
  }

  double sf_at(std::size_t level, double x) const {
    if (level == 0) return base_sf(x);
    const Adapter& ad = adapters_[level - 1];
    if (std::holds_alternative<Mirror>(ad)) {
      return x >= 0.0 ? 0.5 * sf_at(level - 1, x)
                      : 0.5 * (1.0 + cdf_at(level - 1, -x));
    }
    const double t = std::get<ConditionAbove>(ad).threshold;
    if (x <= 0.0) return 1.0;
    return sf_at(level - 1, t + x) / sf_at(level - 1, t);
  }

  double hazard_at(std::size_t level, double x) const {
    if (level == 0) {
      if (!(base_sf(x) > 0.0) && family_ != Family::kGamma &&
          family_ != Family::kGaussian && family_ != Family::kGumbel) {
        throw InvalidArgument("hazard: evaluated where CDF = 1");
      }
      return base_hazard(x);
    }
    const Adapter& ad = adapters_[level - 1];
    if (std::holds_alternative<Mirror>(ad)) {
      if (x >= 0.0) return hazard_at(level - 1, x);
      // f(-x) / (1 + F(-x)), both halves taken at |x|.
      return pdf_at(level - 1, -x) / (1.0 + cdf_at(level - 1, -x));
    }
    const double t = std::get<ConditionAbove>(ad).threshold;
    if (x < 0.0) return 0.0;
    return hazard_at(level - 1, t + x);
  }

  double quantile_at(std::size_t level, double u) const {
    if (level == 0) return base_quantile(u);
    const Adapter& ad = adapters_[level - 1];
    if (std::holds_alternative<Mirror>(ad)) {
      if (u == 0.5) return 0.0;
      if (u > 0.5) return quantile_at(level - 1, 2.0 * u - 1.0);
      return -isf_at(level - 1, 2.0 * u);
    }
    const double t = std::get<ConditionAbove>(ad).threshold;
    const double st = sf_at(level - 1, t);
    if (u < 0.5) {
      return quantile_at(level - 1, cdf_at(level - 1, t) + u * st) - t;
    }
    return isf_at(level - 1, (1.0 - u) * st) - t;
  }

  double isf_at(std::size_t level, double q) const {
    if (level == 0) return base_isf(q);
    const Adapter& ad = adapters_[level - 1];
    if (std::holds_alternative<Mirror>(ad)) {
      if (q == 0.5) return 0.0;
      if (q < 0.5) return isf_at(level - 1, 2.0 * q);
      return -isf_at(level - 1, 2.0 * (1.0 - q));
    }
    const double t = std::get<ConditionAbove>(ad).threshold;
    return isf_at(level - 1, q * sf_at(level - 1, t)) - t;
  }

  Family family_;
  double a_;
  double b_;
  std::vector<Adapter> adapters_;

  friend SupHazard sup_hazard(const PerturbationModel& m);
  friend PerturbationModel strip_last_adapter(const PerturbationModel& m);
};

/// The model with its outermost adapter removed.
inline PerturbationModel strip_last_adapter(const PerturbationModel& m) {
  PerturbationModel inner = m;
  if (!inner.adapters_.empty()) inner.adapters_.pop_back();
  return inner;
}

/// Numeric supremum of the hazard over [lo, hi]: scan `points` grid nodes
/// (log-spaced when lo > 0) and refine the best node by golden-section
/// search on its neighbouring cell. Nodes where the survival function has
/// underflowed are skipped.
inline SupHazard numeric_sup_hazard(const PerturbationModel& m, double lo,
                                    double hi, std::size_t points = 2000) {
  detail::require(hi > lo && points >= 3, "numeric_sup_hazard: bad range");
  const bool log_grid = lo > 0.0;
  auto node = [&](std::size_t k) {
    const double s = static_cast<double>(k) / static_cast<double>(points - 1);
    return log_grid ? lo * std::pow(hi / lo, s) : lo + (hi - lo) * s;
  };
  auto safe_h = [&](double x) {
    if (!(m.sf(x) > 0.0) && m.family() != Family::kGamma &&
        m.family() != Family::kGumbel && m.family() != Family::kGaussian) {
      return -kInf;
    }
    try {
      const double h = m.hazard(x);
      return std::isfinite(h) ? h : -kInf;
    } catch (const InvalidArgument&) {
      return -kInf;
    }
  };
  std::size_t best = 0;
  double best_h = -kInf;
  for (std::size_t k = 0; k < points; ++k) {
    const double h = safe_h(node(k));
    if (h > best_h) {
      best_h = h;
      best = k;
    }
  }
  double a = node(best == 0 ? 0 : best - 1);
  double b = node(std::min(points - 1, best + 1));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double hc = safe_h(c);
  double hd = safe_h(d);
  for (int it = 0; it < 100 && (b - a) > 1e-13 * std::max(1.0, std::abs(b));
       ++it) {
    if (hc > hd) {
      b = d;
      d = c;
      hd = hc;
      c = b - inv_phi * (b - a);
      hc = safe_h(c);
    } else {
      a = c;
      c = d;
      hc = hd;
      d = a + inv_phi * (b - a);
      hd = safe_h(d);
    }
  }
  SupHazard out;
  out.value = best_h;
  out.location = node(best);
  for (double x : {c, d}) {
    const double h = safe_h(x);
    if (h > out.value) {
      out.value = h;
      out.location = x;
    }
  }
  out.analytic = false;
  out.attained = true;
  return out;
}

/// Default scan window used when the sup has to be located numerically.
inline std::pair<double, double> hazard_scan_range(const PerturbationModel& m) {
  if (m.family() == Family::kFrechet && m.adapters().empty()) {
    return {1e-4 * m.param1(), 50.0 * m.param1()};
  }
  if (!m.adapters().empty() &&
      std::holds_alternative<Mirror>(m.adapters().back())) {
    return {-20.0, 20.0};
  }
  const double lower = m.support_lower();
  const double lo = std::isfinite(lower) ? lower : m.quantile(1e-12);
  double hi = 0.0;
  if (m.family() == Family::kGamma && m.adapters().empty()) {
    hi = 5000.0 / m.param1();
  } else {
    hi = m.isf(1e-280);
  }
  return {lo, hi};
}

/// sup_x h(x): analytic where known, numeric scan otherwise.
inline SupHazard sup_hazard(const PerturbationModel& m) {
  if (!m.adapters_.empty()) {
    const Adapter& ad = m.adapters_.back();
    const PerturbationModel inner = strip_last_adapter(m);
    if (std::holds_alternative<Mirror>(ad)) {
      // Mirroring keeps the supremum of the positive half.
      return sup_hazard(inner);
    }
    const double t = std::get<ConditionAbove>(ad).threshold;
    if (inner.adapters_.empty()) {
      const double a = inner.a_;
      switch (inner.family_) {
        case Family::kPareto:
        case Family::kParetoModified:
        case Family::kWeibullModified:
          return {inner.hazard(std::max(t, inner.support_lower())), true, true, 0.0};
        case Family::kWeibull:
          if (a < 1.0) return {inner.hazard(t), true, true, 0.0};
          return sup_hazard(inner);
        case Family::kExponential:
        case Family::kGamma:
        case Family::kGumbel:
        case Family::kGaussian:
          return sup_hazard(inner);
        case Family::kFrechet: break;
      }
    }
    auto [lo, hi] = hazard_scan_range(m);
    return numeric_sup_hazard(m, std::max(lo, 1e-12), hi);
  }
  const double a = m.a_;
  const double b = m.b_;
  switch (m.family_) {
    case Family::kGumbel: return {1.0 / b, true, false, kInf};
    case Family::kFrechet: {
      auto [lo, hi] = hazard_scan_range(m);
      SupHazard s = numeric_sup_hazard(m, lo, hi);
      if (a > 1.0 && s.value > 2.0 * a / b * (1.0 + 1e-12)) {
        throw ConsistencyError("frechet sup-hazard exceeds the 2*alpha cap");
      }
      return s;
    }
    case Family::kWeibull:
      if (a == 1.0) return {1.0, true, true, 0.0};
      return {kInf, true, false, a < 1.0 ? 0.0 : kInf};
    case Family::kWeibullModified: return {a, true, true, 0.0};
    case Family::kPareto: return {a / b, true, true, b};
    case Family::kParetoModified: return {a, true, true, 0.0};
    case Family::kGamma:
      if (a == 1.0) return {b, true, true, 0.0};
      return {b, true, false, kInf};
    case Family::kExponential: return {a, true, true, 0.0};
    case Family::kGaussian: return {kInf, true, false, kInf};
  }
  return {};
}

/// Monte Carlo E[max of n iid draws] with its standard error.
inline ExpectedMax expected_max_mc(const PerturbationModel& m, std::size_t n,
                                   std::size_t samples, std::uint64_t seed) {
  detail::require(n >= 1 && samples >= 2, "expected_max_mc: need n>=1, samples>=2");
  Rng rng(seed);
  const double inv_n = 1.0 / static_cast<double>(n);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    // The max of n iid draws has CDF F^n: one inversion per sample.
    const double mx = m.isf(-std::expm1(std::log(rng.uniform()) * inv_n));
    const double delta = mx - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (mx - mean);
  }
  const double var = m2 / static_cast<double>(samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(samples)),
          ExpectedMaxKind::kMonteCarlo};
}

/// E[max_{i<=n} Z_i]. Closed forms: Gumbel, Frechet, Exponential (harmonic
/// number); Gamma returns the extreme-value asymptotic flagged approximate.
/// Bounds: WeibullModified with k = 1/m, ParetoModified, and any mirrored
/// model (bounded by its unmirrored law).
inline ExpectedMax expected_max(const PerturbationModel& m, std::size_t n,
                                ExpectedMaxMethod method,
                                std::size_t mc_samples = 100000,
                                std::uint64_t seed = 0) {
  detail::require(n >= 1, "expected_max: n must be >= 1");
  if (method == ExpectedMaxMethod::kMonteCarlo) {
    return expected_max_mc(m, n, mc_samples, seed);
  }
  const double dn = static_cast<double>(n);
  const double log_n = std::log(dn);
  if (!m.adapters().empty()) {
    if (method == ExpectedMaxMethod::kBound &&
        std::holds_alternative<Mirror>(m.adapters().back())) {
      ExpectedMax inner = expected_max(strip_last_adapter(m), n,
                                       ExpectedMaxMethod::kBound, mc_samples, seed);
      if (inner.kind == ExpectedMaxKind::kExact) {
        inner.kind = ExpectedMaxKind::kUpperBound;
      }
      return inner;
    }
    throw InvalidArgument("expected_max: no closed form or bound for " + m.name() +
                          "; use monte_carlo");
  }
  const double a = m.param0();
  const double b = m.param1();
  switch (m.family()) {
    case Family::kGumbel:
      return {a + b * (log_n + kEulerGamma), 0.0, ExpectedMaxKind::kExact};
    case Family::kFrechet:
      if (a <= 1.0) return {kInf, 0.0, ExpectedMaxKind::kExact};
      return {b * std::pow(dn, 1.0 / a) * std::tgamma(1.0 - 1.0 / a), 0.0,
              ExpectedMaxKind::kExact};
    case Family::kExponential: {
      double h = 0.0;
      for (std::size_t k = 1; k <= n; ++k) h += 1.0 / static_cast<double>(k);
      return {h / a, 0.0, ExpectedMaxKind::kExact};
    }
    case Family::kGamma: {
      if (n == 1) return {a / b, 0.0, ExpectedMaxKind::kExact};
      const double loglog = n >= 3 ? std::log(log_n) : 0.0;
      const double v =
          (log_n + (a - 1.0) * loglog - std::lgamma(a) + kEulerGamma) / b;
      return {v, 0.0, ExpectedMaxKind::kApproximate};
    }
    case Family::kWeibullModified:
    case Family::kParetoModified: {
      if (method == ExpectedMaxMethod::kClosedForm) {
        throw InvalidArgument("expected_max: only a bound exists for " + m.name());
      }
      if (m.family() == Family::kParetoModified) {
        return {a * std::pow(dn, 1.0 / a) / (a - 1.0), 0.0,
                ExpectedMaxKind::kUpperBound};
      }
      const double mm = std::round(1.0 / a);
      if (std::abs(mm * a - 1.0) > 1e-12) {
        throw InvalidArgument("expected_max: weibull_modified bound needs k = 1/m");
      }
      return {10.0 * std::tgamma(mm + 1.0) * std::pow(log_n, mm), 0.0,
              ExpectedMaxKind::kUpperBound};
    }
    case Family::kWeibull:
    case Family::kPareto:
    case Family::kGaussian: break;
  }
  throw InvalidArgument("expected_max: no closed form or bound for " + m.name() +
                        "; use monte_carlo");
}

}  // namespace gbpa
