#pragma once

// Small statistical helpers shared by the verification battery and tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "gbpa/error.hpp"

namespace gbpa::stats {

struct ChiSquare {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Pearson goodness of fit. Bins with expected count below `min_expected`
/// are pooled into their right neighbour (the last bin absorbs the rest).
inline ChiSquare chi_square_test(std::span<const double> observed,
                                 std::span<const double> expected,
                                 double min_expected = 5.0) {
  detail::require(observed.size() == expected.size() && !observed.empty(),
                  "chi_square_test: size mismatch");
  std::vector<double> o;
  std::vector<double> e;
  double acc_o = 0.0;
  double acc_e = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    acc_o += observed[k];
    acc_e += expected[k];
    if (acc_e >= min_expected) {
      o.push_back(acc_o);
      e.push_back(acc_e);
      acc_o = acc_e = 0.0;
    }
  }
  if (acc_e > 0.0 || acc_o > 0.0) {
    if (e.empty()) {
      o.push_back(acc_o);
      e.push_back(acc_e);
    } else {
      o.back() += acc_o;
      e.back() += acc_e;
    }
  }
  ChiSquare r;
  for (std::size_t k = 0; k < o.size(); ++k) {
    r.statistic += (o[k] - e[k]) * (o[k] - e[k]) / e[k];
  }
  r.dof = static_cast<double>(o.size()) - 1.0;
  if (r.dof < 1.0) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

struct KolmogorovSmirnov {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS test against a continuous CDF. The p-value uses the
/// asymptotic Kolmogorov series with Stephens' finite-n correction.
inline KolmogorovSmirnov ks_test(std::vector<double> sample,
                                 const std::function<double(double)>& cdf) {
  detail::require(!sample.empty(), "ks_test: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double f = cdf(sample[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  const double sn = std::sqrt(n);
  const double x = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

/// Least-squares slope of y on x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "ols_slope: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace gbpa::stats
