#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gbpa/error.hpp"

namespace gbpa {

/// Per-round loss vector g_t. Entries lie in [-1, 0]; at least two arms.
class LossVector {
 public:
  explicit LossVector(std::vector<double> values) : values_(std::move(values)) {
    detail::require(values_.size() >= 2, "LossVector: need at least 2 arms");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double g = values_[i];
      if (!(g >= -1.0 && g <= 0.0)) {
        throw InvalidArgument("LossVector: entry " + std::to_string(i) + " = " +
                              std::to_string(g) + " outside [-1, 0]");
      }
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// Sampling distribution over arms. Strictly positive, sums to one.
class SimplexPoint {
 public:
  static constexpr double kSumTolerance = 1e-10;

  explicit SimplexPoint(std::vector<double> probs) : probs_(std::move(probs)) {
    detail::require(!probs_.empty(), "SimplexPoint: empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (!(probs_[i] > 0.0) || !std::isfinite(probs_[i])) {
        throw InvalidArgument("SimplexPoint: entry " + std::to_string(i) +
                              " = " + std::to_string(probs_[i]) +
                              " is not strictly positive");
      }
      sum += probs_[i];
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw InvalidArgument("SimplexPoint: entries sum to " +
                            std::to_string(sum));
    }
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }

  /// Inverse-CDF draw from a uniform u in (0,1). The first index whose
  /// cumulative sum exceeds u wins, so exact ties go to the lower index.
  std::size_t sample(double u) const {
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs_.size(); ++i) {
      cum += probs_[i];
      if (u < cum) return i;
    }
    return probs_.size() - 1;
  }

 private:
  std::vector<double> probs_;
};

/// Cumulative estimated loss vector and the round counter.
struct EstimateState {
  std::vector<double> cumulative;
  std::size_t round = 0;

  static EstimateState zeros(std::size_t n) {
    return EstimateState{std::vector<double>(n, 0.0), 0};
  }

  void validate() const {
    detail::require(cumulative.size() >= 2, "EstimateState: need N >= 2");
    for (double v : cumulative) {
      detail::require(std::isfinite(v) && v <= 0.0,
                      "EstimateState: cumulative entries must be finite and <= 0");
    }
  }
};

/// Row-major T x N loss matrix.
class LossMatrix {
 public:
  LossMatrix() = default;
  LossMatrix(std::size_t rounds, std::size_t arms)
      : rounds_(rounds), arms_(arms), data_(rounds * arms, 0.0) {}

  std::size_t rounds() const noexcept { return rounds_; }
  std::size_t arms() const noexcept { return arms_; }

  double& at(std::size_t t, std::size_t i) { return data_[t * arms_ + i]; }
  double at(std::size_t t, std::size_t i) const { return data_[t * arms_ + i]; }

  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(data_).subspan(t * arms_, arms_);
  }
  std::span<double> row(std::size_t t) {
    return std::span<double>(data_).subspan(t * arms_, arms_);
  }

  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const LossMatrix&, const LossMatrix&) = default;

 private:
  std::size_t rounds_ = 0;
  std::size_t arms_ = 0;
  std::vector<double> data_;
};

/// Phi(G) = max_i G_i.
inline double max_potential(std::span<const double> g) {
  return *std::max_element(g.begin(), g.end());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace gbpa
