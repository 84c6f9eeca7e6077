#pragma once

// Oblivious loss-sequence generators. Every entry of every generated
// matrix lies in [-1, 0].

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "gbpa/error.hpp"
#include "gbpa/rng.hpp"
#include "gbpa/types.hpp"

namespace gbpa {

/// g_{t,i} = -Bernoulli(means[i]).
struct StochasticIID {
  std::vector<double> means;
};

/// Best arm loses with probability mu - gap, the others with probability mu.
struct BestArmGap {
  double mu = 0.5;
  double gap = 0.2;
  std::size_t best_arm = 0;
};

/// Like BestArmGap, but the best arm moves to the next index every `period`
/// rounds.
struct Switching {
  double mu = 0.5;
  double gap = 0.2;
  std::size_t period = 100;
};

/// Replays an explicit T x N matrix.
struct Deterministic {
  LossMatrix losses;
};

using EnvironmentSpec = std::variant<StochasticIID, BestArmGap, Switching, Deterministic>;

inline std::string environment_kind(const EnvironmentSpec& e) {
  switch (e.index()) {
    case 0: return "stochastic_iid";
    case 1: return "best_arm_gap";
    case 2: return "switching";
    default: return "deterministic";
  }
}

namespace detail {

inline void check_probability(double p, const char* what) {
  require(p >= 0.0 && p <= 1.0, std::string(what) + " must lie in [0, 1]");
}

inline void check_gap(double mu, double gap) {
  check_probability(mu, "environment: mu");
  require(gap >= 0.0 && gap < mu, "environment: need 0 <= gap < mu");
}

inline double bernoulli_loss(Rng& rng, double p) {
  return rng.uniform() < p ? -1.0 : 0.0;
}

}  // namespace detail

inline void validate(const EnvironmentSpec& spec, std::size_t n) {
  if (const auto* s = std::get_if<StochasticIID>(&spec)) {
    detail::require(s->means.size() == n, "stochastic_iid: need one mean per arm");
    for (double m : s->means) detail::check_probability(m, "stochastic_iid: mean");
  } else if (const auto* b = std::get_if<BestArmGap>(&spec)) {
    detail::check_gap(b->mu, b->gap);
    detail::require(b->best_arm < n, "best_arm_gap: best_arm out of range");
  } else if (const auto* w = std::get_if<Switching>(&spec)) {
    detail::check_gap(w->mu, w->gap);
    detail::require(w->period >= 1, "switching: period must be >= 1");
  } else {
    const auto& d = std::get<Deterministic>(spec);
    detail::require(d.losses.arms() == n, "deterministic: arm count mismatch");
    for (double v : d.losses.data()) {
      detail::require(v >= -1.0 && v <= 0.0, "deterministic: loss outside [-1, 0]");
    }
  }
}

/// T x N loss matrix; a pure function of (spec, n, t, seed).
inline LossMatrix generate(const EnvironmentSpec& spec, std::size_t n,
                           std::size_t t, std::uint64_t seed) {
  detail::require(n >= 2, "environment: need N >= 2");
  validate(spec, n);
  if (const auto* d = std::get_if<Deterministic>(&spec)) {
    detail::require(d->losses.rounds() == t, "deterministic: round count mismatch");
    return d->losses;
  }
  Rng rng(seed, Stream::kEnvironment);
  LossMatrix m(t, n);
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      double p = 0.0;
      if (const auto* s = std::get_if<StochasticIID>(&spec)) {
        p = s->means[i];
      } else if (const auto* b = std::get_if<BestArmGap>(&spec)) {
        p = i == b->best_arm ? b->mu - b->gap : b->mu;
      } else {
        const auto& w = std::get<Switching>(spec);
        const std::size_t best = (r / w.period) % n;
        p = i == best ? w.mu - w.gap : w.mu;
      }
      m.at(r, i) = detail::bernoulli_loss(rng, p);
    }
  }
  return m;
}

}  // namespace gbpa
