#pragma once

// GBPA round loop, regret accounting and the penalty ledger.
//
// Each round: p = grad Phi(L_{t-1}); play i_t ~ p; observe g_{t,i_t};
// estimate l_t = g_{t,i_t} / p_{i_t} e_{i_t} (or the Geometric Resampling
// count in place of 1/p for perturbation smoothers); L_t = L_{t-1} + l_t.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "gbpa/error.hpp"
#include "gbpa/perturbation.hpp"
#include "gbpa/rng.hpp"
#include "gbpa/smoother.hpp"
#include "gbpa/types.hpp"

namespace gbpa {

/// Random streams owned by one run. Sampling and resampling are
/// independent substreams of the run seed.
struct RunStreams {
  Rng sampling;
  Rng resampling;

  explicit RunStreams(std::uint64_t seed)
      : sampling(seed, Stream::kSampling), resampling(seed, Stream::kResampling) {}
};

struct RoundResult {
  std::size_t chosen_arm = 0;
  double incurred_loss = 0.0;
  double estimate = 0.0;      // non-zero entry of the one-hot estimate
  double probability = 0.0;   // p_{i_t}; NaN for perturbation smoothers
  std::size_t resample_draws = 0;  // K for perturbation smoothers, else 0
  EstimateState state;
};

inline RoundResult run_round(const EstimateState& state,
                             const SmootherConfig& smoother,
                             const LossVector& loss, RunStreams& streams) {
  state.validate();
  detail::require(loss.size() == state.cumulative.size(),
                  "run_round: loss and state dimension mismatch");
  RoundResult r;
  const std::span<const double> cum = state.cumulative;
  if (const auto* pc = std::get_if<PerturbationConfig>(&smoother)) {
    r.chosen_arm = ftpl_sample(cum, *pc, streams.sampling);
    r.incurred_loss = loss[r.chosen_arm];
    r.resample_draws =
        geometric_resample_count(cum, *pc, r.chosen_arm, streams.resampling);
    r.estimate = static_cast<double>(r.resample_draws) * r.incurred_loss;
    r.probability = std::numeric_limits<double>::quiet_NaN();
  } else {
    const SimplexPoint p = smoother_distribution(smoother, cum);
    r.chosen_arm = p.sample(streams.sampling.uniform());
    r.incurred_loss = loss[r.chosen_arm];
    r.probability = p[r.chosen_arm];
    r.estimate = r.incurred_loss / r.probability;
  }
  r.state = state;
  r.state.cumulative[r.chosen_arm] += r.estimate;
  r.state.round += 1;
  return r;
}

inline RoundResult run_round(const EstimateState& state,
                             const SmootherConfig& smoother,
                             const LossVector& loss, std::uint64_t seed) {
  RunStreams streams(seed);
  return run_round(state, smoother, loss, streams);
}

/// Record of one run.
struct Trace {
  std::uint64_t seed = 0;
  std::size_t arms = 0;
  std::size_t rounds = 0;
  std::string smoother;
  std::vector<std::size_t> chosen_arms;
  std::vector<double> incurred_losses;
  std::vector<double> estimates;  // non-zero entry of each one-hot estimate
};

inline Trace run_gbpa(const SmootherConfig& smoother, const LossMatrix& losses,
                      std::uint64_t seed) {
  validate(smoother);
  detail::require(losses.arms() >= 2, "run_gbpa: need N >= 2");
  Trace tr;
  tr.seed = seed;
  tr.arms = losses.arms();
  tr.rounds = losses.rounds();
  tr.smoother = describe(smoother);
  tr.chosen_arms.reserve(losses.rounds());
  tr.incurred_losses.reserve(losses.rounds());
  tr.estimates.reserve(losses.rounds());

  RunStreams streams(seed);
  EstimateState state = EstimateState::zeros(losses.arms());
  for (std::size_t t = 0; t < losses.rounds(); ++t) {
    const auto row = losses.row(t);
    LossVector g(std::vector<double>(row.begin(), row.end()));
    RoundResult r = run_round(state, smoother, g, streams);
    tr.chosen_arms.push_back(r.chosen_arm);
    tr.incurred_losses.push_back(r.incurred_loss);
    tr.estimates.push_back(r.estimate);
    state = std::move(r.state);
  }
  return tr;
}

// --- regret -----------------------------------------------------------------

/// Cumulative regret max_i sum_{s<=t} (g_{s,i} - g_{s,i_s}) after each round.
/// A comparator index fixes i instead of taking the max.
inline std::vector<double> cumulative_regret_path(
    const LossMatrix& losses, const Trace& trace,
    std::optional<std::size_t> comparator = std::nullopt) {
  detail::require(trace.chosen_arms.size() == losses.rounds() &&
                      trace.arms == losses.arms(),
                  "regret: trace does not match the loss matrix");
  const std::size_t n = losses.arms();
  std::vector<double> arm_total(n, 0.0);
  double learner = 0.0;
  std::vector<double> path(losses.rounds());
  for (std::size_t t = 0; t < losses.rounds(); ++t) {
    for (std::size_t i = 0; i < n; ++i) arm_total[i] += losses.at(t, i);
    learner += losses.at(t, trace.chosen_arms[t]);
    const double best = comparator ? arm_total.at(*comparator)
                                   : *std::max_element(arm_total.begin(), arm_total.end());
    path[t] = best - learner;
  }
  return path;
}

inline double realized_regret(const LossMatrix& losses, const Trace& trace,
                              std::optional<std::size_t> comparator = std::nullopt) {
  if (losses.rounds() == 0) return 0.0;
  return cumulative_regret_path(losses, trace, comparator).back();
}

struct RegretEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> per_trace;
};

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double std_error_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) /
                   static_cast<double>(v.size()));
}

/// Monte Carlo expected regret over traces that share one loss sequence.
inline RegretEstimate expected_regret(
    const LossMatrix& losses, std::span<const Trace> traces,
    std::optional<std::size_t> comparator = std::nullopt) {
  if (traces.empty()) throw InvalidArgument("expected_regret: empty trace set");
  RegretEstimate out;
  for (const Trace& tr : traces) {
    out.per_trace.push_back(realized_regret(losses, tr, comparator));
  }
  out.mean = mean_of(out.per_trace);
  out.std_error = std_error_of(out.per_trace);
  return out;
}

// --- penalty ledger ---------------------------------------------------------

struct PenaltyLedger {
  double overestimation = 0.0;   // Phi~(0) - Phi(0)
  double underestimation = 0.0;  // Phi(L_T) - Phi~(L_T)
  double divergence_total = 0.0;
  std::vector<double> per_round_divergence;
  double telescoping_residual = 0.0;
};

struct LedgerOptions {
  std::size_t mc_samples = 100000;  // perturbation smoothers only
  std::uint64_t seed = 0;
  double negative_tolerance = 1e-8;
};

namespace detail {

// Potential and gradient evaluators with a common interface. For the
// closed-form smoothers the per-round divergence is computed through the
// regulariser (dual) Bregman divergence, independently of the potential
// differences that enter the telescoping check.
struct LedgerOracle {
  const SmootherConfig& smoother;
  std::optional<NoiseBank> bank;

  double potential(std::span<const double> g) const {
    if (bank) return bank->potential(g).first;
    return smoother_potential(smoother, g);
  }

  std::vector<double> gradient(std::span<const double> g) const {
    if (bank) return bank->argmax_frequencies(g);
    const SimplexPoint p = smoother_distribution(smoother, g);
    return {p.probs().begin(), p.probs().end()};
  }

  // D(next, prev) given the gradients at both points and the primal pieces.
  double divergence(std::span<const double> p_prev, std::span<const double> p_next,
                    double phi_prev, double phi_next,
                    std::span<const double> increment) const {
    if (const auto* t = std::get_if<TsallisConfig>(&smoother)) {
      return tsallis_regularizer_divergence(p_prev, p_next, t->alpha, t->eta);
    }
    if (const auto* s = std::get_if<SoftmaxConfig>(&smoother)) {
      return softmax_regularizer_divergence(p_prev, p_next, s->eta);
    }
    return phi_next - phi_prev - dot(p_prev, increment);
  }
};

}  // namespace detail

/// Ledger for an arbitrary increment sequence l_1..l_T (full vectors).
/// Checks the identity
///   Phi~(L_T) = Phi~(0) + sum_t <grad Phi~(L_{t-1}), l_t> + sum_t D_t
/// and reports its residual.
inline PenaltyLedger penalty_decomposition(
    std::span<const std::vector<double>> increments, std::size_t arms,
    const SmootherConfig& smoother, const LedgerOptions& opts = {}) {
  validate(smoother);
  detail::require(arms >= 2, "penalty_decomposition: need N >= 2");
  detail::LedgerOracle oracle{smoother, std::nullopt};
  if (const auto* pc = std::get_if<PerturbationConfig>(&smoother)) {
    oracle.bank.emplace(pc->model, pc->eta, arms, opts.mc_samples, opts.seed);
  }

  PenaltyLedger ledger;
  std::vector<double> cum(arms, 0.0);
  const double phi0 = oracle.potential(cum);
  ledger.overestimation = phi0 - max_potential(cum);

  double phi_prev = phi0;
  std::vector<double> p_prev = oracle.gradient(cum);
  double linear_sum = 0.0;
  for (const auto& inc : increments) {
    detail::require(inc.size() == arms, "penalty_decomposition: dimension mismatch");
    for (std::size_t i = 0; i < arms; ++i) cum[i] += inc[i];
    const double phi_next = oracle.potential(cum);
    const std::vector<double> p_next = oracle.gradient(cum);
    const double d = oracle.divergence(p_prev, p_next, phi_prev, phi_next, inc);
    if (!(d >= -opts.negative_tolerance)) {
      throw ConsistencyError("penalty_decomposition: negative divergence " +
                             std::to_string(d) + " at round " +
                             std::to_string(ledger.per_round_divergence.size() + 1));
    }
    ledger.per_round_divergence.push_back(d);
    ledger.divergence_total += d;
    linear_sum += dot(p_prev, inc);
    phi_prev = phi_next;
    p_prev = p_next;
  }
  ledger.underestimation = max_potential(cum) - phi_prev;
  ledger.telescoping_residual =
      std::abs(phi_prev - (phi0 + linear_sum + ledger.divergence_total));
  return ledger;
}

/// Ledger for a recorded bandit run (one-hot increments).
inline PenaltyLedger penalty_decomposition(const Trace& trace,
                                           const SmootherConfig& smoother,
                                           const LedgerOptions& opts = {}) {
  std::vector<std::vector<double>> inc;
  inc.reserve(trace.estimates.size());
  for (std::size_t t = 0; t < trace.estimates.size(); ++t) {
    std::vector<double> v(trace.arms, 0.0);
    v[trace.chosen_arms[t]] = trace.estimates[t];
    inc.push_back(std::move(v));
  }
  return penalty_decomposition(inc, trace.arms, smoother, opts);
}

// --- differential consistency -----------------------------------------------

struct ConsistencyEntry {
  std::size_t probe = 0;
  std::size_t coordinate = 0;
  double gradient = 0.0;
  double hessian = 0.0;
  double hessian_se = 0.0;
  double ratio = 0.0;  // hessian / gradient^gamma
  bool flagged = false;
};

struct ConsistencyReport {
  double gamma = 0.0;
  double c = 0.0;
  double max_ratio = 0.0;
  std::size_t violations = 0;
  std::vector<ConsistencyEntry> entries;

  bool ok() const noexcept { return violations == 0; }
};

struct ConsistencyOptions {
  double step = 1e-5;
  double rel_tol = 1e-3;
  std::size_t mc_samples = 100000;  // perturbation smoothers only
  double se_multiplier = 5.0;
  std::uint64_t seed = 0;
};

/// Checks hess_ii Phi~(G) <= C (grad_i Phi~(G))^gamma at every probe by
/// central differences of the gradient. A coordinate is flagged when the
/// Hessian exceeds C (1 + rel_tol) grad^gamma plus se_multiplier standard
/// errors (zero for the closed-form smoothers).
inline ConsistencyReport check_differential_consistency(
    const SmootherConfig& smoother, std::span<const std::vector<double>> probes,
    double gamma, double c, const ConsistencyOptions& opts = {}) {
  validate(smoother);
  detail::require(!probes.empty(), "differential consistency: no probes");
  ConsistencyReport rep;
  rep.gamma = gamma;
  rep.c = c;
  const std::size_t n = probes.front().size();

  std::optional<NoiseBank> bank;
  if (const auto* pc = std::get_if<PerturbationConfig>(&smoother)) {
    bank.emplace(pc->model, pc->eta, n, opts.mc_samples, opts.seed);
  }

  for (std::size_t k = 0; k < probes.size(); ++k) {
    const std::vector<double>& g = probes[k];
    detail::require(g.size() == n, "differential consistency: ragged probes");
    std::vector<double> grad;
    if (bank) {
      grad = bank->conditional_gradient(g).first;
    } else {
      const SimplexPoint p = smoother_distribution(smoother, g);
      grad.assign(p.probs().begin(), p.probs().end());
    }
    for (std::size_t i = 0; i < n; ++i) {
      ConsistencyEntry e;
      e.probe = k;
      e.coordinate = i;
      e.gradient = grad[i];
      if (bank) {
        std::tie(e.hessian, e.hessian_se) = bank->hessian_diagonal(g, i, opts.step);
      } else {
        std::vector<double> up = g;
        std::vector<double> dn = g;
        up[i] += opts.step;
        dn[i] -= opts.step;
        // The gradient is invariant to adding a constant to every arm, so a
        // probe pushed above zero is shifted back into the orthant.
        const double top = *std::max_element(up.begin(), up.end());
        if (top > 0.0) {
          for (double& v : up) v -= top;
        }
        const double gu = smoother_distribution(smoother, up)[i];
        const double gd = smoother_distribution(smoother, dn)[i];
        e.hessian = (gu - gd) / (2.0 * opts.step);
      }
      if (!std::isfinite(e.hessian) || !std::isfinite(e.gradient)) {
        throw Error("differential consistency: non-finite finite difference");
      }
      const double cap = c * std::pow(e.gradient, gamma);
      e.ratio = e.gradient > 0.0 ? e.hessian / std::pow(e.gradient, gamma) : 0.0;
      e.flagged = e.hessian > cap * (1.0 + opts.rel_tol) + opts.se_multiplier * e.hessian_se;
      rep.max_ratio = std::max(rep.max_ratio, e.ratio);
      if (e.flagged) ++rep.violations;
      rep.entries.push_back(e);
    }
  }
  return rep;
}

/// Uniform probes in (lo, 0]^n.
inline std::vector<std::vector<double>> random_probes(std::size_t n,
                                                      std::size_t count,
                                                      std::uint64_t seed,
                                                      double lo = -10.0) {
  Rng rng(seed, Stream::kProbe);
  std::vector<std::vector<double>> out(count, std::vector<double>(n));
  for (auto& g : out) {
    for (double& v : g) v = lo * rng.uniform();
  }
  return out;
}

}  // namespace gbpa
