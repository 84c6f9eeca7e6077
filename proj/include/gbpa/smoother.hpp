#pragma once

#include <string>
#include <variant>

#include "gbpa/perturbation.hpp"
#include "gbpa/tsallis.hpp"

namespace gbpa {

/// Which smoothed potential drives the learner.
using SmootherConfig = std::variant<TsallisConfig, SoftmaxConfig, PerturbationConfig>;

inline void validate(const SmootherConfig& s) {
  std::visit([](const auto& c) { c.validate(); }, s);
}

inline bool is_perturbation(const SmootherConfig& s) {
  return std::holds_alternative<PerturbationConfig>(s);
}

inline std::string describe(const SmootherConfig& s) {
  struct V {
    std::string operator()(const TsallisConfig& c) const {
      return "tsallis(alpha=" + std::to_string(c.alpha) +
             ", eta=" + std::to_string(c.eta) + ")";
    }
    std::string operator()(const SoftmaxConfig& c) const {
      return "softmax(eta=" + std::to_string(c.eta) + ")";
    }
    std::string operator()(const PerturbationConfig& c) const {
      return "ftpl(" + c.model.name() + ", eta=" + std::to_string(c.eta) +
             ", M=" + std::to_string(c.gr_cap) + ")";
    }
  };
  return std::visit(V{}, s);
}

/// grad Phi(G) for the closed-form smoothers. Perturbation smoothers have
/// no exact gradient; use ftpl_gradient_mc or NoiseBank instead.
inline SimplexPoint smoother_distribution(const SmootherConfig& s,
                                          std::span<const double> g) {
  if (const auto* t = std::get_if<TsallisConfig>(&s)) return tsallis_distribution(g, *t);
  if (const auto* x = std::get_if<SoftmaxConfig>(&s)) return softmax_distribution(g, x->eta);
  throw InvalidArgument("smoother_distribution: perturbation smoother has no closed form");
}

inline double smoother_potential(const SmootherConfig& s, std::span<const double> g) {
  if (const auto* t = std::get_if<TsallisConfig>(&s)) return tsallis_potential(g, *t);
  if (const auto* x = std::get_if<SoftmaxConfig>(&s)) return softmax_potential(g, x->eta);
  throw InvalidArgument("smoother_potential: perturbation smoother needs a NoiseBank");
}

}  // namespace gbpa
