#pragma once

// JSON schema for experiment configs, distribution specs and run traces.
//
// Distribution:  {"family": "exponential", "params": [1.0],
//                 "adapters": [{"type": "mirror"},
//                              {"type": "condition_above", "threshold": 1}]}
// Smoother:      {"type": "tsallis", "alpha": 0.5, "eta": "minimax"}
//                {"type": "softmax", "eta": "exp3"}
//                {"type": "ftpl", "distribution": {...}, "eta": "tuned",
//                 "gr_cap": "auto", "mc_samples": 100000}
// Environment:   {"kind": "best_arm_gap", "mu": 0.5, "gap": 0.2}
//                {"kind": "stochastic_iid", "means": [...]}
//                {"kind": "switching", "mu": 0.5, "gap": 0.2, "period": 100}
//                {"kind": "deterministic", "losses": [[...], ...]}

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "gbpa/distributions.hpp"
#include "gbpa/engine.hpp"
#include "gbpa/environments.hpp"
#include "gbpa/smoother.hpp"

namespace gbpa {

using json = nlohmann::json;

enum class SmootherKind { kTsallis, kSoftmax, kFtpl };

/// Smoother as written in a config: eta and the resampling cap may be left
/// to their tuned defaults, which depend on N and T.
struct SmootherSpec {
  SmootherKind kind = SmootherKind::kTsallis;
  double alpha = 0.5;
  std::optional<double> eta;  // nullopt: tuned value for (N, T)
  PerturbationModel model = PerturbationModel::exponential(1.0);
  std::optional<std::size_t> gr_cap;  // nullopt: ceil(sqrt(N T))
  std::size_t mc_samples = 100000;
  double newton_tol = 1e-13;
};

/// Concrete smoother for a given problem size.
inline SmootherConfig resolve(const SmootherSpec& s, std::size_t n, std::size_t t) {
  switch (s.kind) {
    case SmootherKind::kTsallis: {
      TsallisConfig c;
      c.alpha = s.alpha;
      c.eta = s.eta ? *s.eta : minimax_eta(s.alpha, n, t);
      c.newton_tol = s.newton_tol;
      c.validate();
      return c;
    }
    case SmootherKind::kSoftmax: {
      // Default learning rate sqrt(N log N / T).
      const double dn = static_cast<double>(n);
      SoftmaxConfig c{s.eta ? *s.eta
                            : std::sqrt(dn * std::log(dn) / static_cast<double>(t))};
      c.validate();
      return c;
    }
    case SmootherKind::kFtpl: {
      PerturbationConfig c;
      c.model = s.model;
      c.eta = s.eta ? *s.eta : tune_eta(s.model, n, t);
      c.gr_cap = s.gr_cap ? *s.gr_cap : default_gr_cap(n, t);
      c.mc_samples = s.mc_samples;
      c.validate();
      return c;
    }
  }
  throw InvalidArgument("unknown smoother kind");
}

struct McSettings {
  bool ledger = true;
  std::size_t ledger_samples = 100000;
};

struct ExperimentConfig {
  std::size_t n = 10;
  std::size_t t = 1000;
  SmootherSpec smoother;
  EnvironmentSpec environment = BestArmGap{};
  std::uint64_t environment_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::string output_path;
  McSettings mc;
  bool write_traces = false;

  void validate() const {
    detail::require(n >= 2, "config: N must be >= 2");
    detail::require(t >= 1, "config: T must be >= 1");
    detail::require(!seeds.empty(), "config: need at least one seed");
    gbpa::validate(environment, n);
    (void)resolve(smoother, n, t);
  }
};

// --- parsing ----------------------------------------------------------------

inline PerturbationModel model_from_json(const json& j) {
  const Family fam = parse_family(j.at("family").get<std::string>());
  std::vector<double> params;
  if (j.contains("params")) params = j.at("params").get<std::vector<double>>();
  PerturbationModel m = PerturbationModel::make(fam, params);
  if (j.contains("adapters")) {
    for (const json& a : j.at("adapters")) {
      const std::string type = a.at("type").get<std::string>();
      if (type == "mirror") {
        m = m.mirrored();
      } else if (type == "condition_above") {
        m = m.conditioned_above(a.value("threshold", 1.0));
      } else {
        throw InvalidArgument("unknown adapter '" + type + "'");
      }
    }
  }
  return m;
}

inline json model_to_json(const PerturbationModel& m) {
  json j;
  j["family"] = family_name(m.family());
  j["params"] = m.has_second_param() ? json::array({m.param0(), m.param1()})
                                     : json::array({m.param0()});
  json ads = json::array();
  for (const Adapter& a : m.adapters()) {
    if (std::holds_alternative<Mirror>(a)) {
      ads.push_back({{"type", "mirror"}});
    } else {
      ads.push_back({{"type", "condition_above"},
                     {"threshold", std::get<ConditionAbove>(a).threshold}});
    }
  }
  j["adapters"] = ads;
  return j;
}

namespace detail {

// Numbers are explicit; strings name the tuned default.
inline std::optional<double> optional_eta(const json& j) {
  if (!j.contains("eta")) return std::nullopt;
  const json& e = j.at("eta");
  if (e.is_number()) return e.get<double>();
  const std::string s = e.get<std::string>();
  if (s == "minimax" || s == "tuned" || s == "exp3" || s == "auto") return std::nullopt;
  throw InvalidArgument("unknown eta setting '" + s + "'");
}

}  // namespace detail

inline SmootherSpec smoother_from_json(const json& j) {
  SmootherSpec s;
  const std::string type = j.at("type").get<std::string>();
  s.eta = detail::optional_eta(j);
  if (type == "tsallis") {
    s.kind = SmootherKind::kTsallis;
    s.alpha = j.value("alpha", 0.5);
    s.newton_tol = j.value("newton_tol", 1e-13);
  } else if (type == "softmax" || type == "exp3") {
    s.kind = SmootherKind::kSoftmax;
  } else if (type == "ftpl" || type == "perturbation") {
    s.kind = SmootherKind::kFtpl;
    s.model = model_from_json(j.at("distribution"));
    if (j.contains("gr_cap") && j.at("gr_cap").is_number()) {
      s.gr_cap = j.at("gr_cap").get<std::size_t>();
    }
    s.mc_samples = j.value("mc_samples", std::size_t{100000});
  } else {
    throw InvalidArgument("unknown smoother type '" + type + "'");
  }
  return s;
}

inline json smoother_to_json(const SmootherConfig& s) {
  struct V {
    json operator()(const TsallisConfig& c) const {
      return {{"type", "tsallis"}, {"alpha", c.alpha}, {"eta", c.eta}};
    }
    json operator()(const SoftmaxConfig& c) const {
      return {{"type", "softmax"}, {"eta", c.eta}};
    }
    json operator()(const PerturbationConfig& c) const {
      return {{"type", "ftpl"},
              {"distribution", model_to_json(c.model)},
              {"eta", c.eta},
              {"gr_cap", c.gr_cap}};
    }
  };
  return std::visit(V{}, s);
}

inline EnvironmentSpec environment_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "stochastic_iid") {
    return StochasticIID{j.at("means").get<std::vector<double>>()};
  }
  if (kind == "best_arm_gap") {
    return BestArmGap{j.value("mu", 0.5), j.value("gap", 0.2),
                      j.value("best_arm", std::size_t{0})};
  }
  if (kind == "switching") {
    return Switching{j.value("mu", 0.5), j.value("gap", 0.2),
                     j.value("period", std::size_t{100})};
  }
  if (kind == "deterministic") {
    const auto rows = j.at("losses").get<std::vector<std::vector<double>>>();
    detail::require(!rows.empty(), "deterministic: empty loss matrix");
    LossMatrix m(rows.size(), rows.front().size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      detail::require(rows[t].size() == m.arms(), "deterministic: ragged matrix");
      for (std::size_t i = 0; i < m.arms(); ++i) m.at(t, i) = rows[t][i];
    }
    return Deterministic{std::move(m)};
  }
  throw InvalidArgument("unknown environment kind '" + kind + "'");
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.n = j.at("N").get<std::size_t>();
  c.t = j.at("T").get<std::size_t>();
  c.smoother = smoother_from_json(j.at("smoother"));
  const json env = j.value("environment", json{{"kind", "best_arm_gap"}});
  c.environment = environment_from_json(env);
  const std::uint64_t master = j.value("master_seed", std::uint64_t{0});
  c.environment_seed = env.value("seed", master);
  const json& seeds = j.at("seeds");
  if (seeds.is_array()) {
    c.seeds = seeds.get<std::vector<std::uint64_t>>();
  } else {
    const auto count = seeds.get<std::size_t>();
    for (std::size_t i = 0; i < count; ++i) c.seeds.push_back(seed_for_index(master, i));
  }
  c.output_path = j.value("output_path", std::string{});
  if (j.contains("mc_settings")) {
    const json& mc = j.at("mc_settings");
    c.mc.ledger = mc.value("ledger", c.smoother.kind != SmootherKind::kFtpl);
    c.mc.ledger_samples = mc.value("ledger_samples", std::size_t{100000});
  } else {
    c.mc.ledger = c.smoother.kind != SmootherKind::kFtpl;
  }
  c.write_traces = j.value("write_traces", false);
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw InvalidArgument("config '" + path + "': " + e.what());
  }
}

inline json ledger_to_json(const PenaltyLedger& l) {
  return {{"overestimation", l.overestimation},
          {"underestimation", l.underestimation},
          {"divergence_total", l.divergence_total},
          {"per_round_divergence", l.per_round_divergence},
          {"telescoping_residual", l.telescoping_residual}};
}

/// Trace record: {seed, N, T, smoother, chosen_arms, incurred_losses,
/// estimates, regret, ledger}.
inline json trace_to_json(const Trace& tr, const SmootherConfig& smoother,
                          double regret, const std::optional<PenaltyLedger>& ledger) {
  json j;
  j["seed"] = tr.seed;
  j["N"] = tr.arms;
  j["T"] = tr.rounds;
  j["smoother"] = smoother_to_json(smoother);
  j["chosen_arms"] = tr.chosen_arms;
  j["incurred_losses"] = tr.incurred_losses;
  j["estimates"] = tr.estimates;
  j["regret"] = regret;
  j["ledger"] = ledger ? ledger_to_json(*ledger) : json(nullptr);
  return j;
}

inline Trace trace_from_json(const json& j) {
  Trace tr;
  tr.seed = j.at("seed").get<std::uint64_t>();
  tr.arms = j.at("N").get<std::size_t>();
  tr.rounds = j.at("T").get<std::size_t>();
  tr.chosen_arms = j.at("chosen_arms").get<std::vector<std::size_t>>();
  tr.incurred_losses = j.at("incurred_losses").get<std::vector<double>>();
  tr.estimates = j.at("estimates").get<std::vector<double>>();
  return tr;
}

}  // namespace gbpa
