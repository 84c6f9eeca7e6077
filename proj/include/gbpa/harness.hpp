#pragma once

// Multi-seed experiment runner: one GBPA run per seed, aggregated regret,
// penalty-ledger means, and the matching theoretical bound.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gbpa/config.hpp"
#include "gbpa/engine.hpp"
#include "gbpa/environments.hpp"
#include "gbpa/stats.hpp"

namespace gbpa {

/// Worker count: $GBPA_THREADS if set, else hardware concurrency.
inline std::size_t thread_count() {
  if (const char* env = std::getenv("GBPA_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(0..count-1) on up to `threads` workers. Each index is processed
/// exactly once; callers write results into per-index slots.
inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < count; i = next++) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = count;
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct LedgerMeans {
  double overestimation = 0.0;
  double underestimation = 0.0;
  double divergence_total = 0.0;
  double divergence_per_round = 0.0;
  double max_telescoping_residual = 0.0;
};

struct TheoreticalBound {
  double value = 0.0;
  std::string label;
};

struct RegretReport {
  std::size_t n = 0;
  std::size_t t = 0;
  SmootherConfig smoother;
  std::string environment;
  std::vector<std::uint64_t> seeds;
  double mean_regret = 0.0;
  double std_error = 0.0;
  std::vector<double> per_seed_regrets;
  std::optional<LedgerMeans> ledger_means;
  std::optional<TheoreticalBound> theoretical_bound;
  std::optional<bool> bound_satisfied;  // mean + 2 SE <= bound
  std::string note;
  std::vector<double> mean_curve;  // mean cumulative regret after each round
  std::vector<double> se_curve;
  double runtime_seconds = 0.0;  // console only; not persisted
};

/// Bound matching the smoother, if one applies.
inline std::optional<TheoreticalBound> theoretical_bound(const SmootherConfig& s,
                                                         std::size_t n,
                                                         std::size_t t) {
  if (const auto* c = std::get_if<TsallisConfig>(&s)) {
    return TheoreticalBound{tsallis_regret_bound(c->alpha, c->eta, n, t),
                            "tsallis: eta(N^(1-a)-1)/(1-a) + N^a T/(2 eta a)"};
  }
  if (const auto* c = std::get_if<SoftmaxConfig>(&s)) {
    return TheoreticalBound{softmax_regret_bound(c->eta, n, t),
                            "softmax: log N/eta + eta N T/2"};
  }
  const auto& p = std::get<PerturbationConfig>(s);
  const HazardBound hb = hazard_regret_bound(p.model, p.eta, n, t);
  if (hb.unbounded) return std::nullopt;
  return TheoreticalBound{hb.value + gr_bias_bound(n, t, p.gr_cap),
                          "hazard: eta E[max Z] + N sup h T/eta + N T/(e M)"};
}

inline bool bound_holds(double mean, double se, double bound) {
  return mean + 2.0 * se <= bound;
}

inline void write_report(const RegretReport& r, const std::string& base);

struct SeedResult {
  std::vector<double> path;
  std::optional<PenaltyLedger> ledger;
  Trace trace;
};

inline RegretReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const SmootherConfig smoother = resolve(cfg.smoother, cfg.n, cfg.t);
  const LossMatrix losses = generate(cfg.environment, cfg.n, cfg.t, cfg.environment_seed);

  std::vector<SeedResult> results(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), thread_count(), [&](std::size_t k) {
    SeedResult r;
    r.trace = run_gbpa(smoother, losses, cfg.seeds[k]);
    r.path = cumulative_regret_path(losses, r.trace);
    if (cfg.mc.ledger) {
      LedgerOptions lo;
      lo.mc_samples = cfg.mc.ledger_samples;
      lo.seed = cfg.seeds[k];
      r.ledger = penalty_decomposition(r.trace, smoother, lo);
    }
    if (!cfg.write_traces) {
      r.trace.chosen_arms.clear();
      r.trace.incurred_losses.clear();
      r.trace.estimates.clear();
    }
    results[k] = std::move(r);
  });

  RegretReport rep;
  rep.n = cfg.n;
  rep.t = cfg.t;
  rep.smoother = smoother;
  rep.environment = environment_kind(cfg.environment);
  rep.seeds = cfg.seeds;
  for (const auto& r : results) rep.per_seed_regrets.push_back(r.path.back());
  rep.mean_regret = mean_of(rep.per_seed_regrets);
  rep.std_error = std_error_of(rep.per_seed_regrets);

  rep.mean_curve.assign(cfg.t, 0.0);
  rep.se_curve.assign(cfg.t, 0.0);
  std::vector<double> col(results.size());
  for (std::size_t t = 0; t < cfg.t; ++t) {
    for (std::size_t k = 0; k < results.size(); ++k) col[k] = results[k].path[t];
    rep.mean_curve[t] = mean_of(col);
    rep.se_curve[t] = std_error_of(col);
  }

  if (cfg.mc.ledger) {
    LedgerMeans lm;
    const double ds = static_cast<double>(results.size());
    for (const auto& r : results) {
      lm.overestimation += r.ledger->overestimation / ds;
      lm.underestimation += r.ledger->underestimation / ds;
      lm.divergence_total += r.ledger->divergence_total / ds;
      lm.max_telescoping_residual =
          std::max(lm.max_telescoping_residual, r.ledger->telescoping_residual);
    }
    lm.divergence_per_round = lm.divergence_total / static_cast<double>(cfg.t);
    rep.ledger_means = lm;
  }

  rep.theoretical_bound = theoretical_bound(smoother, cfg.n, cfg.t);
  if (rep.theoretical_bound) {
    rep.bound_satisfied =
        bound_holds(rep.mean_regret, rep.std_error, rep.theoretical_bound->value);
  } else {
    rep.note = "conjecture probe: no guarantee; observed regret only";
  }

  if (!cfg.output_path.empty()) {
    const std::filesystem::path base(cfg.output_path);
    if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
    if (cfg.write_traces) {
      std::ofstream tr(cfg.output_path + ".traces.jsonl");
      for (std::size_t k = 0; k < results.size(); ++k) {
        tr << trace_to_json(results[k].trace, smoother, rep.per_seed_regrets[k],
                            results[k].ledger)
                  .dump()
           << '\n';
      }
    }
  }
  if (!cfg.output_path.empty()) write_report(rep, cfg.output_path);
  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

inline json report_to_json(const RegretReport& r) {
  json j;
  j["N"] = r.n;
  j["T"] = r.t;
  j["smoother"] = smoother_to_json(r.smoother);
  j["environment"] = r.environment;
  j["seeds"] = r.seeds;
  j["mean_regret"] = r.mean_regret;
  j["std_error"] = r.std_error;
  j["per_seed_regrets"] = r.per_seed_regrets;
  if (r.ledger_means) {
    j["ledger_means"] = {{"overestimation", r.ledger_means->overestimation},
                         {"underestimation", r.ledger_means->underestimation},
                         {"divergence_total", r.ledger_means->divergence_total},
                         {"divergence_per_round", r.ledger_means->divergence_per_round},
                         {"max_telescoping_residual",
                          r.ledger_means->max_telescoping_residual}};
  } else {
    j["ledger_means"] = nullptr;
  }
  if (r.theoretical_bound) {
    j["theoretical_bound"] = r.theoretical_bound->value;
    j["bound_label"] = r.theoretical_bound->label;
    j["bound_satisfied"] = *r.bound_satisfied;
  } else {
    j["theoretical_bound"] = nullptr;
    j["bound_satisfied"] = nullptr;
  }
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// CSV: round, mean_cum_regret, se_cum_regret, bound_cum. The bound column
/// is the final bound scaled by sqrt(t/T), a visual overlay only.
inline std::string report_csv(const RegretReport& r) {
  std::ostringstream os;
  os << "round,mean_cum_regret,se_cum_regret,bound_cum\n";
  for (std::size_t t = 0; t < r.mean_curve.size(); ++t) {
    os << (t + 1) << ',' << format_number(r.mean_curve[t]) << ','
       << format_number(r.se_curve[t]) << ',';
    if (r.theoretical_bound) {
      os << format_number(r.theoretical_bound->value *
                          std::sqrt(static_cast<double>(t + 1) /
                                    static_cast<double>(r.t)));
    }
    os << '\n';
  }
  return os.str();
}

/// Writes <base>.json and <base>.csv.
inline void write_report(const RegretReport& r, const std::string& base) {
  const std::filesystem::path p(base);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream js(base + ".json");
  if (!js) throw Error("cannot write '" + base + ".json'");
  js << report_to_json(r).dump(2) << '\n';
  std::ofstream csv(base + ".csv");
  if (!csv) throw Error("cannot write '" + base + ".csv'");
  csv << report_csv(r);
}

// --- sweeps -----------------------------------------------------------------

enum class SweepAxis { kN, kT, kAlpha, kEta, kDistribution };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "N") return SweepAxis::kN;
  if (s == "T") return SweepAxis::kT;
  if (s == "alpha") return SweepAxis::kAlpha;
  if (s == "eta") return SweepAxis::kEta;
  if (s == "distribution") return SweepAxis::kDistribution;
  throw InvalidArgument("unknown sweep axis '" + s + "'");
}

struct SweepRow {
  std::string value;
  RegretReport report;
  std::optional<double> bound_at_minimax;  // alpha sweeps
  std::optional<double> relaxed_bound;     // alpha sweeps
};

struct SweepTable {
  SweepAxis axis = SweepAxis::kT;
  std::vector<SweepRow> rows;
  std::optional<double> loglog_slope;  // T sweeps: d log(mean regret) / d log T
};

/// Applies one sweep value to a copy of the config.
inline ExperimentConfig with_axis_value(ExperimentConfig cfg, SweepAxis axis,
                                        const std::string& value) {
  switch (axis) {
    case SweepAxis::kN:
      cfg.n = std::stoul(value);
      if (auto* s = std::get_if<StochasticIID>(&cfg.environment)) {
        s->means.resize(cfg.n, s->means.empty() ? 0.5 : s->means.back());
      }
      break;
    case SweepAxis::kT: cfg.t = std::stoul(value); break;
    case SweepAxis::kAlpha:
      detail::require(cfg.smoother.kind == SmootherKind::kTsallis,
                      "alpha sweep needs a tsallis smoother");
      cfg.smoother.alpha = std::stod(value);
      break;
    case SweepAxis::kEta: cfg.smoother.eta = std::stod(value); break;
    case SweepAxis::kDistribution: {
      detail::require(cfg.smoother.kind == SmootherKind::kFtpl,
                      "distribution sweep needs an ftpl smoother");
      const json j = value.starts_with("{") ? json::parse(value)
                                            : json{{"family", value}};
      cfg.smoother.model = model_from_json(j);
      break;
    }
  }
  if (!cfg.output_path.empty()) cfg.output_path += "_" + value;
  cfg.validate();
  return cfg;
}

inline SweepTable sweep(const ExperimentConfig& cfg, SweepAxis axis,
                        const std::vector<std::string>& values) {
  detail::require(!values.empty(), "sweep: no values");
  SweepTable table;
  table.axis = axis;
  for (const std::string& v : values) {
    ExperimentConfig c = with_axis_value(cfg, axis, v);
    SweepRow row{v, run_experiment(c), std::nullopt, std::nullopt};
    if (axis == SweepAxis::kAlpha) {
      const double a = c.smoother.alpha;
      row.bound_at_minimax = tsallis_regret_bound(a, minimax_eta(a, c.n, c.t), c.n, c.t);
      row.relaxed_bound = tsallis_minimax_bound(a, c.n, c.t);
    }
    table.rows.push_back(std::move(row));
  }
  if (axis == SweepAxis::kT && table.rows.size() >= 2) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& r : table.rows) {
      x.push_back(std::log(static_cast<double>(r.report.t)));
      y.push_back(std::log(r.report.mean_regret));
    }
    table.loglog_slope = stats::ols_slope(x, y);
  }
  return table;
}

inline json sweep_to_json(const SweepTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json j = report_to_json(r.report);
    j["value"] = r.value;
    if (r.bound_at_minimax) j["bound_at_minimax_eta"] = *r.bound_at_minimax;
    if (r.relaxed_bound) j["relaxed_minimax_bound"] = *r.relaxed_bound;
    rows.push_back(std::move(j));
  }
  json out{{"rows", rows}};
  out["loglog_slope"] = t.loglog_slope ? json(*t.loglog_slope) : json(nullptr);
  return out;
}

}  // namespace gbpa
