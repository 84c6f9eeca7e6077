#include <catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gbpa/gbpa.hpp"

using namespace gbpa;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("gbpa_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ExperimentConfig small_config(SmootherKind kind) {
  ExperimentConfig c;
  c.n = 4;
  c.t = 300;
  c.smoother.kind = kind;
  c.environment_seed = 7;
  for (std::uint64_t i = 0; i < 6; ++i) c.seeds.push_back(seed_for_index(7, i));
  c.mc.ledger_samples = 5000;
  return c;
}

}  // namespace

TEST_CASE("single-round regret lies in [-1, 1]") {
  for (SmootherKind k : {SmootherKind::kTsallis, SmootherKind::kSoftmax, SmootherKind::kFtpl}) {
    ExperimentConfig c = small_config(k);
    c.t = 1;
    const RegretReport r = run_experiment(c);
    for (double v : r.per_seed_regrets) {
      REQUIRE(v >= -1.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("config parsing and defaults") {
  const json j = json::parse(R"({
    "N": 5, "T": 200, "seeds": 3, "master_seed": 11,
    "smoother": {"type": "tsallis", "alpha": 0.3},
    "environment": {"kind": "switching", "mu": 0.6, "gap": 0.1, "period": 20},
    "output_path": "out/x"
  })");
  const ExperimentConfig c = config_from_json(j);
  REQUIRE(c.n == 5);
  REQUIRE(c.t == 200);
  REQUIRE(c.seeds == std::vector<std::uint64_t>{seed_for_index(11, 0), seed_for_index(11, 1),
                                                 seed_for_index(11, 2)});
  REQUIRE(c.environment_seed == 11);
  REQUIRE(c.mc.ledger);
  REQUIRE(std::get<Switching>(c.environment).period == 20);
  const auto t = std::get<TsallisConfig>(resolve(c.smoother, c.n, c.t));
  REQUIRE(t.alpha == 0.3);
  REQUIRE(t.eta == Approx(minimax_eta(0.3, 5, 200)));

  const json f = json::parse(R"({
    "N": 10, "T": 1000, "seeds": [1, 2],
    "smoother": {"type": "ftpl", "distribution": {"family": "gumbel"}}
  })");
  const ExperimentConfig cf = config_from_json(f);
  REQUIRE_FALSE(cf.mc.ledger);
  const auto p = std::get<PerturbationConfig>(resolve(cf.smoother, 10, 1000));
  REQUIRE(p.gr_cap == 100);
  REQUIRE(p.eta == Approx(tune_eta(PerturbationModel::gumbel(), 10, 1000)));

  const json s = json::parse(R"({"N": 10, "T": 1000, "seeds": 1, "smoother": {"type": "softmax"}})");
  const auto sm = std::get<SoftmaxConfig>(resolve(config_from_json(s).smoother, 10, 1000));
  REQUIRE(sm.eta == Approx(std::sqrt(10 * std::log(10.0) / 1000)));

  REQUIRE_THROWS_AS(config_from_json(json::parse(R"({"N": 1, "T": 5, "seeds": 1,
      "smoother": {"type": "tsallis"}})")), InvalidArgument);
  REQUIRE_THROWS_AS(config_from_json(json::parse(R"({"N": 3, "T": 5, "seeds": 1,
      "smoother": {"type": "bogus"}})")), InvalidArgument);
  REQUIRE_THROWS_AS(config_from_json(json::parse(R"({"N": 3, "T": 5, "seeds": 1,
      "smoother": {"type": "tsallis", "alpha": 1.0}})")), InvalidArgument);
  REQUIRE_THROWS(load_config("/nonexistent/config.json"));
}

TEST_CASE("reruns write byte-identical JSON and CSV") {
  const fs::path d = temp_dir("rerun");
  for (SmootherKind k : {SmootherKind::kTsallis, SmootherKind::kFtpl}) {
    ExperimentConfig c = small_config(k);
    c.output_path = (d / "a").string();
    run_experiment(c);
    const std::string j1 = slurp(d / "a.json");
    const std::string c1 = slurp(d / "a.csv");
    run_experiment(c);
    REQUIRE(slurp(d / "a.json") == j1);
    REQUIRE(slurp(d / "a.csv") == c1);
    REQUIRE(std::count(c1.begin(), c1.end(), '\n') == static_cast<long>(c.t) + 1);
  }
  fs::remove_all(d);
}

TEST_CASE("thread count does not change results") {
  const ExperimentConfig c = small_config(SmootherKind::kSoftmax);
  ::setenv("GBPA_THREADS", "1", 1);
  REQUIRE(thread_count() == 1);
  const RegretReport a = run_experiment(c);
  ::setenv("GBPA_THREADS", "4", 1);
  REQUIRE(thread_count() == 4);
  const RegretReport b = run_experiment(c);
  ::unsetenv("GBPA_THREADS");
  REQUIRE(report_to_json(a).dump() == report_to_json(b).dump());
}

TEST_CASE("parallel_for visits each index once and propagates errors") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) REQUIRE(h.load() == 1);
  REQUIRE_THROWS_AS(parallel_for(100, 4,
                                 [](std::size_t i) {
                                   if (i == 37) throw InvalidArgument("boom");
                                 }),
                    InvalidArgument);
}

TEST_CASE("report fields are consistent") {
  const RegretReport r = run_experiment(small_config(SmootherKind::kTsallis));
  REQUIRE(r.per_seed_regrets.size() == 6);
  REQUIRE(r.mean_curve.size() == 300);
  REQUIRE(r.mean_curve.back() == Approx(r.mean_regret).epsilon(1e-12));
  REQUIRE(r.theoretical_bound);
  REQUIRE(*r.bound_satisfied ==
          (r.mean_regret + 2.0 * r.std_error <= r.theoretical_bound->value));
  REQUIRE(r.ledger_means);
  REQUIRE(r.ledger_means->max_telescoping_residual <= 1e-8);
  const json j = report_to_json(r);
  REQUIRE_FALSE(j.contains("runtime_seconds"));
  REQUIRE(j.at("bound_satisfied").get<bool>() == *r.bound_satisfied);
  REQUIRE(j.at("theoretical_bound").get<double>() == r.theoretical_bound->value);
}

TEST_CASE("single-value sweep equals a direct run") {
  const ExperimentConfig c = small_config(SmootherKind::kTsallis);
  const SweepTable t = sweep(c, SweepAxis::kT, {"300"});
  REQUIRE(t.rows.size() == 1);
  REQUIRE(report_to_json(t.rows[0].report).dump() == report_to_json(run_experiment(c)).dump());
  REQUIRE_FALSE(t.loglog_slope);
  REQUIRE_THROWS_AS(parse_axis("gamma"), InvalidArgument);
  REQUIRE_THROWS_AS(sweep(c, SweepAxis::kDistribution, {"gumbel"}), InvalidArgument);
}

TEST_CASE("alpha sweep bound is minimised at one half") {
  ExperimentConfig c = small_config(SmootherKind::kTsallis);
  c.seeds.resize(2);
  const SweepTable t = sweep(c, SweepAxis::kAlpha,
                             {"0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9"});
  std::size_t best = 0;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    REQUIRE(*t.rows[k].bound_at_minimax <= *t.rows[k].relaxed_bound);
    if (*t.rows[k].relaxed_bound < *t.rows[best].relaxed_bound) best = k;
  }
  REQUIRE(t.rows[best].value == "0.5");
  REQUIRE(*t.rows[best].relaxed_bound == Approx(2.0 * std::sqrt(2.0 * 300 * 4)));
}

TEST_CASE("distribution sweep and the Gaussian probe") {
  ExperimentConfig c = small_config(SmootherKind::kFtpl);
  const SweepTable t = sweep(c, SweepAxis::kDistribution,
                             {"exponential", R"({"family": "frechet", "params": [3]})"});
  REQUIRE(t.rows.size() == 2);
  for (const auto& r : t.rows) REQUIRE(r.report.theoretical_bound);

  c.smoother.model = PerturbationModel::gaussian();
  c.smoother.eta = 3.0;
  const RegretReport g = run_experiment(c);
  REQUIRE_FALSE(g.theoretical_bound);
  REQUIRE_FALSE(g.bound_satisfied);
  REQUIRE(g.note.find("no guarantee") != std::string::npos);
  const json j = report_to_json(g);
  REQUIRE(j.at("theoretical_bound").is_null());
}

TEST_CASE("T sweep reports a log-log slope") {
  ExperimentConfig c = small_config(SmootherKind::kTsallis);
  const SweepTable t = sweep(c, SweepAxis::kT, {"100", "400", "1600"});
  REQUIRE(t.loglog_slope);
  REQUIRE(std::isfinite(*t.loglog_slope));
  const json j = sweep_to_json(t);
  REQUIRE(j.at("rows").size() == 3);
  REQUIRE(j.at("rows")[2].at("value") == "1600");
}

TEST_CASE("traces are written when requested") {
  const fs::path d = temp_dir("traces");
  ExperimentConfig c = small_config(SmootherKind::kTsallis);
  c.output_path = (d / "run").string();
  c.write_traces = true;
  const RegretReport r = run_experiment(c);
  std::ifstream in(d / "run.traces.jsonl");
  std::string line;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    REQUIRE(j.at("regret").get<double>() == r.per_seed_regrets[k]);
    REQUIRE(trace_from_json(j).chosen_arms.size() == c.t);
    ++k;
  }
  REQUIRE(k == c.seeds.size());
  fs::remove_all(d);
}

TEST_CASE("verification suite passes and detects an injected fault") {
  VerifyOptions o;
  o.gumbel_samples = 200000;
  o.gr_replicates = 20000;
  o.hessian_samples = 50000;
  const VerifyReport rep = verify_suite(o);
  for (const auto& c : rep.checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.status != CheckStatus::kFail);
  }
  REQUIRE(rep.all_passed());
  REQUIRE(verify_to_json(rep).at("checks").size() == rep.checks.size());

  VerifyOptions bad;
  bad.tsallis_tolerance = 1e-2;
  REQUIRE(check_tsallis_gradient(bad).status == CheckStatus::kFail);
}
