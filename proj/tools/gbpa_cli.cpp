#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gbpa/gbpa.hpp"

namespace {

std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : s) {
    if (ch == '{' || ch == '[') ++depth;
    if (ch == '}' || ch == ']') --depth;
    if (ch == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void print_summary(const gbpa::RegretReport& r) {
  std::printf("%s N=%zu T=%zu seeds=%zu  mean regret %.4f +- %.4f",
              gbpa::describe(r.smoother).c_str(), r.n, r.t, r.seeds.size(),
              r.mean_regret, r.std_error);
  if (r.theoretical_bound) {
    std::printf("  bound %.4f  satisfied=%s", r.theoretical_bound->value,
                *r.bound_satisfied ? "yes" : "no");
  } else {
    std::printf("  (%s)", r.note.c_str());
  }
  std::printf("  [%.2fs]\n", r.runtime_seconds);
}

int run_cmd(const std::string& path) {
  const gbpa::RegretReport r = gbpa::run_experiment(gbpa::load_config(path));
  print_summary(r);
  return 0;
}

int sweep_cmd(const std::string& path, const std::string& axis, const std::string& values) {
  const gbpa::ExperimentConfig cfg = gbpa::load_config(path);
  const gbpa::SweepTable t = gbpa::sweep(cfg, gbpa::parse_axis(axis), split_values(values));
  for (const auto& row : t.rows) {
    std::printf("%s=%s  ", axis.c_str(), row.value.c_str());
    print_summary(row.report);
  }
  if (t.loglog_slope) std::printf("log-log slope: %.4f\n", *t.loglog_slope);
  if (!cfg.output_path.empty()) {
    std::ofstream out(cfg.output_path + "_sweep.json");
    out << gbpa::sweep_to_json(t).dump(2) << '\n';
  }
  return 0;
}

int verify_cmd(std::optional<double> inject, bool as_json) {
  gbpa::VerifyOptions o;
  o.tsallis_tolerance = inject;
  const gbpa::VerifyReport r = gbpa::verify_suite(o);
  if (as_json) {
    std::cout << gbpa::verify_to_json(r).dump(2) << '\n';
  } else {
    for (const auto& c : r.checks) {
      std::printf("[%s] %s: %s\n", gbpa::status_name(c.status).c_str(), c.name.c_str(),
                  c.detail.c_str());
    }
    std::printf("%s\n", r.all_passed() ? "all checks passed" : "some checks FAILED");
  }
  return r.all_passed() ? 0 : 1;
}

int tabulate_cmd(const std::vector<std::size_t>& ns, std::size_t samples, bool as_json) {
  const auto rows = gbpa::tabulate_distributions(gbpa::default_table_models(), ns,
                                                 samples, 0x7ab1e);
  if (as_json) {
    std::cout << gbpa::table_to_json(rows).dump(2) << '\n';
    return 0;
  }
  std::printf("%-28s %5s %12s %-11s %12s %4s %14s %-12s %20s %4s\n", "distribution", "N",
              "sup h", "kind", "numeric", "ok", "E[max]", "kind", "MC +- SE", "ok");
  for (const auto& r : rows) {
    std::printf("%-28s %5zu %12.6g %-11s %12.6g %4s %14.6g %-12s %11.5g +- %-7.2g %4s\n",
                r.model.name().c_str(), r.n, r.analytic_sup, r.analytic_sup_label.c_str(),
                r.numeric_sup, r.probe_only ? "-" : (r.sup_ok ? "yes" : "NO"),
                r.formula.value, gbpa::kind_name(r.formula.kind).c_str(), r.mc.value,
                r.mc.std_error, r.expected_max_ok ? "yes" : "NO");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-based prediction algorithm experiments"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("--config", config, "JSON config")->required();

  std::string axis;
  std::string values;
  auto* sw = app.add_subcommand("sweep", "Sweep one config parameter");
  sw->add_option("--config", config, "JSON config")->required();
  sw->add_option("--axis", axis, "N, T, alpha, eta or distribution")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();

  bool as_json = false;
  std::optional<double> inject;
  auto* ver = app.add_subcommand("verify", "Run the self-check battery");
  ver->add_flag("--json", as_json, "Machine-readable output");
  ver->add_option("--inject-tsallis-tol", inject, "Fault injection")->group("");

  std::vector<std::size_t> ns{10, 100};
  std::size_t samples = 100000;
  auto* tab = app.add_subcommand("tabulate-distributions", "Perturbation distribution table");
  tab->add_option("--N", ns, "Arm counts")->delimiter(',');
  tab->add_option("--samples", samples, "Monte Carlo samples");
  tab->add_flag("--json", as_json, "Machine-readable output");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_cmd(config);
    if (*sw) return sweep_cmd(config, axis, values);
    if (*ver) return verify_cmd(inject, as_json);
    if (*tab) return tabulate_cmd(ns, samples, as_json);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
