// subdiff: spectral simulation lab for subordinated killed diffusions.
//
// Subcommands: spectrum | classify | constant | simulate | estimate |
// ratefit | validate. Exit codes: 0 ok, 1 config error, 2 infeasible,
// 3 check failure (validate only).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "subdiff/harness.hpp"

using namespace subdiff;

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed,
                           std::uint64_t fallback) {
  if (cli_seed) return *cli_seed;
  if (const char* env = std::getenv("SUBDIFF_SEED")) return std::stoull(env);
  return fallback;
}

int run(int argc, char** argv) {
  CLI::App app{"subdiff: empirical-measure convergence lab for subordinated "
               "killed diffusions"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", csv_path, column = "value";
  std::string suite = "fast";
  std::optional<std::uint64_t> seed;
  int threads = 1, m_max = 64, criterion = 0, blackboard_d = 2;
  double alpha = 1.0, tol = 1e-6, t_min = 0.0, predicted = -1.0;
  bool skip_slow = false;

  const auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "JSON config file");
    if (needs_config) opt->required();
    cmd->add_option("--seed", seed, "seed override (env SUBDIFF_SEED fallback)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--threads", threads, "worker threads");
  };

  auto* spectrum = app.add_subcommand("spectrum", "Dirichlet eigenvalues and growth diagnostics");
  add_common(spectrum, true);
  spectrum->add_option("--m-max", m_max, "modes to report");

  auto* classify_cmd = app.add_subcommand("classify", "Bernstein growth classification");
  add_common(classify_cmd, true);
  classify_cmd->add_option("--alpha", alpha, "exponent to classify against")->required();
  classify_cmd->add_option("--d", blackboard_d, "dimension for the integral class");

  auto* constant = app.add_subcommand("constant", "limit constant of the t E[W2^2] series");
  add_common(constant, true);
  constant->add_option("--tol", tol, "relative tail tolerance");

  auto* simulate = app.add_subcommand("simulate", "simulate paths into the cache");
  add_common(simulate, true);

  auto* estimate = app.add_subcommand("estimate", "run the Monte-Carlo sweep");
  add_common(estimate, true);

  auto* ratefit = app.add_subcommand("ratefit", "log-log rate regression on a result CSV");
  ratefit->add_option("--csv", csv_path, "result CSV")->required();
  ratefit->add_option("--column", column, "value | t_times_value");
  ratefit->add_option("--tmin", t_min, "smallest t used");
  ratefit->add_option("--predicted", predicted, "predicted exponent")->required();

  auto* validate = app.add_subcommand("validate", "run a verification suite");
  add_common(validate, false);
  validate->add_option("--suite", suite, "fast | full")->required();
  validate->add_flag("--skip-slow", skip_slow, "skip the multi-hour criterion");
  validate->add_option("--criterion", criterion, "run one acceptance criterion (1..8)");

  CLI11_PARSE(app, argc, argv);

  if (spectrum->parsed()) {
    const auto cfg = load_json(config_path);
    const auto dom = Domain::from_json(cfg.at("domain"));
    const int mm = std::min(m_max, dom.m_trunc());
    nlohmann::json out;
    out["lambda0"] = dom.lambda0();
    out["diameter"] = dom.diameter();
    out["alpha0"] = weyl_check(dom, mm);
    nlohmann::json evs = nlohmann::json::array();
    for (int m = 0; m <= mm; ++m) evs.push_back(dom.eigenvalue(m));
    out["eigenvalues"] = evs;
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  if (classify_cmd->parsed()) {
    const auto cfg = load_json(config_path);
    const auto fn = BernsteinFn::from_json(cfg.at("bernstein"));
    const auto c = classify(fn, alpha, 1e7, blackboard_d);
    std::cout << nlohmann::json{{"bernstein", fn.name()},
                                {"alpha", alpha},
                                {"in_upper_class", c.in_upper_class},
                                {"in_lower_class", c.in_lower_class},
                                {"in_blackboard_b", c.in_blackboard_b},
                                {"d_for_blackboard", c.d_for_blackboard},
                                {"uncertain", c.uncertain},
                                {"tail_loglog_slope", c.tail_loglog_slope}}
                     .dump(2)
              << "\n";
    return 0;
  }
  if (constant->parsed()) {
    const auto cfg = load_json(config_path);
    const auto dom = Domain::from_json(cfg.at("domain"));
    const auto fn = BernsteinFn::from_json(cfg.at("bernstein"));
    const auto res = limit_constant(dom, fn, tol);
    nlohmann::json out;
    if (res.diverges) {
      out["value"] = "DIVERGES";
    } else {
      out["value"] = res.value;
      out["tail_bound"] = res.tail_bound;
      out["m_used"] = res.m_used;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  if (simulate->parsed() || estimate->parsed()) {
    auto cfg = ExperimentConfig::from_json(load_json(config_path));
    cfg.seed = resolve_seed(seed, cfg.seed);
    if (out_dir != ".") cfg.out_dir = out_dir;
    if (threads > 1) cfg.n_threads = threads;
    if (simulate->parsed()) cfg.cache_paths = true;
    const auto result = run_experiment(cfg);
    const std::string res_csv =
        cfg.out_dir + "/results_" + cfg.experiment_id + ".csv";
    const std::string aux_csv =
        cfg.out_dir + "/aux_" + cfg.experiment_id + ".csv";
    write_rows_csv(res_csv, result.rows);
    write_aux_csv(aux_csv, result.aux);
    std::cout << nlohmann::json{{"rows", result.rows.size()},
                                {"aux_rows", result.aux.size()},
                                {"results_csv", res_csv},
                                {"aux_csv", aux_csv},
                                {"workers", result.worker_count},
                                {"from_cache", result.from_cache}}
                     .dump(2)
              << "\n";
    return 0;
  }
  if (ratefit->parsed()) {
    const auto rows = read_rows_csv(csv_path);
    const auto fit = rate_fit(rows, column, t_min, predicted);
    std::cout << nlohmann::json{{"slope", fit.slope},
                                {"intercept", fit.intercept},
                                {"slope_stderr", fit.slope_stderr},
                                {"r_squared", fit.r_squared},
                                {"points_used", fit.points_used},
                                {"predicted_exponent", fit.predicted_exponent},
                                {"verdict", fit.verdict}}
                     .dump(2)
              << "\n";
    return 0;
  }
  if (validate->parsed()) {
    CheckOptions opts;
    opts.n_threads = threads;
    opts.out_dir = out_dir;
    opts.include_slow = !skip_slow;
    std::vector<CheckResult> checks;
    std::string label = suite;
    if (criterion > 0) {
      checks = run_acceptance_criterion(criterion, opts);
      label = "criterion" + std::to_string(criterion);
    } else if (suite == "fast") {
      checks = validate_fast(opts);
    } else if (suite == "full") {
      checks = validate_full(opts);
    } else {
      throw ConfigError("unknown suite '" + suite + "'");
    }
    const auto report = report_to_json(label, checks);
    const std::string path = out_dir + "/validate_" + label + ".json";
    std::ofstream out(path);
    out << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    return report.at("passed").get<bool>() ? 0 : 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
