#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "subdiff/harness.hpp"

using namespace subdiff;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.experiment_id = "tiny";
  cfg.domain_spec = {{"kind", "interval"}, {"lengths", {10.0 * M_PI}}, {"m_trunc", 128}};
  cfg.bernstein_spec = {{"kind", "drift"}, {"a", 1.0}};
  cfg.nu_spec = {{"kind", "qsd"}};
  cfg.t_grid = {10.0, 20.0};
  cfg.t_multipliers = {1.0, 1.5};
  cfg.dt = 0.5;
  cfg.n_paths = 200;
  cfg.mode = ConditioningMode::doob_is;
  cfg.ot_method = TransportMethod::quantile;
  cfg.m_psi = 2;
  cfg.seed = 555;
  cfg.out_dir = "/tmp";
  return cfg;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config JSON round trip is bit-exact") {
  auto cfg = small_config();
  cfg.dt = 0.1 + 1e-17;  // awkward double survives the trip
  const auto j1 = cfg.to_json();
  const auto back = ExperimentConfig::from_json(j1);
  CHECK(back.to_json().dump() == j1.dump());
  CHECK(back.dt == cfg.dt);
  CHECK(back.simulation_hash() == cfg.simulation_hash());
}

TEST_CASE("config validation rejects bad inputs before simulation") {
  auto cfg = small_config();
  cfg.n_paths = 0;
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  cfg = small_config();
  cfg.t_grid = {10.0, 10.0};
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  cfg = small_config();
  cfg.t_grid = {10.3};  // not a multiple of dt
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
  cfg = small_config();
  cfg.ot_method = TransportMethod::sinkhorn;  // d=1 mismatch
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("hash stability and sensitivity") {
  const auto a = small_config();
  auto b = small_config();
  CHECK(a.simulation_hash() == b.simulation_hash());
  b.seed = 556;
  CHECK(a.simulation_hash() != b.simulation_hash());
}

TEST_CASE("two runs with one seed produce identical CSV bytes") {
  const auto cfg = small_config();
  const auto r1 = run_experiment(cfg);
  const auto r2 = run_experiment(cfg);
  write_rows_csv("/tmp/subdiff_h1.csv", r1.rows);
  write_rows_csv("/tmp/subdiff_h2.csv", r2.rows);
  CHECK(file_bytes("/tmp/subdiff_h1.csv") == file_bytes("/tmp/subdiff_h2.csv"));
  CHECK_FALSE(file_bytes("/tmp/subdiff_h1.csv").empty());
  // thread count changes scheduling, not results
  auto cfg4 = cfg;
  cfg4.n_threads = 4;
  const auto r3 = run_experiment(cfg4);
  write_rows_csv("/tmp/subdiff_h3.csv", r3.rows);
  CHECK(file_bytes("/tmp/subdiff_h1.csv") == file_bytes("/tmp/subdiff_h3.csv"));
}

TEST_CASE("csv round trip preserves rows") {
  const auto cfg = small_config();
  const auto res = run_experiment(cfg);
  write_rows_csv("/tmp/subdiff_h4.csv", res.rows);
  const auto back = read_rows_csv("/tmp/subdiff_h4.csv");
  REQUIRE(back.size() == res.rows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].t == res.rows[i].t);
    CHECK(back[i].value == res.rows[i].value);
    CHECK(back[i].stderr_ == res.rows[i].stderr_);
  }
}

TEST_CASE("doubling n_paths shrinks stderr by roughly sqrt(2)") {
  auto cfg = small_config();
  cfg.t_grid = {20.0};
  cfg.t_multipliers = {1.0};
  cfg.n_paths = 400;
  const double se1 = run_experiment(cfg).rows[0].stderr_;
  cfg.n_paths = 800;
  cfg.seed = 556;
  const double se2 = run_experiment(cfg).rows[0].stderr_;
  const double ratio = se2 / se1;
  INFO("se1=", se1, " se2=", se2, " ratio=", ratio);
  CHECK(ratio > 0.707 * 0.75);
  CHECK(ratio < 0.707 * 1.35);
}

TEST_CASE("path cache: second run resumes bit-identically") {
  auto cfg = small_config();
  cfg.cache_paths = true;
  cfg.experiment_id = "cached";
  cfg.seed = 987;
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(cfg.simulation_hash()));
  const std::string cache_file = cfg.out_dir + "/paths_" + std::string(hex) + ".bin";
  std::remove(cache_file.c_str());

  const auto r1 = run_experiment(cfg);
  CHECK_FALSE(r1.from_cache);
  const auto r2 = run_experiment(cfg);
  CHECK(r2.from_cache);
  write_rows_csv("/tmp/subdiff_c1.csv", r1.rows);
  write_rows_csv("/tmp/subdiff_c2.csv", r2.rows);
  CHECK(file_bytes("/tmp/subdiff_c1.csv") == file_bytes("/tmp/subdiff_c2.csv"));
  std::remove(cache_file.c_str());
}

TEST_CASE("infeasible rejection configuration is caught up front") {
  auto cfg = small_config();
  cfg.mode = ConditioningMode::rejection;
  cfg.domain_spec = {{"kind", "interval"}, {"lengths", {M_PI}}, {"m_trunc", 128}};
  cfg.t_grid = {20.0};  // survival ~ e^{-20}
  cfg.t_multipliers = {1.0};
  CHECK_THROWS_AS(run_experiment(cfg), InfeasibleError);
}

TEST_CASE("rate_fit: synthetic oracle recoveries") {
  const auto rows_for = [](const std::function<double(double)>& f,
                           double noise_seed) {
    Rng rng(static_cast<std::uint64_t>(noise_seed));
    std::vector<ResultRow> rows;
    for (double t : {10.0, 20.0, 40.0, 80.0, 160.0, 320.0}) {
      ResultRow r;
      r.t = t;
      r.T = t;
      const double v = f(t);
      r.value = v * (1.0 + 0.01 * rng.normal());
      r.stderr_ = 0.01 * v;
      r.t_times_value = t * r.value;
      rows.push_back(r);
    }
    return rows;
  };

  SUBCASE("C/t with 1% noise recovers slope -1") {
    const auto fit = rate_fit(
        rows_for([](double t) { return 3.0 / t; }, 5.0), "value", 0.0, -1.0);
    CHECK(std::abs(fit.slope + 1.0) < 0.02);
    CHECK(fit.verdict == "consistent");
  }
  SUBCASE("C t^{-0.909} recovered within two stderr") {
    const auto fit = rate_fit(
        rows_for([](double t) { return 2.0 * std::pow(t, -0.909); }, 6.0),
        "value", 0.0, -0.909);
    CHECK(std::abs(fit.slope + 0.909) < 2.0 * fit.slope_stderr + 0.02);
    CHECK(fit.verdict == "consistent");
  }
  SUBCASE("constant column is inconsistent with exponent -1") {
    const auto fit = rate_fit(
        rows_for([](double) { return 0.7; }, 7.0), "value", 0.0, -1.0);
    CHECK(std::abs(fit.slope) < 0.05);
    CHECK(fit.verdict == "inconsistent");
  }
  SUBCASE("insufficient points raise") {
    auto rows = rows_for([](double t) { return 1.0 / t; }, 8.0);
    rows.resize(3);
    CHECK_THROWS_AS(rate_fit(rows, "value", 0.0, -1.0), ConfigError);
  }
}

TEST_CASE("report JSON carries per-check status") {
  std::vector<CheckResult> checks(2);
  checks[0].name = "a";
  checks[0].passed = true;
  checks[1].name = "b";
  checks[1].passed = false;
  const auto j = report_to_json("unit", checks);
  CHECK(j.at("passed") == false);
  CHECK(j.at("checks").size() == 2);
}
