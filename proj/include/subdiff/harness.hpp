#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subdiff/analysis.hpp"
#include "subdiff/pathsim.hpp"
#include "subdiff/transport.hpp"

#include <json.hpp>

namespace subdiff {

/// Full experiment description; round-trips through JSON bit-exactly.
struct ExperimentConfig {
  std::string experiment_id = "exp";
  nlohmann::json domain_spec;     // {"kind","lengths","m_trunc"}
  nlohmann::json bernstein_spec;  // {"kind",...}
  nlohmann::json nu_spec;         // {"kind":"qsd"|"ground_biased"|"point","x":[..]}
  std::vector<double> t_grid;
  std::vector<double> t_multipliers{1.0};  // T = multiplier * t
  double dt = 0.25;
  std::size_t n_paths = 1000;
  ConditioningMode mode = ConditioningMode::doob_is;
  StepBackend backend = StepBackend::automatic;
  TransportMethod ot_method = TransportMethod::quantile;
  double ot_q = 2.0;
  std::size_t n_ref = 2048;
  double sinkhorn_epsilon = 0.0;  // 0 = auto (0.01 * mean NN cost)
  double sinkhorn_marginal_tol = 1e-8;
  int sinkhorn_max_iter = 2000;
  int m_psi = 8;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int n_threads = 1;
  bool cache_paths = false;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Stable content hash of the simulation-relevant fields (cache key).
  std::uint64_t simulation_hash() const;
  void validate() const;

  Domain make_domain() const { return Domain::from_json(domain_spec); }
  BernsteinFn make_bernstein() const {
    return BernsteinFn::from_json(bernstein_spec);
  }
  NuSpec make_nu() const;
};

struct ResultRow {
  std::string experiment_id;
  double t = 0.0;
  double T = 0.0;
  std::string estimator_mode;
  std::size_t n_paths = 0;
  double n_effective = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;
  double t_times_value = 0.0;
  std::string ot_method;
  std::uint64_t seed = 0;
};

struct AuxRow {
  std::string experiment_id;
  double t = 0.0;
  double T = 0.0;
  std::string name;
  double value = 0.0;
  double stderr_ = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<AuxRow> aux;
  int worker_count = 1;
  bool from_cache = false;
};

/// Parallel Monte-Carlo sweep over the t-grid: one shared path set simulated
/// to the largest horizon, truncated per (t, T) row.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_rows_csv(const std::string& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_rows_csv(const std::string& path);
void write_aux_csv(const std::string& path, const std::vector<AuxRow>& aux);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  std::size_t points_used = 0;
  double predicted_exponent = 0.0;
  std::string verdict;  // consistent | inconsistent | inconclusive
};

/// Weighted log-log regression of a result column against t.
/// column: "value" or "t_times_value".
RateFit rate_fit(const std::vector<ResultRow>& rows, const std::string& column,
                 double t_min, double predicted_exponent);

// ---------------------------------------------------------------------------
// Validation / acceptance registry.
// ---------------------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

struct CheckOptions {
  int n_threads = 1;
  std::string out_dir = ".";
  bool include_slow = true;  // criterion 4 carries a multi-hour budget
};

/// Fast oracle-equivalence suite (< 5 minutes)
std::vector<CheckResult> validate_fast(const CheckOptions& opts);
/// Full suite: fast checks plus the Monte-Carlo acceptance criteria.
std::vector<CheckResult> validate_full(const CheckOptions& opts);
/// One acceptance criterion (1..8); several criteria share cached runs.
std::vector<CheckResult> run_acceptance_criterion(int index,
                                                  const CheckOptions& opts);

nlohmann::json report_to_json(const std::string& suite,
                              const std::vector<CheckResult>& checks);

}  // namespace subdiff
