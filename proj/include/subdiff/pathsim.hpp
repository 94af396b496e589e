#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "subdiff/bernstein.hpp"
#include "subdiff/domain.hpp"
#include "subdiff/kernels.hpp"

namespace subdiff {

enum class ConditioningMode { rejection, doob_is };

enum class StepBackend { automatic, spectral, composition };

/// One trajectory of the skeleton chain at grid times 0, dt, 2dt, ... For
/// rejection mode the positions stop at the kill step; for doob_is mode paths
/// never die and carry the importance weight phi_0(X_0)/phi_0(X_T).
struct PathSkeleton {
  double dt = 0.0;
  std::vector<Point> positions;
  bool survived = true;
  std::optional<double> is_weight;
  std::string initial_law;
  std::uint64_t path_seed = 0;
};

/// Per-path time averages over [0,t): the atom list (left-endpoint rule,
/// weight dt/t each) and the mode functionals psi_m, m = 1..M_psi.
struct EmpiricalSummary {
  double t = 0.0;
  std::vector<Point> atoms;
  std::vector<double> psi;
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  double n_effective = 0.0;
  ConditioningMode mode = ConditioningMode::rejection;
  double acceptance_rate = 1.0;  // rejection only
  bool low_confidence = false;   // effective sample size < 30
};

struct SimulateOptions {
  double horizon = 1.0;  // T; must be a multiple of dt
  double dt = 0.1;
  std::size_t n_paths = 1;
  ConditioningMode mode = ConditioningMode::doob_is;
  std::uint64_t seed = 1;
  StepBackend backend = StepBackend::automatic;
  int n_threads = 1;
};

/// Stream simulated paths to a consumer. Path `index` always receives the
/// same content for a given seed: every path owns the generator stream
/// (seed, index), so results do not depend on threading. The consumer may be
/// invoked concurrently when n_threads > 1.
void simulate_paths(
    const Domain& domain, const BernsteinFn& fn, const NuSpec& nu,
    const SimulateOptions& opts,
    const std::function<void(std::size_t, const PathSkeleton&)>& consume);

std::vector<PathSkeleton> simulate_paths_collect(const Domain& domain,
                                                 const BernsteinFn& fn,
                                                 const NuSpec& nu,
                                                 const SimulateOptions& opts);

/// Time averages over [0,t): requires t <= simulated horizon and, in
/// rejection mode, survival past t.
EmpiricalSummary accumulate(const Domain& domain, const PathSkeleton& path,
                            double t, int m_psi);

/// Monte-Carlo estimate of E^nu[ F(summary) | T < sigma ] with T = horizon.
/// Rejection: mean over surviving paths. doob_is: self-normalized ratio with
/// delta-method standard error.
Estimate conditional_estimate(
    const std::function<double(const EmpiricalSummary&)>& functional,
    const Domain& domain, const BernsteinFn& fn, const NuSpec& nu, double t,
    const SimulateOptions& opts, int m_psi);

/// Cross-validation simulator (d = 1): fine-grid Brownian path with
/// Brownian-bridge boundary-crossing kill correction, composed with sampled
/// subordinator increments. Alternative construction of the same path law.
PathSkeleton composition_simulate(const Domain& domain, const BernsteinFn& fn,
                                  double x0, double horizon, double dt,
                                  std::uint64_t seed);

/// Importance-sampling survival estimate e^{-B(l0)T} E_Q[phi0(X_0)/phi0(X_T)]
/// from a set of doob paths (validation helper).
Estimate survival_from_doob_paths(const Domain& domain, const BernsteinFn& fn,
                                  const std::vector<PathSkeleton>& paths);

/// Self-normalized importance-sampling ratio E[w F]/E[w] with delta-method
/// standard error and Kish effective sample size.
Estimate weighted_ratio_estimate(const std::vector<double>& weights,
                                 const std::vector<double>& values);

}  // namespace subdiff
