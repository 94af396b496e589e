#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "subdiff/common.hpp"
#include "subdiff/domain.hpp"

namespace subdiff {

/// A finitely supported probability measure on a model domain.
struct DiscreteMeasure {
  int dim = 1;
  std::vector<Point> atoms;
  std::vector<double> weights;

  static DiscreteMeasure make(int dim, std::vector<Point> atoms,
                              std::vector<double> weights);
  /// Equal-weight atoms.
  static DiscreteMeasure uniform(int dim, std::vector<Point> atoms);
};

double euclidean_distance(const Point& a, const Point& b, int dim);

enum class TransportMethod { quantile, exact_lp, sinkhorn };

struct TransportResult {
  double value = 0.0;  // W_q under the q v 1 outer-exponent convention
  double cost = 0.0;   // optimal (or entropic) integral of rho^q
  double q = 2.0;
  TransportMethod method = TransportMethod::exact_lp;
  int iterations = 0;
  double marginal_error = 0.0;  // sinkhorn
  double duality_gap = 0.0;     // exact LP certificate residual
  bool converged = true;
  double bias_estimate = 0.0;  // two-cloud reference bias (d >= 2 QSD targets)
};

/// Exact 1-d distance for convex cost (q >= 1) via the quantile coupling.
TransportResult w_exact_1d(const DiscreteMeasure& a, const DiscreteMeasure& b,
                           double q);

/// A continuous 1-d target measure with invertible CDF.
struct Continuous1d {
  std::function<double(double)> quantile;  // u in (0,1) -> y
  std::function<double(double)> density;   // Lebesgue density
};

/// Quantile-coupling distance against a continuous target; the per-cell
/// integrals are taken in state space against the density, split at the atom
/// where the cost kinks.
TransportResult w_exact_1d_vs_density(const DiscreteMeasure& a,
                                      const Continuous1d& target, double q);

/// Exact optimal transport between discrete measures by the transportation
/// simplex; any q > 0. Guarded at 512 atoms per side.
TransportResult ot_discrete_exact(const DiscreteMeasure& a,
                                  const DiscreteMeasure& b, double q);

struct SinkhornOptions {
  double epsilon = 1e-2;   // final regularization (cost units)
  int max_iter = 2000;     // per annealing stage
  double marginal_tol = 1e-8;
  bool debias = true;
  bool anneal = true;      // geometric schedule from 0.1 * cost scale
};

/// Debiased entropic OT S_eps(a,b) = OT_eps(a,b) - (OT_eps(a,a)+OT_eps(b,b))/2,
/// log-domain updates. Non-convergence is reported in the result, not thrown.
TransportResult ot_entropic(const DiscreteMeasure& a, const DiscreteMeasure& b,
                            double q, const SinkhornOptions& opts);

/// OT_eps(a,a) by the symmetric fixed point; the self-term of the debiased
/// divergence, exposed so sweeps can cache the reference-cloud term.
double entropic_self_cost(const DiscreteMeasure& a, double q,
                          const SinkhornOptions& opts);

struct QsdDistanceOptions {
  TransportMethod method = TransportMethod::quantile;
  double q = 2.0;
  std::size_t n_ref = 2048;     // reference-cloud size for sample-based methods
  std::uint64_t seed = 1;       // reference-cloud seed
  SinkhornOptions sinkhorn;
  bool sinkhorn_auto_epsilon = true;  // 0.01 * mean nearest-neighbor cost
};

/// Distance from an empirical measure to mu_0 = phi_0^2 mu. In d = 1 the
/// target enters through its exact CDF; in d >= 2 through an i.i.d. reference
/// cloud with a second independent cloud estimating the bias.
TransportResult w_to_qsd(const DiscreteMeasure& empirical, const Domain& domain,
                         const QsdDistanceOptions& opts);

/// Deterministic quantile discretization of mu_0 with n atoms (d = 1).
DiscreteMeasure qsd_quantile_grid(const Domain& domain, std::size_t n);

/// Rigorous lower bound on W_p(empirical, mu_0) for p in (0,1]: the integral
/// of the nearest-atom cost min_i rho(x, a_i)^p against mu_0 (d = 1).
/// Every admissible coupling transports each target point somewhere in the
/// atom set, so the optimal cost dominates this quadrature value.
double matching_lower_bound(const DiscreteMeasure& empirical,
                            const Domain& domain, double p);

void write_measure_csv(const std::string& path, const DiscreteMeasure& m);
DiscreteMeasure read_measure_csv(const std::string& path);

}  // namespace subdiff
