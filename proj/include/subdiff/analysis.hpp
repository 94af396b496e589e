#pragma once

#include <optional>
#include <span>
#include <vector>

#include "subdiff/bernstein.hpp"
#include "subdiff/domain.hpp"

namespace subdiff {

/// Logarithmic mean (a-b)/(log a - log b), continuously extended to a at a=b>0,
/// 0 when either argument vanishes in the a != b branch.
double log_mean(double a, double b);

struct SeriesValue {
  bool diverges = false;
  double value = 0.0;
  double tail_bound = 0.0;
  int m_used = 0;
};

/// sum_{m>=1} 2 / [ (lambda_m-lambda_0) (B(lambda_m)-B(lambda_0)) ],
/// partial sum plus an integral tail bound from the two-sided eigenvalue
/// growth; reports DIVERGES when 2(1+alpha)/d <= 1 for the declared alpha.
SeriesValue limit_constant(const Domain& domain, const BernsteinFn& fn,
                           double tol);

/// Smoothed series with factor e^{-2 (lambda_m - lambda_0) r}; finite for any
/// r > 0. Requires r > 0 whenever the unsmoothed series diverges.
double smoothed_constant(const Domain& domain, const BernsteinFn& fn, double r);

/// 2 / (B(lambda_m) - B(lambda_0)): the large-t limit of
/// t E[ psi_m(t)^2 | survival ], per mode.
double mode_variance_target(const Domain& domain, const BernsteinFn& fn, int m);

struct SpectralFunctionals {
  std::vector<double> psi;  // psi_1..psi_M
  double smoothing_r = 0.0;
  double gradient_seminorm = 0.0;  // sum psi_m^2 e^{-2 gap r} / gap
  double inverse_norm = 0.0;       // sum psi_m^2 e^{-2 gap r} / gap^2
  double sup_density_deviation = 0.0;  // || rho_{t,r} - 1 ||_inf on a grid
  double min_density = 0.0;            // min of rho_{t,r} on the grid
  std::vector<double> rho_grid;        // rho_{t,r} on the evaluation grid
  std::vector<Point> grid_points;      // uniform w.r.t. mu
  std::vector<double> grad_sq_grid;  // |grad (-L0)^{-1}(rho-1)|^2 on the grid
  std::vector<double> mu0_weights;   // phi_0^2 at the grid points
};

/// Spectral functionals of a psi vector at smoothing r: gradient seminorm,
/// inverse-operator norm, and the smoothed density rho_{t,r} (with sup-norm
/// deviation) on a 2048-point interior grid.
SpectralFunctionals functionals_from_psi(const Domain& domain,
                                         const BernsteinFn& fn,
                                         std::span<const double> psi, double r);

struct W2Bounds {
  double upper = 0.0;           // min(weighted quadrature, 4 * seminorm)
  double upper_weighted = 0.0;  // log-mean weighted quadrature bound
  double upper_plain = 0.0;     // 4 * gradient seminorm
  double lower_printed = 0.0;   // inverse-norm reading, corrected and floored
  double lower_gradient = 0.0;  // gradient-seminorm reading, same correction
  double correction = 0.0;      // c ||rho-1||^{7/3} (1 + ||rho-1||^{1/3})
};

/// Upper and lower W2^2 functionals computed from spectral functionals.
/// `c_lower` scales the sup-norm correction of the lower bound (default 1).
W2Bounds w2_bounds(const SpectralFunctionals& f, double c_lower = 1.0);

double w2_upper_bound(const SpectralFunctionals& f);
/// Both readings of the lower functional are exposed on W2Bounds; this
/// returns the inverse-norm reading as printed.
double w2_lower_functional(const SpectralFunctionals& f, double c_lower = 1.0);

enum class RateKind { exponent, log_case };

struct RateClass {
  RateKind kind = RateKind::exponent;
  double exponent = -1.0;  // decay exponent of E[W2^2 | survival]
  bool constant_available = false;
};

/// Decay class of E[W2(mu_t, mu_0)^2 | survival] for growth exponent alpha in
/// (0,1] and dimension d; the critical case d = 2(1+alpha) only carries the
/// t^{-1} log t upper envelope.
RateClass rate_class(int d, double alpha, bool boundary_convex);

}  // namespace subdiff
