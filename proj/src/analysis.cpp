#include "subdiff/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "subdiff/quadrature.hpp"

namespace subdiff {

double log_mean(double a, double b) {
  if (a < 0.0 || b < 0.0) throw ConfigError("log_mean: negative input");
  if (a == b) return a;  // continuous extension
  if (a == 0.0 || b == 0.0) return 0.0;
  return (a - b) / (std::log(a) - std::log(b));
}

namespace {

// Whether the unsmoothed series diverges. Catalog members admit an exact
// answer: power growth through the declared exponent, and the closed-form
// rules for the bounded and logarithmic members.
bool series_diverges(const Domain& domain, const BernsteinFn& fn) {
  const double d = static_cast<double>(domain.dim());
  switch (fn.kind()) {
    case BernsteinKind::gamma:
    case BernsteinKind::remark_example:
      // B grows slower than any positive power: terms ~ gap^{-1} (log factor
      // for gamma), so the series converges only in d = 1.
      return domain.dim() >= 2;
    default:
      break;
  }
  const auto alpha = fn.alpha_hint();
  if (!alpha)
    throw ConfigError("limit_constant: divergence test needs alpha metadata");
  return 2.0 * (1.0 + *alpha) / d <= 1.0 + 1e-12;
}

double series_term(const Domain& domain, const BernsteinFn& fn, int m,
                   double r) {
  const double gap = domain.spectral_gap(m);
  const double bgap = fn(domain.eigenvalue(m)) - fn(domain.lambda0());
  return 2.0 * std::exp(-2.0 * gap * r) / (gap * bgap);
}

// Integral tail bound over modes m > M using the fitted two-sided growth
// gap(m) in [c_lo, c_hi] * m^{2/d} and monotonicity of B.
struct TailEstimate {
  double mid = 0.0;
  double half_width = 0.0;
};

TailEstimate tail_integral(const Domain& domain, const BernsteinFn& fn,
                           double r) {
  const int m_max = domain.m_trunc();
  const double d = static_cast<double>(domain.dim());
  double c_lo = std::numeric_limits<double>::infinity(), c_hi = 0.0;
  for (int m = std::max(1, m_max / 2); m <= m_max; ++m) {
    const double ratio = domain.spectral_gap(m) /
                         std::pow(static_cast<double>(m), 2.0 / d);
    c_lo = std::min(c_lo, ratio);
    c_hi = std::max(c_hi, ratio);
  }
  const double lambda0 = domain.lambda0();
  const auto tail_for = [&](double c) {
    GaussLegendre gl(32, 0.0, 1.0);
    double total = 0.0;
    double lo = static_cast<double>(m_max);
    for (int panel = 0; panel < 200; ++panel) {
      const double hi = lo * 2.0;
      double inc = 0.0;
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double s = lo + (hi - lo) * gl.nodes[i];
        const double gap = c * std::pow(s, 2.0 / d);
        const double bgap = fn(lambda0 + gap) - fn(lambda0);
        inc += gl.weights[i] * (hi - lo) * 2.0 * std::exp(-2.0 * gap * r) /
               (gap * bgap);
      }
      total += inc;
      if (inc < 1e-14 * std::max(total, 1e-300)) break;
      lo = hi;
    }
    return total;
  };
  const double hi = tail_for(c_lo);  // smaller gaps, larger terms
  const double lo = tail_for(c_hi);
  TailEstimate t;
  t.mid = 0.5 * (hi + lo);
  t.half_width = 0.5 * (hi - lo);
  return t;
}

}  // namespace

SeriesValue limit_constant(const Domain& domain, const BernsteinFn& fn,
                           double tol) {
  if (!(tol > 0.0)) throw ConfigError("limit_constant: tol must be > 0");
  SeriesValue out;
  if (series_diverges(domain, fn)) {
    out.diverges = true;
    return out;
  }
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(domain.m_trunc()));
  for (int m = 1; m <= domain.m_trunc(); ++m)
    terms.push_back(series_term(domain, fn, m, 0.0));
  const double partial = pairwise_sum(terms);
  const TailEstimate tail = tail_integral(domain, fn, 0.0);
  out.value = partial + tail.mid;
  out.tail_bound = tail.half_width + 1e-3 * tail.mid;
  out.m_used = domain.m_trunc();
  if (out.tail_bound > tol * std::abs(out.value))
    throw ConfigError(
        "limit_constant: truncation cannot certify the requested tolerance; "
        "increase m_trunc");
  return out;
}

double smoothed_constant(const Domain& domain, const BernsteinFn& fn,
                         double r) {
  const bool divergent_base = series_diverges(domain, fn);
  if (divergent_base && !(r > 0.0))
    throw ConfigError("smoothed_constant: r > 0 required for divergent base series");
  if (r < 0.0) throw ConfigError("smoothed_constant: r must be >= 0");
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(domain.m_trunc()));
  for (int m = 1; m <= domain.m_trunc(); ++m)
    terms.push_back(series_term(domain, fn, m, r));
  const TailEstimate tail = tail_integral(domain, fn, r);
  return pairwise_sum(terms) + tail.mid;
}

double mode_variance_target(const Domain& domain, const BernsteinFn& fn,
                            int m) {
  if (m < 1) throw ConfigError("mode_variance_target: m must be >= 1");
  return 2.0 / (fn(domain.eigenvalue(m)) - fn(domain.lambda0()));
}

namespace {

std::vector<Point> interior_grid(const Domain& domain, std::size_t n) {
  std::vector<Point> pts(n);
  const int d = domain.dim();
  if (d == 1) {
    for (std::size_t i = 0; i < n; ++i)
      pts[i] = Point{(static_cast<double>(i) + 0.5) / static_cast<double>(n) *
                         domain.lengths()[0],
                     0, 0, 0};
    return pts;
  }
  // Kronecker lattice on the box; deterministic, uniform w.r.t. mu.
  static const double gammas[kMaxDim] = {0.41421356237309515, 0.7320508075688772,
                                         0.23606797749978969, 0.6457513110645906};
  for (std::size_t i = 0; i < n; ++i) {
    Point p{0, 0, 0, 0};
    for (int j = 0; j < d; ++j) {
      double f = (static_cast<double>(i) + 0.5) * gammas[j];
      f -= std::floor(f);
      p[j] = f * domain.lengths()[static_cast<std::size_t>(j)];
    }
    pts[i] = p;
  }
  return pts;
}

}  // namespace

SpectralFunctionals functionals_from_psi(const Domain& domain,
                                         const BernsteinFn& fn,
                                         std::span<const double> psi,
                                         double r) {
  if (psi.size() > static_cast<std::size_t>(domain.m_trunc()))
    throw ConfigError("functionals_from_psi: psi longer than mode table");
  if (r < 0.0) throw ConfigError("functionals_from_psi: r must be >= 0");
  (void)fn;  // smoothing acts through the base (unsubordinated) Doob semigroup

  SpectralFunctionals out;
  out.psi.assign(psi.begin(), psi.end());
  out.smoothing_r = r;

  const int mpsi = static_cast<int>(psi.size());
  std::vector<double> damp(psi.size());
  for (int m = 1; m <= mpsi; ++m) {
    const double gap = domain.spectral_gap(m);
    const double e = std::exp(-gap * r);
    damp[static_cast<std::size_t>(m - 1)] = e;
    const double w = psi[static_cast<std::size_t>(m - 1)] * e;
    out.gradient_seminorm += w * w / gap;
    out.inverse_norm += w * w / (gap * gap);
  }

  constexpr std::size_t kGrid = 2048;
  out.grid_points = interior_grid(domain, kGrid);
  out.rho_grid.resize(kGrid);
  out.grad_sq_grid.resize(kGrid);
  out.mu0_weights.resize(kGrid);
  out.min_density = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kGrid; ++i) {
    const Point& x = out.grid_points[i];
    const double phi0 = domain.ground(x);
    out.mu0_weights[i] = phi0 * phi0;
    double rho = 1.0;
    Point grad{0, 0, 0, 0};
    for (int m = 1; m <= mpsi; ++m) {
      const double coef =
          psi[static_cast<std::size_t>(m - 1)] * damp[static_cast<std::size_t>(m - 1)];
      rho += coef * domain.mode_over_ground(m, x);
      const double inv_gap = 1.0 / domain.spectral_gap(m);
      const Point g = domain.mode_over_ground_grad(m, x);
      for (int j = 0; j < domain.dim(); ++j) grad[j] += coef * inv_gap * g[j];
    }
    out.rho_grid[i] = rho;
    double gsq = 0.0;
    for (int j = 0; j < domain.dim(); ++j) gsq += grad[j] * grad[j];
    out.grad_sq_grid[i] = gsq;
    out.sup_density_deviation = std::max(out.sup_density_deviation,
                                         std::abs(rho - 1.0));
    out.min_density = std::min(out.min_density, rho);
  }
  return out;
}

W2Bounds w2_bounds(const SpectralFunctionals& f, double c_lower) {
  W2Bounds b;
  b.upper_plain = 4.0 * f.gradient_seminorm;
  if (f.min_density > 0.0 && !f.rho_grid.empty()) {
    // Quadrature of |grad (-L0)^{-1}(rho-1)|^2 / M(rho,1) d mu_0. Grid points
    // carry equal mu-mass, so the mu_0 element is phi_0^2 / N.
    double acc = 0.0;
    for (std::size_t i = 0; i < f.rho_grid.size(); ++i)
      acc += f.grad_sq_grid[i] / log_mean(f.rho_grid[i], 1.0) * f.mu0_weights[i];
    b.upper_weighted = acc / static_cast<double>(f.rho_grid.size());
  } else {
    b.upper_weighted = std::numeric_limits<double>::infinity();
  }
  b.upper = std::min(b.upper_weighted, b.upper_plain);
  const double s = f.sup_density_deviation;
  b.correction = c_lower * std::pow(s, 7.0 / 3.0) * (1.0 + std::cbrt(s));
  b.lower_printed = std::max(0.0, f.inverse_norm - b.correction);
  b.lower_gradient = std::max(0.0, f.gradient_seminorm - b.correction);
  return b;
}

double w2_upper_bound(const SpectralFunctionals& f) {
  if (f.min_density <= 0.0)
    throw ConfigError("w2_upper_bound: nonpositive density in the log-mean branch");
  return w2_bounds(f).upper;
}

double w2_lower_functional(const SpectralFunctionals& f, double c_lower) {
  return w2_bounds(f, c_lower).lower_printed;
}

RateClass rate_class(int d, double alpha, bool boundary_convex) {
  if (d < 1) throw ConfigError("rate_class: d must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("rate_class: alpha must lie in (0,1]");
  const double crit = 2.0 * (1.0 + alpha);
  RateClass rc;
  if (std::abs(d - crit) < 1e-12) {
    rc.kind = RateKind::log_case;
    rc.exponent = -1.0;  // envelope t^{-1} log t
    rc.constant_available = false;
  } else if (d < crit) {
    rc.kind = RateKind::exponent;
    rc.exponent = -1.0;
    rc.constant_available =
        boundary_convex && alpha > 0.5 && d < 6.0 * alpha - 2.0;
  } else {
    rc.kind = RateKind::exponent;
    rc.exponent = -2.0 / (d - 2.0 * alpha);
    rc.constant_available = false;
  }
  return rc;
}

}  // namespace subdiff
