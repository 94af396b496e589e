#include "subdiff/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "subdiff/quadrature.hpp"

namespace subdiff {

namespace {

constexpr double kRelTailLog = 27.631021115928547;  // ln(1e12)
constexpr double kEffTailLog = 36.841361487904734;  // ln(1e16)

// sin(n t), cos(n t) tables for n = 0..n_max via the rotation recurrence.
struct TrigTable {
  std::vector<double> s, c;
  void build(double theta, int n_max) {
    s.resize(static_cast<std::size_t>(n_max) + 1);
    c.resize(static_cast<std::size_t>(n_max) + 1);
    s[0] = 0.0;
    c[0] = 1.0;
    if (n_max == 0) return;
    const double s1 = std::sin(theta), c1 = std::cos(theta);
    s[1] = s1;
    c[1] = c1;
    for (int n = 2; n <= n_max; ++n) {
      s[static_cast<std::size_t>(n)] = s[static_cast<std::size_t>(n - 1)] * c1 +
                                       c[static_cast<std::size_t>(n - 1)] * s1;
      c[static_cast<std::size_t>(n)] = c[static_cast<std::size_t>(n - 1)] * c1 -
                                       s[static_cast<std::size_t>(n - 1)] * s1;
    }
  }
};

// Chebyshev U_{n-1}(cos t) = sin(n t)/sin(t) table, finite at the endpoints.
struct RatioTable {
  std::vector<double> u;
  void build(double theta, int n_max) {
    u.resize(static_cast<std::size_t>(n_max) + 1);
    const double c = std::cos(theta);
    u[0] = 0.0;  // unused slot (mode numbers are 1-based)
    if (n_max >= 1) u[1] = 1.0;
    if (n_max >= 2) u[2] = 2.0 * c;
    for (int n = 3; n <= n_max; ++n)
      u[static_cast<std::size_t>(n)] =
          2.0 * c * u[static_cast<std::size_t>(n - 1)] -
          u[static_cast<std::size_t>(n - 2)];
  }
};

double normal_cdf_local(double z) { return 0.5 * std::erfc(-z / M_SQRT2); }

}  // namespace

Point sample_initial(const NuSpec& nu, const Domain& domain, Rng& rng) {
  if (const auto* pm = std::get_if<NuPointMass>(&nu)) {
    if (!domain.interior(pm->x))
      throw ConfigError("initial law concentrated on the boundary");
    return pm->x;
  }
  if (std::holds_alternative<NuQsd>(nu)) {
    QsdMeasure q(domain);
    return q.sample(rng);
  }
  if (std::holds_alternative<NuGroundBiased>(nu)) {
    // per-axis density prop. to sin(pi x / L): quantile L/pi * acos(1 - 2u)
    Point p{0, 0, 0, 0};
    for (int j = 0; j < domain.dim(); ++j) {
      const double len = domain.lengths()[static_cast<std::size_t>(j)];
      p[j] = len / M_PI * std::acos(1.0 - 2.0 * rng.uniform());
    }
    return p;
  }
  const auto& dens = std::get<NuDensity>(nu);
  // rejection from mu with an adaptive envelope; exact for bounded h
  double envelope = 1.0;
  for (int probe = 0; probe < 512; ++probe) {
    Point p{0, 0, 0, 0};
    for (int j = 0; j < domain.dim(); ++j)
      p[j] = domain.lengths()[static_cast<std::size_t>(j)] *
             (probe + 0.5) / 512.0;
    envelope = std::max(envelope, dens.h(p));
  }
  envelope *= 1.5;
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    Point p{0, 0, 0, 0};
    for (int j = 0; j < domain.dim(); ++j)
      p[j] = rng.uniform() * domain.lengths()[static_cast<std::size_t>(j)];
    const double h = dens.h(p);
    if (h > envelope) {
      envelope = 2.0 * h;  // grow and keep going; early draws stay exact
      continue;
    }
    if (rng.uniform() * envelope < h) return p;
  }
  throw InfeasibleError("initial density sampler failed to accept");
}

KernelEval::KernelEval(const Domain& domain, KernelFamily family,
                       std::optional<BernsteinFn> fn)
    : domain_(&domain), family_(family), fn_(std::move(fn)),
      clamp_count_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (family_ == KernelFamily::subordinated && !fn_)
    throw ConfigError("subordinated kernel requires a Bernstein function");
  if (family_ != KernelFamily::subordinated && fn_)
    throw ConfigError("Bernstein function only applies to the subordinated family");
  const int count = domain.m_trunc() + 1;
  rates_.resize(static_cast<std::size_t>(count));
  mu_integrals_.resize(static_cast<std::size_t>(count));
  for (int m = 0; m < count; ++m) {
    const double lam = domain.eigenvalue(m);
    switch (family_) {
      case KernelFamily::dirichlet:
        rates_[static_cast<std::size_t>(m)] = lam;
        break;
      case KernelFamily::doob:
        rates_[static_cast<std::size_t>(m)] = lam - domain.lambda0();
        break;
      case KernelFamily::subordinated:
        rates_[static_cast<std::size_t>(m)] = (*fn_)(lam);
        break;
    }
    double mi = 1.0;
    const auto& n = domain.mode_numbers(m);
    for (int j = 0; j < domain.dim(); ++j)
      mi *= domain.axis_mode_integral(j, n[static_cast<std::size_t>(j)]);
    mu_integrals_[static_cast<std::size_t>(m)] = mi;
  }
}

KernelEval make_kernel(const Domain& domain, KernelFamily family,
                       std::optional<BernsteinFn> fn) {
  return KernelEval(domain, family, std::move(fn));
}

void KernelEval::require_truncation(double t) const {
  if (!(t > 0.0)) throw ConfigError("kernel: time must be positive");
  const double span = rates_.back() - rates_.front();
  if (span * t < kRelTailLog)
    throw TruncationError(
        "kernel: truncation insufficient at this horizon (tail above 1e-12 of "
        "the leading term)");
}

int KernelEval::effective_modes(double t) const {
  int hi = static_cast<int>(rates_.size()) - 1;
  while (hi > 0 && (rates_[static_cast<std::size_t>(hi)] - rates_[0]) * t >
                       kEffTailLog)
    --hi;
  return hi;
}

double KernelEval::kernel_value(double t, const Point& x,
                                const Point& y) const {
  require_truncation(t);
  if (!domain_->interior(x) || !domain_->interior(y))
    throw ConfigError("kernel: boundary point");
  const int m_eff = effective_modes(t);
  double acc = 0.0;
  if (family_ == KernelFamily::doob) {
    for (int m = 0; m <= m_eff; ++m)
      acc += std::exp(-rates_[static_cast<std::size_t>(m)] * t) *
             domain_->mode_over_ground(m, x) * domain_->mode_over_ground(m, y);
  } else {
    const double r0 = rates_[0];
    for (int m = 0; m <= m_eff; ++m)
      acc += std::exp(-(rates_[static_cast<std::size_t>(m)] - r0) * t) *
             domain_->eigenfunction(m, x) * domain_->eigenfunction(m, y);
    acc *= std::exp(-r0 * t);
  }
  if (acc < 0.0) {
    clamp_count_->fetch_add(1);
    acc = 0.0;
  }
  return acc;
}

double KernelEval::mu_mode_integral(int m) const {
  return mu_integrals_[static_cast<std::size_t>(m)];
}

double KernelEval::survival_mass(double t, const Point& x) const {
  if (family_ == KernelFamily::doob)
    throw ConfigError("survival_mass: the Doob chain is conservative");
  require_truncation(t);
  if (!domain_->interior(x)) throw ConfigError("kernel: boundary point");
  const int m_eff = effective_modes(t);
  const double r0 = rates_[0];
  double acc = 0.0;
  for (int m = 0; m <= m_eff; ++m)
    acc += std::exp(-(rates_[static_cast<std::size_t>(m)] - r0) * t) *
           mu_integrals_[static_cast<std::size_t>(m)] *
           domain_->eigenfunction(m, x);
  acc *= std::exp(-r0 * t);
  if (acc < 0.0 || acc > 1.0) {
    clamp_count_->fetch_add(1);
    acc = std::clamp(acc, 0.0, 1.0);
  }
  return acc;
}

namespace {

double qsd_axis_integral(int n) {
  // int_0^pi sin(n t) 2 sin^2 t dt * sqrt(2)/pi; zero for even n
  if (n % 2 == 0) return 0.0;
  const double nn = static_cast<double>(n);
  double val = 2.0 / nn - 1.0 / (nn + 2.0);
  val -= n == 1 ? -1.0 : 1.0 / (nn - 2.0);
  return val * M_SQRT2 / M_PI;
}

}  // namespace

double KernelEval::nu_mode_integral(const NuSpec& nu, int m) const {
  if (const auto* pm = std::get_if<NuPointMass>(&nu)) {
    if (!domain_->interior(pm->x))
      throw ConfigError("initial law concentrated on the boundary");
    return domain_->eigenfunction(m, pm->x);
  }
  if (std::holds_alternative<NuQsd>(nu)) {
    double acc = 1.0;
    const auto& n = domain_->mode_numbers(m);
    for (int j = 0; j < domain_->dim(); ++j)
      acc *= qsd_axis_integral(n[static_cast<std::size_t>(j)]);
    return acc;
  }
  if (std::holds_alternative<NuGroundBiased>(nu)) {
    // nu_0(phi_m) = mu(phi_0 phi_m)/mu(phi_0) = delta_{m,0}/mu(phi_0)
    return m == 0 ? 1.0 / mu_integrals_[0] : 0.0;
  }
  const auto& dens = std::get<NuDensity>(nu);
  if (domain_->dim() > 2)
    throw ConfigError("nu density quadrature supported for d <= 2");
  static const GaussLegendre gl(256, 0.0, 1.0);
  const auto& ls = domain_->lengths();
  double acc = 0.0;
  if (domain_->dim() == 1) {
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const Point p{gl.nodes[k] * ls[0], 0, 0, 0};
      acc += gl.weights[k] * dens.h(p) * domain_->eigenfunction(m, p);
    }
  } else {
    for (std::size_t k1 = 0; k1 < gl.nodes.size(); ++k1)
      for (std::size_t k2 = 0; k2 < gl.nodes.size(); ++k2) {
        const Point p{gl.nodes[k1] * ls[0], gl.nodes[k2] * ls[1], 0, 0};
        acc += gl.weights[k1] * gl.weights[k2] * dens.h(p) *
               domain_->eigenfunction(m, p);
      }
  }
  return acc;  // quadrature already w.r.t. mu (unit box scaling)
}

double KernelEval::survival_prob(const NuSpec& nu, double t) const {
  if (family_ == KernelFamily::doob)
    throw ConfigError("survival_prob: the Doob chain is conservative");
  require_truncation(t);
  const int m_eff = effective_modes(t);
  const double r0 = rates_[0];
  double acc = 0.0;
  for (int m = 0; m <= m_eff; ++m)
    acc += std::exp(-(rates_[static_cast<std::size_t>(m)] - r0) * t) *
           mu_integrals_[static_cast<std::size_t>(m)] * nu_mode_integral(nu, m);
  acc *= std::exp(-r0 * t);
  if (acc < 0.0 || acc > 1.0) {
    clamp_count_->fetch_add(1);
    acc = std::clamp(acc, 0.0, 1.0);
  }
  return acc;
}

double KernelEval::survival_asymptote(const NuSpec& nu) const {
  return mu_integrals_[0] * nu_mode_integral(nu, 0);
}

// ---------------------------------------------------------------------------
// Spectral step samplers.
// ---------------------------------------------------------------------------

namespace {

// Root solve of a monotone CDF on [0, L] by bisection-guarded Newton.
// cdf(y, &density) returns the CDF value and writes the density. `hint`
// seeds the iteration (the previous state is a good start for diffusive
// steps). Position tolerance 1e-11 L sits far below any statistical
// resolution of the samplers.
template <typename CdfFn>
double invert_cdf(const CdfFn& cdf, double target, double length,
                  double hint = -1.0) {
  double lo = 0.0, hi = length;
  double y = (hint > 0.0 && hint < length) ? hint : 0.5 * length;
  for (int it = 0; it < 128; ++it) {
    double dens = 0.0;
    const double f = cdf(y, &dens) - target;
    if (f > 0.0)
      hi = y;
    else
      lo = y;
    double next;
    if (dens > 1e-300) {
      next = y - f / dens;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    } else {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - y) < 1e-11 * length || hi - lo < 1e-11 * length)
      return next;
    y = next;
  }
  return y;
}

}  // namespace

StepSampler::StepSampler(const KernelEval& kernel, double dt)
    : kernel_(&kernel), dt_(dt) {
  if (kernel.family() == KernelFamily::doob)
    throw ConfigError("step_sample: the Doob chain needs doob_step_sample");
  kernel.require_truncation(dt);
  n_modes_ = kernel.effective_modes(dt) + 1;
  decay_.resize(static_cast<std::size_t>(n_modes_));
  for (int m = 0; m < n_modes_; ++m)
    decay_[static_cast<std::size_t>(m)] =
        std::exp(-(kernel.rate(m) - kernel.rate0()) * dt);
  mass_scale_ = std::exp(-kernel.rate0() * dt);
}

std::optional<Point> StepSampler::step(const Point& x, Rng& rng) const {
  const Domain& dom = kernel_->domain();
  if (!dom.interior(x)) throw ConfigError("step_sample: boundary point");
  const int d = dom.dim();

  // per-axis mode bound and sine tables at the current state
  std::array<int, kMaxDim> n_max{1, 1, 1, 1};
  for (int m = 0; m < n_modes_; ++m) {
    const auto& n = dom.mode_numbers(m);
    for (int j = 0; j < d; ++j)
      n_max[static_cast<std::size_t>(j)] =
          std::max(n_max[static_cast<std::size_t>(j)], n[static_cast<std::size_t>(j)]);
  }
  thread_local std::array<TrigTable, kMaxDim> trig;
  for (int j = 0; j < d; ++j)
    trig[static_cast<std::size_t>(j)].build(
        M_PI * x[j] / dom.lengths()[static_cast<std::size_t>(j)],
        n_max[static_cast<std::size_t>(j)]);

  // running per-mode weight: decay * phi_m(x), times phi(y_j) as axes resolve
  std::vector<double> w(static_cast<std::size_t>(n_modes_));
  const double sq2 = std::sqrt(2.0);
  for (int m = 0; m < n_modes_; ++m) {
    const auto& n = dom.mode_numbers(m);
    double v = decay_[static_cast<std::size_t>(m)];
    for (int j = 0; j < d; ++j)
      v *= sq2 *
           trig[static_cast<std::size_t>(j)].s[static_cast<std::size_t>(
               n[static_cast<std::size_t>(j)])];
    w[static_cast<std::size_t>(m)] = v;
  }

  // suffix products of the per-axis mu integrals
  // suffix[m] at axis a: prod_{j>a} axis_mode_integral(n_j)
  Point y{0, 0, 0, 0};
  for (int axis = 0; axis < d; ++axis) {
    const double len = dom.lengths()[static_cast<std::size_t>(axis)];
    std::vector<double> coef(static_cast<std::size_t>(
                                 n_max[static_cast<std::size_t>(axis)]) + 1,
                             0.0);
    for (int m = 0; m < n_modes_; ++m) {
      const auto& n = dom.mode_numbers(m);
      double suff = 1.0;
      for (int j = axis + 1; j < d; ++j)
        suff *= dom.axis_mode_integral(j, n[static_cast<std::size_t>(j)]);
      coef[static_cast<std::size_t>(n[static_cast<std::size_t>(axis)])] +=
          w[static_cast<std::size_t>(m)] * suff;
    }
    // axis mass; on the first axis this resolves the kill decision
    double mass = 0.0;
    for (int n = 1; n <= n_max[static_cast<std::size_t>(axis)]; ++n)
      mass += coef[static_cast<std::size_t>(n)] * dom.axis_mode_integral(axis, n);
    if (axis == 0) {
      double survival = mass_scale_ * mass;
      if (survival < 0.0 || survival > 1.0) {
        kernel_->clamp_count_->fetch_add(1);
        survival = std::clamp(survival, 0.0, 1.0);
      }
      if (rng.uniform() >= survival) return std::nullopt;
    }
    if (!(mass > 0.0)) return std::nullopt;  // truncation dust; treat as killed

    const double target = rng.uniform() * mass;
    const auto cdf = [&](double yy, double* dens) {
      thread_local TrigTable t;
      t.build(M_PI * yy / len, n_max[static_cast<std::size_t>(axis)] + 1);
      double f = 0.0, g = 0.0;
      for (int n = 1; n <= n_max[static_cast<std::size_t>(axis)]; ++n) {
        const double cn = coef[static_cast<std::size_t>(n)];
        if (cn == 0.0) continue;
        f += cn * sq2 * (1.0 - t.c[static_cast<std::size_t>(n)]) / (n * M_PI);
        g += cn * sq2 * t.s[static_cast<std::size_t>(n)] / len;
      }
      *dens = g;
      return f;
    };
    y[axis] = invert_cdf(cdf, target, len, x[axis]);

    // fold the sampled coordinate into the mode weights
    if (axis + 1 < d) {
      thread_local TrigTable t;
      t.build(M_PI * y[axis] / len, n_max[static_cast<std::size_t>(axis)]);
      for (int m = 0; m < n_modes_; ++m) {
        const auto& n = dom.mode_numbers(m);
        w[static_cast<std::size_t>(m)] *=
            sq2 * t.s[static_cast<std::size_t>(n[static_cast<std::size_t>(axis)])];
      }
    }
  }
  return y;
}

DoobStepSampler::DoobStepSampler(const KernelEval& kernel, double dt)
    : kernel_(&kernel), dt_(dt) {
  if (kernel.family() == KernelFamily::doob)
    throw ConfigError(
        "doob_step_sample: construct from the dirichlet or subordinated family");
  kernel.require_truncation(dt);
  n_modes_ = kernel.effective_modes(dt) + 1;
  decay_.resize(static_cast<std::size_t>(n_modes_));
  for (int m = 0; m < n_modes_; ++m)
    decay_[static_cast<std::size_t>(m)] =
        std::exp(-(kernel.rate(m) - kernel.rate0()) * dt);
}

double DoobStepSampler::mass(const Point& x) const {
  // modes whose non-leading axes all sit at the ground number integrate to
  // delta_{n,1} against phi_n phi_1; orthonormality collapses the mass to the
  // ground term alone.
  const Domain& dom = kernel_->domain();
  double acc = 0.0;
  for (int m = 0; m < n_modes_; ++m) {
    const auto& n = dom.mode_numbers(m);
    bool all_ground = true;
    for (int j = 0; j < dom.dim(); ++j)
      all_ground = all_ground && n[static_cast<std::size_t>(j)] == 1;
    if (all_ground)
      acc += decay_[static_cast<std::size_t>(m)] * dom.mode_over_ground(m, x);
  }
  return acc;
}

Point DoobStepSampler::step(const Point& x, Rng& rng) const {
  const Domain& dom = kernel_->domain();
  if (!dom.interior(x)) throw ConfigError("doob_step_sample: boundary point");
  const int d = dom.dim();

  std::array<int, kMaxDim> n_max{1, 1, 1, 1};
  for (int m = 0; m < n_modes_; ++m) {
    const auto& n = dom.mode_numbers(m);
    for (int j = 0; j < d; ++j)
      n_max[static_cast<std::size_t>(j)] =
          std::max(n_max[static_cast<std::size_t>(j)], n[static_cast<std::size_t>(j)]);
  }
  thread_local std::array<RatioTable, kMaxDim> ratio;
  for (int j = 0; j < d; ++j)
    ratio[static_cast<std::size_t>(j)].build(
        M_PI * x[j] / dom.lengths()[static_cast<std::size_t>(j)],
        n_max[static_cast<std::size_t>(j)]);

  // w_m = decay_m * (phi_m/phi_0)(x), then times (phi phi_1)(y_j) per axis
  std::vector<double> w(static_cast<std::size_t>(n_modes_));
  for (int m = 0; m < n_modes_; ++m) {
    const auto& n = dom.mode_numbers(m);
    double v = decay_[static_cast<std::size_t>(m)];
    for (int j = 0; j < d; ++j)
      v *= ratio[static_cast<std::size_t>(j)].u[static_cast<std::size_t>(
          n[static_cast<std::size_t>(j)])];
    w[static_cast<std::size_t>(m)] = v;
  }

  Point y{0, 0, 0, 0};
  for (int axis = 0; axis < d; ++axis) {
    const double len = dom.lengths()[static_cast<std::size_t>(axis)];
    std::vector<double> coef(static_cast<std::size_t>(
                                 n_max[static_cast<std::size_t>(axis)]) + 1,
                             0.0);
    for (int m = 0; m < n_modes_; ++m) {
      const auto& n = dom.mode_numbers(m);
      bool suffix_ground = true;
      for (int j = axis + 1; j < d; ++j)
        suffix_ground = suffix_ground && n[static_cast<std::size_t>(j)] == 1;
      if (suffix_ground)
        coef[static_cast<std::size_t>(n[static_cast<std::size_t>(axis)])] +=
            w[static_cast<std::size_t>(m)];
    }
    const double mass = coef[1];  // int phi_n phi_1 d mu = delta_{n,1}
    if (!(mass > 0.0))
      throw TruncationError("doob_step_sample: transition mass lost to truncation");

    const double target = rng.uniform() * mass;
    const auto cdf = [&](double yy, double* dens) {
      const double theta = M_PI * yy / len;
      thread_local TrigTable t;
      t.build(theta, n_max[static_cast<std::size_t>(axis)] + 1);
      double f = 0.0, g = 0.0;
      for (int n = 1; n <= n_max[static_cast<std::size_t>(axis)]; ++n) {
        const double cn = coef[static_cast<std::size_t>(n)];
        if (cn == 0.0) continue;
        if (n == 1) {
          f += cn * (theta - 0.5 * t.s[2]) / M_PI;
        } else {
          f += cn *
               (t.s[static_cast<std::size_t>(n - 1)] / (n - 1.0) -
                t.s[static_cast<std::size_t>(n + 1)] / (n + 1.0)) /
               M_PI;
        }
        g += cn * 2.0 * t.s[static_cast<std::size_t>(n)] * t.s[1] / len;
      }
      *dens = g;
      return f;
    };
    y[axis] = invert_cdf(cdf, target, len, x[axis]);

    if (axis + 1 < d) {
      const double theta = M_PI * y[axis] / len;
      thread_local TrigTable t;
      t.build(theta, n_max[static_cast<std::size_t>(axis)]);
      for (int m = 0; m < n_modes_; ++m) {
        const auto& n = dom.mode_numbers(m);
        w[static_cast<std::size_t>(m)] *=
            2.0 * t.s[static_cast<std::size_t>(n[static_cast<std::size_t>(axis)])] *
            t.s[1];
      }
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// One-axis dual-representation kernel.
// ---------------------------------------------------------------------------

Axis1dKernel::Axis1dKernel(double length) : length_(length) {
  if (!(length > 0.0)) throw ConfigError("axis kernel: nonpositive length");
}

double Axis1dKernel::spectral_cutoff_modes(double s) const {
  // modes needed so that exp(-lambda_N s) < 1e-16
  return std::ceil(length_ / M_PI * std::sqrt(kEffTailLog / s));
}

namespace {

// Spectral sums win only when few modes survive; otherwise one or two image
// pairs evaluate the same kernel in a handful of erf calls.
constexpr int kSpectralModeBudget = 24;

// Image-sum CDF of the killed kernel on [0,L]:
// F(y) = sum_k [Phi((y-x+2kL)/sig) - Phi((-x+2kL)/sig)]
//      - [Phi((y+x+2kL)/sig) - Phi((x+2kL)/sig)], sig^2 = 2 s.
struct ImageKernel {
  double x, len, sigma;
  int k_max;

  ImageKernel(double x_, double len_, double s)
      : x(x_), len(len_), sigma(std::sqrt(2.0 * s)) {
    k_max = 1 + static_cast<int>(std::floor((8.6 * sigma + len) / (2.0 * len)));
  }

  double cdf(double y, double* dens) const {
    double f = 0.0, g = 0.0;
    for (int k = -k_max; k <= k_max; ++k) {
      const double c1 = x - 2.0 * k * len;   // positive image center
      const double c2 = -x - 2.0 * k * len;  // negative image center
      f += normal_cdf_local((y - c1) / sigma) - normal_cdf_local((0.0 - c1) / sigma);
      f -= normal_cdf_local((y - c2) / sigma) - normal_cdf_local((0.0 - c2) / sigma);
      if (dens) {
        const double z1 = (y - c1) / sigma, z2 = (y - c2) / sigma;
        g += std::exp(-0.5 * z1 * z1) - std::exp(-0.5 * z2 * z2);
      }
    }
    if (dens) *dens = g / (sigma * std::sqrt(2.0 * M_PI));
    return f;
  }
};

// Spectral killed sampler state for one axis at diffusion time s.
struct AxisSpectral {
  double len;
  int n_modes;
  std::vector<double> w;  // e^{-lambda_n s} sqrt2 sin(n pi x / L)

  AxisSpectral(double len_, double s, double x, int n_cap) : len(len_) {
    n_modes = std::min(
        n_cap, static_cast<int>(std::ceil(len / M_PI * std::sqrt(kEffTailLog / s))));
    n_modes = std::max(n_modes, 1);
    w.resize(static_cast<std::size_t>(n_modes) + 1, 0.0);
    thread_local TrigTable t;
    t.build(M_PI * x / len, n_modes);
    const double base = (M_PI / len) * (M_PI / len);
    for (int n = 1; n <= n_modes; ++n)
      w[static_cast<std::size_t>(n)] = std::exp(-base * n * n * s) * M_SQRT2 *
                                       t.s[static_cast<std::size_t>(n)];
  }

  double survival() const {
    double acc = 0.0;
    for (int n = 1; n <= n_modes; n += 2)
      acc += w[static_cast<std::size_t>(n)] * 2.0 * M_SQRT2 / (n * M_PI);
    return acc;
  }

  double cdf(double y, double* dens) const {
    thread_local TrigTable t;
    t.build(M_PI * y / len, n_modes);
    double f = 0.0, g = 0.0;
    for (int n = 1; n <= n_modes; ++n) {
      const double wn = w[static_cast<std::size_t>(n)];
      f += wn * M_SQRT2 * (1.0 - t.c[static_cast<std::size_t>(n)]) / (n * M_PI);
      g += wn * M_SQRT2 * t.s[static_cast<std::size_t>(n)] / len;
    }
    if (dens) *dens = g;
    return f;
  }
};

}  // namespace

double Axis1dKernel::survival(double s, double x) const {
  const double lam1 = (M_PI / length_) * (M_PI / length_);
  if (lam1 * s > 700.0) return 0.0;
  if (spectral_cutoff_modes(s) <= kSpectralModeBudget) {
    AxisSpectral sp(length_, s, x, kSpectralModeBudget);
    return std::clamp(sp.survival(), 0.0, 1.0);
  }
  ImageKernel im(x, length_, s);
  return std::clamp(im.cdf(length_, nullptr), 0.0, 1.0);
}

std::optional<double> Axis1dKernel::sample_killed(double s, double x,
                                                  Rng& rng) const {
  const double lam1 = (M_PI / length_) * (M_PI / length_);
  if (lam1 * s > 700.0) return std::nullopt;
  if (spectral_cutoff_modes(s) <= kSpectralModeBudget) {
    AxisSpectral sp(length_, s, x, kSpectralModeBudget);
    const double surv = sp.survival();
    const double u = rng.uniform();
    if (u >= surv) return std::nullopt;
    return invert_cdf([&](double y, double* d) { return sp.cdf(y, d); }, u,
                      length_, x);
  }
  ImageKernel im(x, length_, s);
  const double surv = im.cdf(length_, nullptr);
  const double u = rng.uniform();
  if (u >= surv) return std::nullopt;
  return invert_cdf([&](double y, double* d) { return im.cdf(y, d); }, u,
                    length_, x);
}

double Axis1dKernel::sample_doob(double s, double x, Rng& rng) const {
  const double lam1 = (M_PI / length_) * (M_PI / length_);
  if (spectral_cutoff_modes(s) <= kSpectralModeBudget) {
    // exact antiderivative CDF of the one-axis Doob kernel; exponents are
    // relative to the axis ground mode, so arbitrarily large s is fine
    const int n_modes = std::max(
        1, std::min(kSpectralModeBudget,
                    static_cast<int>(spectral_cutoff_modes(s))));
    const double th_x = M_PI * x / length_;
    thread_local RatioTable rt;
    rt.build(th_x, n_modes);
    std::vector<double> coef(static_cast<std::size_t>(n_modes) + 1, 0.0);
    for (int n = 1; n <= n_modes; ++n)
      coef[static_cast<std::size_t>(n)] = std::exp(-lam1 * (n * n - 1.0) * s) *
                                          rt.u[static_cast<std::size_t>(n)];
    const double target = rng.uniform() * coef[1];
    const auto cdf = [&](double yy, double* dens) {
      const double theta = M_PI * yy / length_;
      thread_local TrigTable t;
      t.build(theta, n_modes + 1);
      double f = 0.0, g = 0.0;
      for (int n = 1; n <= n_modes; ++n) {
        const double cn = coef[static_cast<std::size_t>(n)];
        if (n == 1)
          f += cn * (theta - 0.5 * t.s[2]) / M_PI;
        else
          f += cn *
               (t.s[static_cast<std::size_t>(n - 1)] / (n - 1.0) -
                t.s[static_cast<std::size_t>(n + 1)] / (n + 1.0)) /
               M_PI;
        g += cn * 2.0 * t.s[static_cast<std::size_t>(n)] * t.s[1] / length_;
      }
      if (dens) *dens = g;
      return f;
    };
    return invert_cdf(cdf, target, length_, x);
  }
  // small-time regime: propose from the normalized killed image kernel and
  // accept against phi_0; exact because phi_0 is bounded on the window
  ImageKernel im(x, length_, s);
  const double surv = im.cdf(length_, nullptr);
  const double lo = std::max(0.0, x - 8.6 * im.sigma);
  const double hi = std::min(length_, x + 8.6 * im.sigma);
  double sup_phi;  // sup of sin(pi y / L) over [lo,hi]
  if (lo <= 0.5 * length_ && 0.5 * length_ <= hi)
    sup_phi = 1.0;
  else
    sup_phi = std::max(std::sin(M_PI * lo / length_),
                       std::sin(M_PI * hi / length_));
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double u = rng.uniform() * surv;
    const double y =
        invert_cdf([&](double yy, double* d) { return im.cdf(yy, d); }, u,
                   length_, x);
    if (rng.uniform() * sup_phi <= std::sin(M_PI * y / length_)) return y;
  }
  throw InfeasibleError("axis doob sampler failed to accept");
}

// ---------------------------------------------------------------------------
// Composition stepper.
// ---------------------------------------------------------------------------

CompositionStepper::CompositionStepper(const Domain& domain,
                                       const BernsteinFn& fn, double dt,
                                       bool doob_mode)
    : domain_(&domain), fn_(fn), dt_(dt), doob_(doob_mode) {
  if (fn.sampler_kind() != SamplerKind::exact)
    throw UnsupportedSamplerError(
        "composition stepping requires an exact subordinator sampler");
  if (!(dt > 0.0)) throw ConfigError("composition: dt must be positive");
  lambda0_ = domain.lambda0();
  for (double len : domain.lengths()) axes_.emplace_back(len);
}

std::optional<Point> CompositionStepper::step(const Point& x, Rng& rng) const {
  if (!domain_->interior(x)) throw ConfigError("composition: boundary point");
  Point y{0, 0, 0, 0};
  if (doob_) {
    const double s = fn_.sample_tilted_increment(dt_, lambda0_, rng);
    if (s <= 0.0) return x;  // drift-free corner case: frozen clock
    for (std::size_t j = 0; j < axes_.size(); ++j)
      y[static_cast<int>(j)] = axes_[j].sample_doob(s, x[static_cast<int>(j)], rng);
    return y;
  }
  const double s = fn_.sample_increment(dt_, rng);
  if (s <= 0.0) return x;
  for (std::size_t j = 0; j < axes_.size(); ++j) {
    const auto yj = axes_[j].sample_killed(s, x[static_cast<int>(j)], rng);
    if (!yj) return std::nullopt;
    y[static_cast<int>(j)] = *yj;
  }
  return y;
}

std::optional<Point> step_sample(const KernelEval& kernel, const Point& x,
                                 double dt, Rng& rng) {
  StepSampler s(kernel, dt);
  return s.step(x, rng);
}

Point doob_step_sample(const KernelEval& kernel, const Point& x, double dt,
                       Rng& rng) {
  DoobStepSampler s(kernel, dt);
  return s.step(x, rng);
}

}  // namespace subdiff
