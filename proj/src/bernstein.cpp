#include "subdiff/bernstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "subdiff/quadrature.hpp"

namespace subdiff {

BernsteinFn::BernsteinFn(BernsteinKind kind, double a, double b, double alpha)
    : kind_(kind), a_(a), b_(b), alpha_(alpha) {}

BernsteinFn BernsteinFn::drift(double a) {
  if (!(a > 0.0)) throw ConfigError("bernstein: drift coefficient must be > 0");
  BernsteinFn fn(BernsteinKind::drift, a, 0.0, 1.0);
  fn.alpha_hint_ = 1.0;
  fn.sampler_kind_ = SamplerKind::exact;
  return fn;
}

BernsteinFn BernsteinFn::stable(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("bernstein: stable exponent must lie in (0,1)");
  BernsteinFn fn(BernsteinKind::stable, 0.0, 1.0, alpha);
  fn.alpha_hint_ = alpha;
  fn.sampler_kind_ = SamplerKind::exact;
  return fn;
}

BernsteinFn BernsteinFn::drift_stable(double a, double b, double alpha) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ConfigError("bernstein: drift_stable coefficients must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("bernstein: stable exponent must lie in (0,1)");
  BernsteinFn fn(BernsteinKind::drift_stable, a, b, alpha);
  fn.alpha_hint_ = 1.0;
  fn.sampler_kind_ = SamplerKind::exact;
  return fn;
}

BernsteinFn BernsteinFn::gamma() {
  BernsteinFn fn(BernsteinKind::gamma, 0.0, 0.0, 0.0);
  fn.sampler_kind_ = SamplerKind::exact;
  return fn;
}

BernsteinFn BernsteinFn::remark_example(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("bernstein: remark_example exponent must lie in (0,1)");
  BernsteinFn fn(BernsteinKind::remark_example, 0.0, 0.0, alpha);
  fn.sampler_kind_ = SamplerKind::none;
  return fn;
}

double BernsteinFn::operator()(double lambda) const {
  switch (kind_) {
    case BernsteinKind::drift:
      return a_ * lambda;
    case BernsteinKind::stable:
      return std::pow(lambda, alpha_);
    case BernsteinKind::drift_stable:
      return a_ * lambda + b_ * std::pow(lambda, alpha_);
    case BernsteinKind::gamma:
      return std::log1p(lambda);
    case BernsteinKind::remark_example:
      return 1.0 - std::pow(1.0 + lambda, alpha_ - 1.0);
  }
  return 0.0;
}

namespace {

// Kanter's representation of the positive alpha-stable law with Laplace
// transform e^{-lambda^alpha}.
double standard_positive_stable(double alpha, Rng& rng) {
  const double u = rng.uniform() * M_PI;
  const double e = rng.exponential();
  const double inv1ma = 1.0 / (1.0 - alpha);
  const double a =
      std::sin((1.0 - alpha) * u) *
      std::pow(std::sin(alpha * u), alpha * inv1ma) /
      std::pow(std::sin(u), inv1ma);
  return std::pow(a / e, (1.0 - alpha) / alpha);
}

}  // namespace

double BernsteinFn::sample_increment(double t, Rng& rng) const {
  if (!(t > 0.0)) throw ConfigError("sample_increment: duration must be > 0");
  switch (kind_) {
    case BernsteinKind::drift:
      return a_ * t;
    case BernsteinKind::stable:
      return std::pow(t, 1.0 / alpha_) * standard_positive_stable(alpha_, rng);
    case BernsteinKind::drift_stable:
      return a_ * t + std::pow(b_ * t, 1.0 / alpha_) *
                          standard_positive_stable(alpha_, rng);
    case BernsteinKind::gamma:
      return rng.gamma(t);
    case BernsteinKind::remark_example:
      throw UnsupportedSamplerError(
          "remark_example has no exact subordinator sampler; use the spectral "
          "simulation path");
  }
  return 0.0;
}

double BernsteinFn::sample_tilted_increment(double t, double lambda0,
                                            Rng& rng) const {
  if (lambda0 <= 0.0) return sample_increment(t, rng);
  switch (kind_) {
    case BernsteinKind::drift:
      return a_ * t;  // deterministic; tilt is a constant factor
    case BernsteinKind::gamma: {
      // Gamma(t, 1) tilted by e^{-l0 s} is Gamma(t, 1 + l0).
      return rng.gamma(t) / (1.0 + lambda0);
    }
    case BernsteinKind::stable:
    case BernsteinKind::drift_stable: {
      // Rejection from the raw increment; acceptance e^{-t(B(l0)-a l0)}.
      const double shift = kind_ == BernsteinKind::drift_stable ? a_ * t : 0.0;
      for (;;) {
        const double s = sample_increment(t, rng) - shift;
        if (rng.uniform() < std::exp(-lambda0 * s)) return s + shift;
      }
    }
    case BernsteinKind::remark_example:
      throw UnsupportedSamplerError(
          "remark_example has no exact subordinator sampler");
  }
  return 0.0;
}

std::string BernsteinFn::name() const {
  std::ostringstream os;
  switch (kind_) {
    case BernsteinKind::drift:
      os << "drift(a=" << a_ << ")";
      break;
    case BernsteinKind::stable:
      os << "stable(alpha=" << alpha_ << ")";
      break;
    case BernsteinKind::drift_stable:
      os << "drift_stable(a=" << a_ << ",b=" << b_ << ",alpha=" << alpha_ << ")";
      break;
    case BernsteinKind::gamma:
      os << "gamma";
      break;
    case BernsteinKind::remark_example:
      os << "remark_example(alpha=" << alpha_ << ")";
      break;
  }
  return os.str();
}

nlohmann::json BernsteinFn::to_json() const {
  nlohmann::json j;
  switch (kind_) {
    case BernsteinKind::drift:
      j = {{"kind", "drift"}, {"a", a_}};
      break;
    case BernsteinKind::stable:
      j = {{"kind", "stable"}, {"alpha", alpha_}};
      break;
    case BernsteinKind::drift_stable:
      j = {{"kind", "drift_stable"}, {"a", a_}, {"b", b_}, {"alpha", alpha_}};
      break;
    case BernsteinKind::gamma:
      j = {{"kind", "gamma"}};
      break;
    case BernsteinKind::remark_example:
      j = {{"kind", "remark_example"}, {"alpha", alpha_}};
      break;
  }
  return j;
}

BernsteinFn BernsteinFn::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "drift") return drift(j.at("a").get<double>());
  if (kind == "stable") return stable(j.at("alpha").get<double>());
  if (kind == "drift_stable")
    return drift_stable(j.at("a").get<double>(), j.at("b").get<double>(),
                        j.at("alpha").get<double>());
  if (kind == "gamma") return gamma();
  if (kind == "remark_example") return remark_example(j.at("alpha").get<double>());
  throw ConfigError("bernstein: unknown kind '" + kind + "'");
}

BernsteinClassification classify(const BernsteinFn& fn, double alpha,
                                 double lambda_probe_max, int d) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("classify: alpha must lie in (0,1]");
  if (lambda_probe_max < 1e6)
    throw ConfigError("classify: lambda_probe_max must be >= 1e6");

  BernsteinClassification out;
  out.d_for_blackboard = d;

  // log-log slope of q(l) = l^-alpha B(l) over the last decade of the grid.
  const auto q = [&](double l) { return std::pow(l, -alpha) * fn(l); };
  const double qN = q(lambda_probe_max);
  const double qP = q(lambda_probe_max / 10.0);
  const double slope = std::log(qN / qP) / std::log(10.0);
  out.tail_loglog_slope = slope;

  double tail_min = qN;
  for (double l = std::sqrt(lambda_probe_max); l <= lambda_probe_max; l *= 1.5)
    tail_min = std::min(tail_min, q(l));

  constexpr double kFlat = 0.01;   // decisively convergent
  constexpr double kSteep = 0.10;  // decisively divergent toward 0/inf
  if (tail_min <= 0.0 || slope < -kSteep) {
    out.in_upper_class = false;
  } else if (slope > -kFlat) {
    out.in_upper_class = true;
  } else {
    out.uncertain = true;
  }
  if (slope > kSteep) {
    out.in_lower_class = false;
  } else if (slope < kFlat) {
    out.in_lower_class = true;
  } else {
    out.uncertain = true;
  }

  // Blackboard class: decade masses of s^{d/2-1} e^{-r B(s)} must decay for
  // every probed r; a flat/rising run of decade masses marks divergence.
  bool in_bb = true;
  for (double r : {0.1, 1.0, 10.0}) {
    GaussLegendre gl(64, 0.0, 1.0);
    double prev = -1.0;
    int flat_run = 0;
    for (int k = 0; k < 10; ++k) {
      const double lo = std::pow(10.0, k), hi = std::pow(10.0, k + 1);
      double mass = 0.0;
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double s = lo + (hi - lo) * gl.nodes[i];
        mass += gl.weights[i] * (hi - lo) *
                std::pow(s, 0.5 * d - 1.0) * std::exp(-r * fn(s));
      }
      if (prev >= 0.0 && mass > 0.9 * prev) ++flat_run;
      if (prev >= 0.0 && mass <= 0.9 * prev) flat_run = 0;
      prev = mass;
    }
    if (flat_run >= 3) {
      in_bb = false;
      break;
    }
  }
  out.in_blackboard_b = in_bb;
  return out;
}

bool check_bernstein_invariants(const BernsteinFn& fn, std::string* reason) {
  const auto fail = [&](const std::string& msg) {
    if (reason) *reason = msg;
    return false;
  };
  if (std::abs(fn(0.0)) > 1e-12) return fail("B(0) != 0");
  const double h0 = 1e-7;
  if (!((fn(h0) - fn(0.0)) / h0 > 0.0)) return fail("B'(0+) <= 0");

  // Log-spaced probe grid; forward differences carry the derivative signs.
  for (double l = 1e-3; l <= 1e6; l *= 4.0) {
    const double tol = 1e-6 * std::max(std::abs(fn(l)), 1e-12);
    const double h = 0.05 * l;
    if (fn(l + h) - fn(l) < -tol) return fail("B not nondecreasing");
    if (fn(l + 2 * h) - 2 * fn(l + h) + fn(l) > tol) return fail("B not concave");
    for (int n = 1; n <= 6; ++n) {
      double diff = 0.0;
      double binom = 1.0;
      for (int k = 0; k <= n; ++k) {
        const double sign = ((n - k) % 2 == 0) ? 1.0 : -1.0;
        diff += sign * binom * fn(l + k * h);
        binom = binom * (n - k) / (k + 1.0);
      }
      // (-1)^n d^n B / d l^n <= 0 <=> (-1)^n [forward n-difference] <= 0.
      if ((n % 2 == 0 ? diff : -diff) > tol)
        return fail("alternating difference sign fails at order " +
                    std::to_string(n));
    }
  }
  return true;
}

double fitted_lower_envelope(const BernsteinFn& fn, double alpha) {
  double kappa = std::numeric_limits<double>::infinity();
  for (double t = 1e-4; t <= 1e8; t *= 2.0) {
    const double envelope = std::min(std::pow(t, alpha), t);
    kappa = std::min(kappa, fn(t) / envelope);
  }
  return kappa > 0.0 && std::isfinite(kappa) ? kappa : 0.0;
}

}  // namespace subdiff
