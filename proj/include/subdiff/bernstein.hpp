#pragma once

#include <optional>
#include <string>

#include "subdiff/common.hpp"

#include <json.hpp>

namespace subdiff {

enum class BernsteinKind { drift, stable, drift_stable, gamma, remark_example };

enum class SamplerKind { exact, none };

/// A Bernstein function B (Laplace exponent of a subordinator) from the
/// catalog, with exact increment samplers where the law is tractable:
///   drift:          B(l) = a l
///   stable:         B(l) = l^alpha
///   drift_stable:   B(l) = a l + b l^alpha
///   gamma:          B(l) = log(1 + l)
///   remark_example: B(l) = 1 - (1 + l)^(alpha - 1)   (no exact sampler)
class BernsteinFn {
 public:
  static BernsteinFn drift(double a);
  static BernsteinFn stable(double alpha);
  static BernsteinFn drift_stable(double a, double b, double alpha);
  static BernsteinFn gamma();
  static BernsteinFn remark_example(double alpha);

  double operator()(double lambda) const;
  BernsteinKind kind() const { return kind_; }
  /// Exponent the catalog associates with B for growth classification, when
  /// one is canonical (drift -> 1, stable -> alpha, drift_stable -> 1).
  std::optional<double> alpha_hint() const { return alpha_hint_; }
  SamplerKind sampler_kind() const { return sampler_kind_; }

  /// One increment of the subordinator over duration t.
  /// Throws UnsupportedSamplerError when sampler_kind() == none.
  double sample_increment(double t, Rng& rng) const;

  /// Increment conditioned by the exponential tilt e^{-lambda0 s}; the law
  /// with density proportional to e^{-lambda0 s} P_{S_t}(ds). Used by the
  /// ground-state transform of the subordinated chain.
  double sample_tilted_increment(double t, double lambda0, Rng& rng) const;

  std::string name() const;
  nlohmann::json to_json() const;
  static BernsteinFn from_json(const nlohmann::json& j);

  double param_a() const { return a_; }
  double param_b() const { return b_; }
  double param_alpha() const { return alpha_; }

 private:
  BernsteinFn(BernsteinKind kind, double a, double b, double alpha);

  BernsteinKind kind_;
  double a_ = 0.0, b_ = 0.0, alpha_ = 0.0;
  std::optional<double> alpha_hint_;
  SamplerKind sampler_kind_ = SamplerKind::none;
};

struct BernsteinClassification {
  bool in_upper_class = false;   // B^alpha: liminf l^-alpha B(l) > 0
  bool in_lower_class = false;   // B_alpha: limsup l^-alpha B(l) < infinity
  bool in_blackboard_b = false;  // int_1^inf s^{d/2-1} e^{-r B(s)} ds < inf, all r
  int d_for_blackboard = 2;
  bool uncertain = false;
  double tail_loglog_slope = 0.0;  // slope of log(l^-alpha B) vs log l, tail
};

/// Numerical growth classification on a geometric probe grid up to
/// lambda_probe_max (>= 1e6). Advisory metadata: indeterminate results set
/// `uncertain` rather than guessing.
BernsteinClassification classify(const BernsteinFn& fn, double alpha,
                                 double lambda_probe_max, int d = 2);

/// Probe-grid check of B(0)=0, B'(0+)>0, monotone, concave, and the first six
/// alternating higher-difference signs. Returns false with a reason on failure.
bool check_bernstein_invariants(const BernsteinFn& fn, std::string* reason = nullptr);

/// Largest kappa2 with B(t) >= kappa2 (t^alpha ^ t) on a probe grid (0 when the
/// bound fails); members of the upper class must admit a positive value.
double fitted_lower_envelope(const BernsteinFn& fn, double alpha);

inline double sample_increment(const BernsteinFn& fn, double t, Rng& rng) {
  return fn.sample_increment(t, rng);
}

}  // namespace subdiff
