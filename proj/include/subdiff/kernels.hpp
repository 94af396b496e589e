#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "subdiff/bernstein.hpp"
#include "subdiff/domain.hpp"

namespace subdiff {

enum class KernelFamily { dirichlet, doob, subordinated };

/// Initial-law specification for survival probabilities and path starts.
struct NuPointMass {
  Point x{};
};
struct NuQsd {};           // mu_0 = phi_0^2 mu
struct NuGroundBiased {};  // nu_0 = phi_0 mu / mu(phi_0)
struct NuDensity {         // nu = h mu, h bounded
  std::function<double(const Point&)> h;
};
using NuSpec = std::variant<NuPointMass, NuQsd, NuGroundBiased, NuDensity>;

Point sample_initial(const NuSpec& nu, const Domain& domain, Rng& rng);

/// Spectral evaluation of the Dirichlet, Doob-transformed, and subordinated
/// kernels as truncated eigen-sums. Values are taken w.r.t. mu for the
/// dirichlet/subordinated families and w.r.t. mu_0 for the doob family.
/// Immutable and thread-safe; negative truncation dust is clamped to zero and
/// counted.
class KernelEval {
 public:
  KernelEval(const Domain& domain, KernelFamily family,
             std::optional<BernsteinFn> fn = std::nullopt);

  const Domain& domain() const { return *domain_; }
  KernelFamily family() const { return family_; }
  const std::optional<BernsteinFn>& bernstein() const { return fn_; }

  /// e^{-rate_m t} decay rate of mode m under this family.
  double rate(int m) const { return rates_[static_cast<std::size_t>(m)]; }
  double rate0() const { return rates_[0]; }

  /// Throws TruncationError unless the relative truncation tail
  /// e^{-(rate_M - rate_0) t} is below 1e-12.
  void require_truncation(double t) const;
  /// Largest mode index contributing above 1e-16 relative at horizon t.
  int effective_modes(double t) const;

  double kernel_value(double t, const Point& x, const Point& y) const;

  /// Survival mass s(t,x) = sum_m e^{-rate_m t} mu(phi_m) phi_m(x), clamped
  /// to [0,1]. Only meaningful for the killed families.
  double survival_mass(double t, const Point& x) const;

  /// P^nu(t < sigma) by spectral quadrature, and its normalized asymptote
  /// lim e^{rate_0 t} P^nu(t < sigma) = mu(phi_0) nu(phi_0).
  double survival_prob(const NuSpec& nu, double t) const;
  double survival_asymptote(const NuSpec& nu) const;

  /// nu(phi_m) for the supported initial laws.
  double nu_mode_integral(const NuSpec& nu, int m) const;
  /// mu(phi_m) (product of per-axis sine integrals).
  double mu_mode_integral(int m) const;

  std::uint64_t clamp_count() const { return clamp_count_->load(); }

 private:
  friend class StepSampler;
  friend class DoobStepSampler;
  const Domain* domain_;
  KernelFamily family_;
  std::optional<BernsteinFn> fn_;
  std::vector<double> rates_;
  std::vector<double> mu_integrals_;
  std::shared_ptr<std::atomic<std::uint64_t>> clamp_count_;
};

KernelEval make_kernel(const Domain& domain, KernelFamily family,
                       std::optional<BernsteinFn> fn = std::nullopt);

/// One-step sampler of the killed chain at fixed spacing dt, built on the
/// truncated eigen-sum with closed-form antiderivatives (d = 1) or a
/// conditional-axis sweep over the product modes (d >= 2). Construction
/// validates the truncation precondition. Read-only after construction.
class StepSampler {
 public:
  StepSampler(const KernelEval& kernel, double dt);
  /// nullopt = killed during the step.
  std::optional<Point> step(const Point& x, Rng& rng) const;
  double dt() const { return dt_; }

 private:
  const KernelEval* kernel_;
  double dt_;
  std::vector<double> decay_;  // e^{-(rate_m - rate_0) dt}
  double mass_scale_;          // e^{-rate_0 dt}
  int n_modes_;
};

/// Ground-state transform of the subordinated chain: a proper (never killed)
/// Markov transition q_dt(x,y) = e^{B(l0) dt} (phi_0(y)/phi_0(x)) p_dt(x,y).
class DoobStepSampler {
 public:
  DoobStepSampler(const KernelEval& kernel, double dt);
  Point step(const Point& x, Rng& rng) const;
  double dt() const { return dt_; }
  /// Transition mass by quadrature-free spectral identity; 1 up to truncation.
  double mass(const Point& x) const;

 private:
  const KernelEval* kernel_;
  double dt_;
  std::vector<double> decay_;
  int n_modes_;
};

/// Exact one-axis Dirichlet heat kernel machinery on [0,L]: spectral
/// representation for diffusion times where few modes survive, image (method
/// of reflections) representation for small times. Used by the composition
/// stepper, where subordinator increments land on arbitrary time scales.
class Axis1dKernel {
 public:
  explicit Axis1dKernel(double length);

  /// Survival integral of the killed kernel started at x over time s.
  double survival(double s, double x) const;
  /// Draw from the normalized killed transition; nullopt = killed.
  std::optional<double> sample_killed(double s, double x, Rng& rng) const;
  /// Draw from the one-axis Doob transition at diffusion time s.
  double sample_doob(double s, double x, Rng& rng) const;

  double length() const { return length_; }

 private:
  double spectral_cutoff_modes(double s) const;
  double length_;
};

/// Composition stepper: advances the subordinated chain one grid step by
/// drawing a subordinator increment and applying exact per-axis diffusion
/// transitions at that increment. Exact for product boxes with independent
/// axis diffusions sharing one subordinator. Requires an exact increment
/// sampler on B; no spectral truncation enters.
class CompositionStepper {
 public:
  CompositionStepper(const Domain& domain, const BernsteinFn& fn, double dt,
                     bool doob_mode);
  std::optional<Point> step(const Point& x, Rng& rng) const;

 private:
  const Domain* domain_;
  BernsteinFn fn_;
  double dt_;
  bool doob_;
  double lambda0_;
  std::vector<Axis1dKernel> axes_;
};

/// Spec-level convenience wrappers.
std::optional<Point> step_sample(const KernelEval& kernel, const Point& x,
                                 double dt, Rng& rng);
Point doob_step_sample(const KernelEval& kernel, const Point& x, double dt,
                       Rng& rng);

}  // namespace subdiff
