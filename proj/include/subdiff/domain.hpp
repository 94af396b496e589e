#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "subdiff/common.hpp"

#include <json.hpp>

namespace subdiff {

enum class DomainKind { interval, box };

/// A model compact domain (interval or axis-aligned product box) with exact
/// Dirichlet eigenpairs of -Laplace under the uniform reference probability
/// measure. Modes are numbered 0..m_trunc with product eigenvalues sorted
/// ascending, ties broken lexicographically by per-axis index; mode 0 is the
/// ground state, positive in the interior.
///
/// Immutable after construction; safe to share across threads.
class Domain {
 public:
  static Domain make(DomainKind kind, std::vector<double> lengths, int m_trunc);

  DomainKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(lengths_.size()); }
  const std::vector<double>& lengths() const { return lengths_; }
  int m_trunc() const { return m_trunc_; }

  double eigenvalue(int m) const;
  /// Per-axis sine mode numbers (1-based; ground state = all ones).
  const std::array<int, kMaxDim>& mode_numbers(int m) const;

  double eigenfunction(int m, const Point& x) const;
  Point eigengrad(int m, const Point& x) const;

  double ground(const Point& x) const { return eigenfunction(0, x); }
  /// phi_m / phi_0, evaluated through Chebyshev polynomials of sin(n t)/sin(t);
  /// finite up to the boundary.
  double mode_over_ground(int m, const Point& x) const;
  Point mode_over_ground_grad(int m, const Point& x) const;

  double lambda0() const { return eigenvalue(0); }
  double spectral_gap(int m) const { return eigenvalue(m) - eigenvalue(0); }

  double diameter() const;
  bool interior(const Point& x) const;
  /// Uniform mu-density 1/prod(lengths) w.r.t. Lebesgue.
  double mu_density() const;

  /// integral of the 1-d mode n against the per-axis uniform measure.
  double axis_mode_integral(int axis, int n) const;
  /// integral of phi^{1d}_n phi^{1d}_1 d mu_axis (delta_{n,1}) kept for clarity.
  double ess_sup_eigenfunction() const;  // ||phi_m||_inf = 2^{d/2}, all m

  nlohmann::json to_json() const;
  static Domain from_json(const nlohmann::json& j);

 private:
  Domain() = default;
  void build_mode_table();

  DomainKind kind_ = DomainKind::interval;
  std::vector<double> lengths_;
  int m_trunc_ = 0;
  std::vector<double> eigenvalues_;
  std::vector<std::array<int, kMaxDim>> modes_;
};

/// One Dirichlet eigenpair (lambda_m, phi_m) with an L2(mu)-normalized
/// evaluator and its gradient.
struct EigenPair {
  int index = 0;
  double lambda = 0.0;
  const Domain* domain = nullptr;

  double value(const Point& x) const { return domain->eigenfunction(index, x); }
  Point gradient(const Point& x) const { return domain->eigengrad(index, x); }
};

EigenPair eigenpair(const Domain& domain, int m);

/// mu_0 = phi_0^2 mu: density, per-axis CDF/quantile, sampling.
class QsdMeasure {
 public:
  explicit QsdMeasure(const Domain& domain) : domain_(&domain) {}

  double density(const Point& x) const;
  double axis_cdf(int axis, double x) const;
  double axis_quantile(int axis, double u) const;
  Point sample(Rng& rng) const;

  const Domain& domain() const { return *domain_; }

 private:
  const Domain* domain_;
};

QsdMeasure qsd(const Domain& domain);
std::vector<Point> qsd_sample(const Domain& domain, std::size_t n,
                              std::uint64_t seed);

/// Smallest alpha0 >= 1 with ||phi_m||_inf <= alpha0 sqrt(m) and
/// alpha0^{-1} m^{2/d} <= lambda_m - lambda_0 <= alpha0 m^{2/d} over m <= m_max.
double weyl_check(const Domain& domain, int m_max);

}  // namespace subdiff
