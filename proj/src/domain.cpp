#include "subdiff/domain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace subdiff {

namespace {

// sin(n t) / sin(t) = U_{n-1}(cos t), evaluated by the Chebyshev recurrence.
double sine_ratio(int n, double c) {
  double u0 = 1.0, u1 = 2.0 * c;
  if (n == 1) return u0;
  if (n == 2) return u1;
  for (int k = 3; k <= n; ++k) {
    const double u2 = 2.0 * c * u1 - u0;
    u0 = u1;
    u1 = u2;
  }
  return u1;
}

// d/dt [ sin(n t) / sin(t) ] = (n cos(n t) sin t - sin(n t) cos t) / sin^2 t.
double sine_ratio_deriv(int n, double t) {
  const double s = std::sin(t);
  if (std::abs(s) < 1e-7) {
    // Series at the endpoint: U_{n-1}'(cos t) * (-sin t); odd function, O(t).
    const double sign = std::cos(t) > 0.0 ? 1.0 : -1.0;
    const double tt = sign > 0.0 ? t : M_PI - t;
    const double nn = static_cast<double>(n);
    // sin(nt)/sin(t) = n (1 - (n^2-1) t^2/6 + ...) near 0.
    double d = -nn * (nn * nn - 1.0) / 3.0 * tt;
    if (sign < 0.0 && n % 2 == 0) d = -d;  // parity of U_{n-1} at -1
    return sign > 0.0 ? d : -d;
  }
  const double nn = static_cast<double>(n);
  return (nn * std::cos(nn * t) * s - std::sin(nn * t) * std::cos(t)) / (s * s);
}

}  // namespace

Domain Domain::make(DomainKind kind, std::vector<double> lengths, int m_trunc) {
  if (lengths.empty()) throw ConfigError("domain: lengths must be nonempty");
  if (kind == DomainKind::interval && lengths.size() != 1)
    throw ConfigError("domain: interval takes exactly one length");
  if (lengths.size() > static_cast<std::size_t>(kMaxDim))
    throw ConfigError("domain: dimension > 4 rejected (OT cost blow-up)");
  for (double len : lengths)
    if (!(len > 0.0) || !std::isfinite(len))
      throw ConfigError("domain: nonpositive length");
  if (m_trunc < 1) throw ConfigError("domain: m_trunc must be >= 1");

  Domain d;
  d.kind_ = kind;
  d.lengths_ = std::move(lengths);
  d.m_trunc_ = m_trunc;
  d.build_mode_table();
  return d;
}

void Domain::build_mode_table() {
  const int dim = this->dim();
  std::vector<double> base(dim);  // (pi/L_j)^2
  for (int j = 0; j < dim; ++j) base[j] = std::pow(M_PI / lengths_[j], 2);

  const std::size_t want = static_cast<std::size_t>(m_trunc_) + 1;
  double cut = std::accumulate(base.begin(), base.end(), 0.0);  // lambda_0
  std::vector<std::pair<double, std::array<int, kMaxDim>>> table;

  for (int attempt = 0; attempt < 64; ++attempt) {
    cut *= 2.0;
    table.clear();
    std::array<int, kMaxDim> n{1, 1, 1, 1};
    // Enumerate the product lattice below the cutoff, depth-first per axis.
    std::function<void(int, double)> rec = [&](int axis, double partial) {
      if (axis == dim) {
        table.emplace_back(partial, n);
        return;
      }
      for (int k = 1;; ++k) {
        const double lam = partial + base[axis] * k * k;
        double rest = 0.0;
        for (int j = axis + 1; j < dim; ++j) rest += base[j];
        if (lam + rest > cut) break;
        n[axis] = k;
        rec(axis + 1, lam);
      }
      n[axis] = 1;
    };
    rec(0, 0.0);
    if (table.size() >= want) break;
  }
  if (table.size() < want)
    throw ConfigError("domain: could not enumerate requested mode count");

  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  table.resize(want);

  eigenvalues_.resize(want);
  modes_.resize(want);
  for (std::size_t i = 0; i < want; ++i) {
    eigenvalues_[i] = table[i].first;
    modes_[i] = table[i].second;
  }
}

double Domain::eigenvalue(int m) const {
  if (m < 0 || m > m_trunc_) throw ConfigError("eigenpair: index out of range");
  return eigenvalues_[static_cast<std::size_t>(m)];
}

const std::array<int, kMaxDim>& Domain::mode_numbers(int m) const {
  if (m < 0 || m > m_trunc_) throw ConfigError("eigenpair: index out of range");
  return modes_[static_cast<std::size_t>(m)];
}

double Domain::eigenfunction(int m, const Point& x) const {
  const auto& n = mode_numbers(m);
  double v = 1.0;
  for (int j = 0; j < dim(); ++j)
    v *= std::sqrt(2.0) * std::sin(n[j] * M_PI * x[j] / lengths_[j]);
  return v;
}

Point Domain::eigengrad(int m, const Point& x) const {
  const auto& n = mode_numbers(m);
  const int d = dim();
  std::array<double, kMaxDim> s{}, c{};
  for (int j = 0; j < d; ++j) {
    const double t = n[j] * M_PI * x[j] / lengths_[j];
    s[j] = std::sqrt(2.0) * std::sin(t);
    c[j] = std::sqrt(2.0) * std::cos(t) * (n[j] * M_PI / lengths_[j]);
  }
  Point g{0, 0, 0, 0};
  for (int j = 0; j < d; ++j) {
    double v = c[j];
    for (int k = 0; k < d; ++k)
      if (k != j) v *= s[k];
    g[j] = v;
  }
  return g;
}

double Domain::mode_over_ground(int m, const Point& x) const {
  const auto& n = mode_numbers(m);
  double v = 1.0;
  for (int j = 0; j < dim(); ++j) {
    const double t = M_PI * x[j] / lengths_[j];
    v *= sine_ratio(n[j], std::cos(t));
  }
  return v;
}

Point Domain::mode_over_ground_grad(int m, const Point& x) const {
  const auto& n = mode_numbers(m);
  const int d = dim();
  std::array<double, kMaxDim> val{}, der{};
  for (int j = 0; j < d; ++j) {
    const double t = M_PI * x[j] / lengths_[j];
    val[j] = sine_ratio(n[j], std::cos(t));
    der[j] = sine_ratio_deriv(n[j], t) * (M_PI / lengths_[j]);
  }
  Point g{0, 0, 0, 0};
  for (int j = 0; j < d; ++j) {
    double v = der[j];
    for (int k = 0; k < d; ++k)
      if (k != j) v *= val[k];
    g[j] = v;
  }
  return g;
}

double Domain::diameter() const {
  double s = 0.0;
  for (double len : lengths_) s += len * len;
  return std::sqrt(s);
}

bool Domain::interior(const Point& x) const {
  for (int j = 0; j < dim(); ++j)
    if (!(x[j] > 0.0 && x[j] < lengths_[j])) return false;
  return true;
}

double Domain::mu_density() const {
  double v = 1.0;
  for (double len : lengths_) v /= len;
  return v;
}

double Domain::axis_mode_integral(int axis, int n) const {
  (void)axis;
  // int_0^L sqrt(2) sin(n pi x / L) dx / L = sqrt(2) (1 - cos(n pi)) / (n pi)
  if (n % 2 == 0) return 0.0;
  return 2.0 * std::sqrt(2.0) / (n * M_PI);
}

double Domain::ess_sup_eigenfunction() const {
  return std::pow(2.0, 0.5 * dim());
}

nlohmann::json Domain::to_json() const {
  return nlohmann::json{
      {"kind", kind_ == DomainKind::interval ? "interval" : "box"},
      {"lengths", lengths_},
      {"m_trunc", m_trunc_}};
}

Domain Domain::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "interval" && kind != "box")
    throw ConfigError("domain: unknown kind '" + kind + "'");
  return make(kind == "interval" ? DomainKind::interval : DomainKind::box,
              j.at("lengths").get<std::vector<double>>(),
              j.at("m_trunc").get<int>());
}

EigenPair eigenpair(const Domain& domain, int m) {
  EigenPair p;
  p.index = m;
  p.lambda = domain.eigenvalue(m);  // validates range
  p.domain = &domain;
  return p;
}

double QsdMeasure::density(const Point& x) const {
  const double phi0 = domain_->ground(x);
  return phi0 * phi0 * domain_->mu_density();
}

double QsdMeasure::axis_cdf(int axis, double x) const {
  const double len = domain_->lengths()[static_cast<std::size_t>(axis)];
  const double t = std::clamp(x / len, 0.0, 1.0);
  return t - std::sin(2.0 * M_PI * t) / (2.0 * M_PI);
}

double QsdMeasure::axis_quantile(int axis, double u) const {
  const double len = domain_->lengths()[static_cast<std::size_t>(axis)];
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return len;
  // Newton with bisection guard on F(t) = t - sin(2 pi t)/(2 pi).
  double lo = 0.0, hi = 1.0, t = 0.5;
  for (int it = 0; it < 100; ++it) {
    const double f = t - std::sin(2.0 * M_PI * t) / (2.0 * M_PI) - u;
    if (f > 0.0)
      hi = t;
    else
      lo = t;
    const double df = 1.0 - std::cos(2.0 * M_PI * t);
    double step = df > 1e-12 ? t - f / df : 0.5 * (lo + hi);
    if (!(step > lo && step < hi)) step = 0.5 * (lo + hi);
    if (std::abs(step - t) < 1e-16) {
      t = step;
      break;
    }
    t = step;
  }
  return t * len;
}

Point QsdMeasure::sample(Rng& rng) const {
  Point p{0, 0, 0, 0};
  for (int j = 0; j < domain_->dim(); ++j) p[j] = axis_quantile(j, rng.uniform());
  return p;
}

QsdMeasure qsd(const Domain& domain) { return QsdMeasure(domain); }

std::vector<Point> qsd_sample(const Domain& domain, std::size_t n,
                              std::uint64_t seed) {
  if (n < 1) throw ConfigError("qsd_sample: n must be >= 1");
  QsdMeasure q(domain);
  Rng rng(seed);
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(q.sample(rng));
  return out;
}

double weyl_check(const Domain& domain, int m_max) {
  if (m_max > domain.m_trunc())
    throw ConfigError("weyl_check: m_max exceeds m_trunc");
  const double d = static_cast<double>(domain.dim());
  const double sup_phi = domain.ess_sup_eigenfunction();
  double alpha0 = 1.0;
  for (int m = 1; m <= m_max; ++m) {
    const double gap = domain.spectral_gap(m);
    const double mpow = std::pow(static_cast<double>(m), 2.0 / d);
    alpha0 = std::max({alpha0, gap / mpow, mpow / gap,
                       sup_phi / std::sqrt(static_cast<double>(m))});
  }
  return alpha0;
}

}  // namespace subdiff
