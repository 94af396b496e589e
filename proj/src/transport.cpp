#include "subdiff/transport.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "subdiff/quadrature.hpp"

namespace subdiff {

DiscreteMeasure DiscreteMeasure::make(int dim, std::vector<Point> atoms,
                                      std::vector<double> weights) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("measure: bad dimension");
  if (atoms.size() != weights.size() || atoms.empty())
    throw ConfigError("measure: atoms/weights size mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("measure: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ConfigError("measure: weights must sum to 1 within 1e-12");
  DiscreteMeasure m;
  m.dim = dim;
  m.atoms = std::move(atoms);
  m.weights = std::move(weights);
  return m;
}

DiscreteMeasure DiscreteMeasure::uniform(int dim, std::vector<Point> atoms) {
  const std::size_t n = atoms.size();
  if (n == 0) throw ConfigError("measure: empty atom list");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  // exact unit mass regardless of n
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) acc += w[i];
  w[n - 1] = 1.0 - acc;
  DiscreteMeasure m;
  m.dim = dim;
  m.atoms = std::move(atoms);
  m.weights = std::move(w);
  return m;
}

double euclidean_distance(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int j = 0; j < dim; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

namespace {

double outer_exponent_value(double cost, double q) {
  const double c = std::max(cost, 0.0);
  return q >= 1.0 ? std::pow(c, 1.0 / q) : c;
}

struct Indexed {
  double x;
  double w;
};

std::vector<Indexed> sorted_1d(const DiscreteMeasure& m) {
  std::vector<Indexed> v(m.atoms.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = {m.atoms[i][0], m.weights[i]};
  std::sort(v.begin(), v.end(),
            [](const Indexed& a, const Indexed& b) { return a.x < b.x; });
  return v;
}

}  // namespace

TransportResult w_exact_1d(const DiscreteMeasure& a, const DiscreteMeasure& b,
                           double q) {
  if (a.dim != 1 || b.dim != 1)
    throw ConfigError("w_exact_1d: requires d = 1");
  if (q < 1.0)
    throw ConfigError(
        "w_exact_1d: monotone coupling is not optimal for q < 1; use "
        "ot_discrete_exact");
  auto va = sorted_1d(a), vb = sorted_1d(b);
  std::size_t i = 0, j = 0;
  double ra = va[0].w, rb = vb[0].w, cost = 0.0;
  while (i < va.size() && j < vb.size()) {
    const double m = std::min(ra, rb);
    cost += m * std::pow(std::abs(va[i].x - vb[j].x), q);
    ra -= m;
    rb -= m;
    if (ra <= 1e-17 && i + 1 <= va.size()) {
      if (++i < va.size()) ra = va[i].w;
    }
    if (rb <= 1e-17 && j + 1 <= vb.size()) {
      if (++j < vb.size()) rb = vb[j].w;
    }
  }
  TransportResult r;
  r.cost = cost;
  r.q = q;
  r.method = TransportMethod::quantile;
  r.value = outer_exponent_value(cost, q);
  return r;
}

TransportResult w_exact_1d_vs_density(const DiscreteMeasure& a,
                                      const Continuous1d& target, double q) {
  if (a.dim != 1) throw ConfigError("w_exact_1d: requires d = 1");
  if (q < 1.0)
    throw ConfigError(
        "w_exact_1d: monotone coupling is not optimal for q < 1; use "
        "ot_discrete_exact");
  const auto va = sorted_1d(a);
  static const GaussLegendre gl(24, 0.0, 1.0);
  const auto panel = [&](double y0, double y1, double x) {
    double s = 0.0;
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const double y = y0 + (y1 - y0) * gl.nodes[k];
      s += (y1 - y0) * gl.weights[k] * std::pow(std::abs(x - y), q) *
           target.density(y);
    }
    return s;
  };
  double cost = 0.0, u0 = 0.0;
  double y0 = target.quantile(0.0);
  for (const auto& [x, w] : va) {
    const double u1 = std::min(u0 + w, 1.0);
    const double y1 = target.quantile(u1);
    if (x > y0 && x < y1) {
      cost += panel(y0, x, x) + panel(x, y1, x);
    } else {
      cost += panel(y0, y1, x);
    }
    u0 = u1;
    y0 = y1;
  }
  TransportResult r;
  r.cost = cost;
  r.q = q;
  r.method = TransportMethod::quantile;
  r.value = outer_exponent_value(cost, q);
  return r;
}

// ---------------------------------------------------------------------------
// Transportation simplex.
// ---------------------------------------------------------------------------

namespace {

struct BasisArc {
  int i = 0;  // row
  int j = 0;  // col
  double flow = 0.0;
};

class TransportSimplex {
 public:
  TransportSimplex(std::vector<double> supply, std::vector<double> demand,
                   const std::vector<double>& cost)
      : a_(std::move(supply)), b_(std::move(demand)), c_(cost),
        n_(static_cast<int>(a_.size())), m_(static_cast<int>(b_.size())) {}

  double solve(double* duality_gap, int* iterations) {
    northwest_corner();
    const double scale = std::max(
        1e-30, *std::max_element(c_.begin(), c_.end()));
    const double tol = 1e-13 * scale;
    int degenerate_streak = 0;
    bool bland = false;
    int iter = 0;
    for (; iter < 500000; ++iter) {
      compute_duals();
      int ei = -1, ej = -1;
      double best = -tol;
      for (int i = 0; i < n_ && (ei < 0 || !bland); ++i) {
        const double* crow = &c_[static_cast<std::size_t>(i) * m_];
        for (int j = 0; j < m_; ++j) {
          const double rc = crow[j] - u_[i] - v_[j];
          if (rc < best) {
            best = rc;
            ei = i;
            ej = j;
            if (bland) break;
          }
        }
      }
      if (ei < 0) break;  // optimal
      const double theta = pivot(ei, ej);
      if (theta <= 0.0) {
        if (++degenerate_streak > 64) bland = true;
      } else {
        degenerate_streak = 0;
        bland = false;
      }
    }
    if (iterations) *iterations = iter;
    double primal = 0.0;
    for (const auto& arc : basis_)
      primal += arc.flow * c_[static_cast<std::size_t>(arc.i) * m_ + arc.j];
    compute_duals();
    double dual = 0.0;
    for (int i = 0; i < n_; ++i) dual += u_[i] * a_[i];
    for (int j = 0; j < m_; ++j) dual += v_[j] * b_[j];
    if (duality_gap) *duality_gap = std::abs(primal - dual);
    return primal;
  }

 private:
  void northwest_corner() {
    basis_.clear();
    std::vector<double> ra = a_, rb = b_;
    int i = 0, j = 0;
    while (i < n_ && j < m_) {
      const double f = std::min(ra[i], rb[j]);
      basis_.push_back({i, j, f});
      ra[i] -= f;
      rb[j] -= f;
      if (i == n_ - 1 && j == m_ - 1) break;
      // advance exactly one side; keeps the basis a spanning tree
      if (ra[i] <= rb[j] && i < n_ - 1)
        ++i;
      else if (j < m_ - 1)
        ++j;
      else
        ++i;
    }
  }

  void rebuild_adjacency() {
    adj_.assign(static_cast<std::size_t>(n_ + m_), {});
    for (int t = 0; t < static_cast<int>(basis_.size()); ++t) {
      adj_[static_cast<std::size_t>(basis_[t].i)].push_back(t);
      adj_[static_cast<std::size_t>(n_ + basis_[t].j)].push_back(t);
    }
  }

  // BFS over the basis tree fixing u_0 = 0; also records parents for cycles.
  void compute_duals() {
    rebuild_adjacency();
    u_.assign(static_cast<std::size_t>(n_), 0.0);
    v_.assign(static_cast<std::size_t>(m_), 0.0);
    parent_.assign(static_cast<std::size_t>(n_ + m_), -1);
    parent_arc_.assign(static_cast<std::size_t>(n_ + m_), -1);
    depth_.assign(static_cast<std::size_t>(n_ + m_), -1);
    std::vector<int> stack{0};
    depth_[0] = 0;
    while (!stack.empty()) {
      const int node = stack.back();
      stack.pop_back();
      for (int t : adj_[static_cast<std::size_t>(node)]) {
        const auto& arc = basis_[static_cast<std::size_t>(t)];
        const int other = node < n_ ? n_ + arc.j : arc.i;
        if (depth_[static_cast<std::size_t>(other)] >= 0) continue;
        depth_[static_cast<std::size_t>(other)] =
            depth_[static_cast<std::size_t>(node)] + 1;
        parent_[static_cast<std::size_t>(other)] = node;
        parent_arc_[static_cast<std::size_t>(other)] = t;
        const double c = c_[static_cast<std::size_t>(arc.i) * m_ + arc.j];
        if (other < n_)
          u_[static_cast<std::size_t>(other)] = c - v_[static_cast<std::size_t>(arc.j)];
        else
          v_[static_cast<std::size_t>(arc.j)] = c - u_[static_cast<std::size_t>(arc.i)];
        stack.push_back(other);
      }
    }
  }

  // Push flow around the unique cycle closed by entering arc (ei, ej).
  double pivot(int ei, int ej) {
    // node path from row ei to col (n_+ej) through the tree
    std::vector<int> pa, pb;
    int x = ei, y = n_ + ej;
    while (depth_[static_cast<std::size_t>(x)] > depth_[static_cast<std::size_t>(y)]) {
      pa.push_back(x);
      x = parent_[static_cast<std::size_t>(x)];
    }
    while (depth_[static_cast<std::size_t>(y)] > depth_[static_cast<std::size_t>(x)]) {
      pb.push_back(y);
      y = parent_[static_cast<std::size_t>(y)];
    }
    while (x != y) {
      pa.push_back(x);
      pb.push_back(y);
      x = parent_[static_cast<std::size_t>(x)];
      y = parent_[static_cast<std::size_t>(y)];
    }
    pa.push_back(x);  // common ancestor
    std::vector<int> path = pa;  // ei .. lca
    for (auto it = pb.rbegin(); it != pb.rend(); ++it) path.push_back(*it);
    // tree arcs along the path alternate -theta, +theta, ... starting at -theta
    std::vector<int> arcs;
    std::vector<int> signs;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const int child = depth_[static_cast<std::size_t>(path[k])] >
                                depth_[static_cast<std::size_t>(path[k + 1])]
                            ? path[k]
                            : path[k + 1];
      arcs.push_back(parent_arc_[static_cast<std::size_t>(child)]);
      signs.push_back(k % 2 == 0 ? -1 : +1);
    }
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (std::size_t k = 0; k < arcs.size(); ++k) {
      if (signs[k] < 0) {
        const double f = basis_[static_cast<std::size_t>(arcs[k])].flow;
        if (f < theta - 1e-300 ||
            (f <= theta && (leave < 0 || arcs[k] < leave))) {
          theta = f;
          leave = arcs[k];
        }
      }
    }
    for (std::size_t k = 0; k < arcs.size(); ++k)
      basis_[static_cast<std::size_t>(arcs[k])].flow += signs[k] * theta;
    basis_[static_cast<std::size_t>(leave)] = {ei, ej, theta};
    return theta;
  }

  std::vector<double> a_, b_;
  const std::vector<double>& c_;
  int n_, m_;
  std::vector<BasisArc> basis_;
  std::vector<std::vector<int>> adj_;
  std::vector<double> u_, v_;
  std::vector<int> parent_, parent_arc_, depth_;
};

struct Pruned {
  std::vector<Point> atoms;
  std::vector<double> weights;
};

Pruned prune(const DiscreteMeasure& m) {
  Pruned p;
  for (std::size_t i = 0; i < m.atoms.size(); ++i)
    if (m.weights[i] > 0.0) {
      p.atoms.push_back(m.atoms[i]);
      p.weights.push_back(m.weights[i]);
    }
  if (p.atoms.empty()) throw ConfigError("transport: measure has no mass");
  return p;
}

}  // namespace

TransportResult ot_discrete_exact(const DiscreteMeasure& a,
                                  const DiscreteMeasure& b, double q) {
  if (a.dim != b.dim) throw ConfigError("ot: dimension mismatch");
  if (!(q > 0.0)) throw ConfigError("ot: q must be positive");
  if (a.atoms.size() > 512 || b.atoms.size() > 512)
    throw ConfigError("ot_discrete_exact: size guard 512 exceeded");
  auto pa = prune(a), pb = prune(b);
  // balance to the common total (unit up to 1e-12)
  const double ta = std::accumulate(pa.weights.begin(), pa.weights.end(), 0.0);
  const double tb = std::accumulate(pb.weights.begin(), pb.weights.end(), 0.0);
  for (auto& w : pb.weights) w *= ta / tb;

  const std::size_t n = pa.atoms.size(), m = pb.atoms.size();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cost[i * m + j] =
          std::pow(euclidean_distance(pa.atoms[i], pb.atoms[j], a.dim), q);

  TransportSimplex simplex(pa.weights, pb.weights, cost);
  TransportResult r;
  r.q = q;
  r.method = TransportMethod::exact_lp;
  r.cost = simplex.solve(&r.duality_gap, &r.iterations);
  r.value = outer_exponent_value(r.cost, q);
  return r;
}

// ---------------------------------------------------------------------------
// Log-domain Sinkhorn.
// ---------------------------------------------------------------------------

namespace {

struct SinkhornProblem {
  std::size_t n = 0, m = 0;
  std::vector<double> log_a, log_b;
  std::vector<double> cost;  // n*m row-major
};

double lse_row(const double* vals, std::size_t len) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, vals[k]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t k = 0; k < len; ++k) s += std::exp(vals[k] - mx);
  return mx + std::log(s);
}

// One (a,b) entropic problem at fixed eps; potentials warm-started in f,g.
// Returns iterations used; marginal error written to *err. After each g
// update the column marginals are exact, so the violation lives in the rows;
// it is only evaluated every few sweeps (a full extra n*m pass).
int sinkhorn_fixed_eps(const SinkhornProblem& p, double eps, double tol,
                       int max_iter, std::vector<double>& f,
                       std::vector<double>& g, double* err) {
  std::vector<double> buf(std::max(p.n, p.m));
  std::vector<double> fcol(p.n);
  int it = 0;
  double e = std::numeric_limits<double>::infinity();
  const int check_every = 5;
  for (; it < max_iter; ++it) {
    for (std::size_t i = 0; i < p.n; ++i) {
      const double* crow = &p.cost[i * p.m];
      for (std::size_t j = 0; j < p.m; ++j)
        buf[j] = p.log_b[j] + (g[j] - crow[j]) / eps;
      f[i] = -eps * lse_row(buf.data(), p.m);
    }
    for (std::size_t j = 0; j < p.m; ++j) {
      for (std::size_t i = 0; i < p.n; ++i)
        fcol[i] = p.log_a[i] + (f[i] - p.cost[i * p.m + j]) / eps;
      g[j] = -eps * lse_row(fcol.data(), p.n);
    }
    if ((it + 1) % check_every != 0 && it + 1 < max_iter) continue;
    e = 0.0;
    for (std::size_t i = 0; i < p.n; ++i) {
      const double* crow = &p.cost[i * p.m];
      for (std::size_t j = 0; j < p.m; ++j)
        buf[j] = p.log_b[j] + (g[j] - crow[j]) / eps;
      const double row_mass =
          std::exp(f[i] / eps + lse_row(buf.data(), p.m) + p.log_a[i]);
      e = std::max(e, std::abs(row_mass - std::exp(p.log_a[i])));
    }
    if (e < tol) {
      ++it;
      break;
    }
  }
  if (err) *err = e;
  return it;
}

double dual_value(const SinkhornProblem& p, const std::vector<double>& f,
                  const std::vector<double>& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) s += f[i] * std::exp(p.log_a[i]);
  for (std::size_t j = 0; j < p.m; ++j) s += g[j] * std::exp(p.log_b[j]);
  return s;
}

// Symmetric problem OT_eps(a,a): single potential fixed point with averaging.
double symmetric_entropic_value(const std::vector<double>& log_a,
                                const std::vector<double>& cost, std::size_t n,
                                double eps, int max_iter) {
  std::vector<double> pphi(n, 0.0), buf(n);
  const double scale =
      1.0 + *std::max_element(cost.begin(), cost.end());
  for (int it = 0; it < max_iter; ++it) {
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* crow = &cost[i * n];
      for (std::size_t j = 0; j < n; ++j)
        buf[j] = log_a[j] + (pphi[j] - crow[j]) / eps;
      const double next = 0.5 * (pphi[i] - eps * lse_row(buf.data(), n));
      delta = std::max(delta, std::abs(next - pphi[i]));
      pphi[i] = next;
    }
    if (delta < 1e-12 * scale) break;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += 2.0 * pphi[i] * std::exp(log_a[i]);
  return s;
}

SinkhornProblem build_problem(const Pruned& pa, const Pruned& pb, int dim,
                              double q) {
  SinkhornProblem p;
  p.n = pa.atoms.size();
  p.m = pb.atoms.size();
  p.log_a.resize(p.n);
  p.log_b.resize(p.m);
  const double ta = std::accumulate(pa.weights.begin(), pa.weights.end(), 0.0);
  const double tb = std::accumulate(pb.weights.begin(), pb.weights.end(), 0.0);
  for (std::size_t i = 0; i < p.n; ++i) p.log_a[i] = std::log(pa.weights[i] / ta);
  for (std::size_t j = 0; j < p.m; ++j) p.log_b[j] = std::log(pb.weights[j] / tb);
  p.cost.resize(p.n * p.m);
  for (std::size_t i = 0; i < p.n; ++i)
    for (std::size_t j = 0; j < p.m; ++j)
      p.cost[i * p.m + j] =
          std::pow(euclidean_distance(pa.atoms[i], pb.atoms[j], dim), q);
  return p;
}

double self_cost_matrix(const Pruned& pa, int dim, double q,
                        std::vector<double>& out) {
  const std::size_t n = pa.atoms.size();
  out.resize(n * n);
  double mx = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] =
          std::pow(euclidean_distance(pa.atoms[i], pa.atoms[j], dim), q);
      mx = std::max(mx, out[i * n + j]);
    }
  return mx;
}

}  // namespace

TransportResult ot_entropic(const DiscreteMeasure& a, const DiscreteMeasure& b,
                            double q, const SinkhornOptions& opts) {
  if (a.dim != b.dim) throw ConfigError("ot: dimension mismatch");
  if (!(q > 0.0)) throw ConfigError("ot: q must be positive");
  if (!(opts.epsilon > 0.0)) throw ConfigError("ot_entropic: epsilon must be > 0");
  const auto pa = prune(a), pb = prune(b);
  SinkhornProblem p = build_problem(pa, pb, a.dim, q);

  const double cmax =
      *std::max_element(p.cost.begin(), p.cost.end()) + 1e-300;
  std::vector<double> f(p.n, 0.0), g(p.m, 0.0);
  TransportResult r;
  r.q = q;
  r.method = TransportMethod::sinkhorn;

  double eps = opts.anneal ? std::max(0.1 * cmax, opts.epsilon) : opts.epsilon;
  for (;;) {
    const bool last = eps <= opts.epsilon * (1.0 + 1e-12);
    double err = 0.0;
    const int used = sinkhorn_fixed_eps(
        p, eps, last ? opts.marginal_tol : std::max(1e-3, opts.marginal_tol),
        opts.max_iter, f, g, &err);
    r.iterations += used;
    if (last) {
      r.marginal_error = err;
      r.converged = err < opts.marginal_tol;
      break;
    }
    eps = std::max(eps * 0.5, opts.epsilon);
  }

  double cost = dual_value(p, f, g);
  if (opts.debias) {
    std::vector<double> cself;
    self_cost_matrix(pa, a.dim, q, cself);
    const double aa =
        symmetric_entropic_value(p.log_a, cself, p.n, opts.epsilon, opts.max_iter);
    self_cost_matrix(pb, b.dim, q, cself);
    const double bb =
        symmetric_entropic_value(p.log_b, cself, p.m, opts.epsilon, opts.max_iter);
    cost -= 0.5 * (aa + bb);
  }
  r.cost = cost;
  r.value = outer_exponent_value(cost, q);
  return r;
}

double entropic_self_cost(const DiscreteMeasure& a, double q,
                          const SinkhornOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw ConfigError("ot_entropic: epsilon must be > 0");
  const auto pa = prune(a);
  const std::size_t n = pa.atoms.size();
  std::vector<double> log_a(n), cost;
  const double total = std::accumulate(pa.weights.begin(), pa.weights.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) log_a[i] = std::log(pa.weights[i] / total);
  self_cost_matrix(pa, a.dim, q, cost);
  return symmetric_entropic_value(log_a, cost, n, opts.epsilon, opts.max_iter);
}

// ---------------------------------------------------------------------------
// Distances to the quasi-stationary target.
// ---------------------------------------------------------------------------

DiscreteMeasure qsd_quantile_grid(const Domain& domain, std::size_t n) {
  if (domain.dim() != 1)
    throw ConfigError("qsd_quantile_grid: d = 1 only");
  QsdMeasure q(domain);
  std::vector<Point> atoms(n);
  for (std::size_t i = 0; i < n; ++i)
    atoms[i] =
        Point{q.axis_quantile(0, (static_cast<double>(i) + 0.5) / n), 0, 0, 0};
  return DiscreteMeasure::uniform(1, std::move(atoms));
}

TransportResult w_to_qsd(const DiscreteMeasure& empirical, const Domain& domain,
                         const QsdDistanceOptions& opts) {
  if (empirical.dim != domain.dim())
    throw ConfigError("w_to_qsd: measure/domain dimension mismatch");
  switch (opts.method) {
    case TransportMethod::quantile: {
      if (domain.dim() != 1)
        throw ConfigError("w_to_qsd: quantile method requires d = 1");
      QsdMeasure q(domain);
      Continuous1d target;
      target.quantile = [q](double u) { return q.axis_quantile(0, u); };
      target.density = [q](double y) { return q.density(Point{y, 0, 0, 0}); };
      return w_exact_1d_vs_density(empirical, target, opts.q);
    }
    case TransportMethod::exact_lp: {
      const auto ref =
          DiscreteMeasure::uniform(domain.dim(),
                                   qsd_sample(domain, opts.n_ref, opts.seed));
      return ot_discrete_exact(empirical, ref, opts.q);
    }
    case TransportMethod::sinkhorn: {
      if (domain.dim() < 2)
        throw ConfigError("w_to_qsd: sinkhorn path is for d >= 2");
      const auto ref1 = DiscreteMeasure::uniform(
          domain.dim(), qsd_sample(domain, opts.n_ref, opts.seed));
      const auto ref2 = DiscreteMeasure::uniform(
          domain.dim(), qsd_sample(domain, opts.n_ref, opts.seed + 1));
      SinkhornOptions so = opts.sinkhorn;
      if (opts.sinkhorn_auto_epsilon) {
        // eps_final = 0.01 * mean nearest-neighbor cost of the reference cloud
        double acc = 0.0;
        for (std::size_t i = 0; i < ref1.atoms.size(); ++i) {
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t j = 0; j < ref1.atoms.size(); ++j) {
            if (i == j) continue;
            best = std::min(best, euclidean_distance(ref1.atoms[i],
                                                     ref1.atoms[j], ref1.dim));
          }
          acc += std::pow(best, opts.q);
        }
        so.epsilon = std::max(1e-12, 0.01 * acc / ref1.atoms.size());
      }
      TransportResult r = ot_entropic(empirical, ref1, opts.q, so);
      const TransportResult two_cloud = ot_entropic(ref1, ref2, opts.q, so);
      r.bias_estimate = 0.5 * std::max(two_cloud.cost, 0.0);
      return r;
    }
  }
  throw ConfigError("w_to_qsd: unknown method");
}

double matching_lower_bound(const DiscreteMeasure& empirical,
                            const Domain& domain, double p) {
  if (domain.dim() != 1 || empirical.dim != 1)
    throw ConfigError("matching_lower_bound: d = 1 only");
  if (!(p > 0.0 && p <= 1.0))
    throw ConfigError("matching_lower_bound: p must lie in (0,1]");
  std::vector<double> xs(empirical.atoms.size());
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = empirical.atoms[i][0];
  std::sort(xs.begin(), xs.end());
  const double len = domain.lengths()[0];
  const QsdMeasure q(domain);
  static const GaussLegendre gl(32, 0.0, 1.0);

  const auto seg = [&](double lo, double hi, double atom) {
    if (hi <= lo) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const double x = lo + (hi - lo) * gl.nodes[k];
      s += (hi - lo) * gl.weights[k] * std::pow(std::abs(x - atom), p) *
           q.density(Point{x, 0, 0, 0});
    }
    return s;
  };

  double total = seg(0.0, xs.front(), xs.front());
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double mid = 0.5 * (xs[i] + xs[i + 1]);
    total += seg(xs[i], mid, xs[i]);
    total += seg(mid, xs[i + 1], xs[i + 1]);
  }
  total += seg(xs.back(), len, xs.back());
  return total;
}

void write_measure_csv(const std::string& path, const DiscreteMeasure& m) {
  std::ofstream out(path);
  if (!out) throw InfeasibleError("cannot open " + path + " for writing");
  char buf[64];
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    std::string line;
    for (int j = 0; j < m.dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,", m.atoms[i][j]);
      line += buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g\n", m.weights[i]);
    line += buf;
    out << line;
  }
}

DiscreteMeasure read_measure_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<Point> atoms;
  std::vector<double> weights;
  std::string line;
  int dim = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> vals;
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (vals.size() < 2) throw ConfigError("measure csv: bad row");
    if (dim < 0)
      dim = static_cast<int>(vals.size()) - 1;
    else if (static_cast<int>(vals.size()) - 1 != dim)
      throw ConfigError("measure csv: inconsistent row widths");
    Point pnt{0, 0, 0, 0};
    for (int j = 0; j < dim; ++j) pnt[j] = vals[static_cast<std::size_t>(j)];
    atoms.push_back(pnt);
    weights.push_back(vals.back());
  }
  return DiscreteMeasure::make(dim, std::move(atoms), std::move(weights));
}

}  // namespace subdiff
