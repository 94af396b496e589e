#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "subdiff/common.hpp"
#include "subdiff/quadrature.hpp"
#include "subdiff/stats.hpp"
#include "subdiff/transport.hpp"
#include "support/oracles.hpp"

using namespace subdiff;

namespace {

DiscreteMeasure random_measure_1d(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<Point> atoms(n);
  std::vector<double> w(n);
  double tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    atoms[i] = Point{rng.uniform(lo, hi), 0, 0, 0};
    w[i] = rng.uniform(0.1, 1.0);
    tot += w[i];
  }
  for (auto& x : w) x /= tot;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) acc += w[i];
  w[n - 1] = 1.0 - acc;
  return DiscreteMeasure::make(1, std::move(atoms), std::move(w));
}

}  // namespace

TEST_CASE("point-mass identities") {
  const auto da = DiscreteMeasure::uniform(1, {Point{0.3, 0, 0, 0}});
  const auto db = DiscreteMeasure::uniform(1, {Point{0.9, 0, 0, 0}});
  CHECK(w_exact_1d(da, db, 2.0).value == doctest::Approx(0.6));
  CHECK(w_exact_1d(da, da, 2.0).value == doctest::Approx(0.0));
  CHECK(ot_discrete_exact(da, db, 2.0).value == doctest::Approx(0.6));
}

TEST_CASE("two-atom measures match the exhaustive-coupling oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto a = random_measure_1d(rng, 2, 0.0, 1.0);
    const auto b = random_measure_1d(rng, 2, 0.0, 1.0);
    for (double q : {0.5, 1.0, 2.0}) {
      std::vector<std::vector<double>> cost(2, std::vector<double>(2));
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          cost[i][j] = std::pow(std::abs(a.atoms[i][0] - b.atoms[j][0]), q);
      const double brute = oracle::brute_force_ot(a.weights, b.weights, cost);
      const double lp = ot_discrete_exact(a, b, q).cost;
      CHECK(lp == doctest::Approx(brute).epsilon(1e-12));
      if (q >= 1.0)
        CHECK(w_exact_1d(a, b, q).cost == doctest::Approx(brute).epsilon(1e-10));
    }
  }
}

TEST_CASE("simplex agrees with the oracle on small random instances") {
  Rng rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 2 + (rng.next_u64() % 2), m = 2 + (rng.next_u64() % 2);
    const auto a = random_measure_1d(rng, n, 0.0, 2.0);
    const auto b = random_measure_1d(rng, m, 0.0, 2.0);
    std::vector<std::vector<double>> cost(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        cost[i][j] = std::pow(std::abs(a.atoms[i][0] - b.atoms[j][0]), 0.7);
    const double brute = oracle::brute_force_ot(a.weights, b.weights, cost);
    const double lp = ot_discrete_exact(a, b, 0.7).cost;
    CHECK(lp == doctest::Approx(brute).epsilon(1e-10));
  }
}

TEST_CASE("LP equals quantile coupling for q=2 on 256 random atoms") {
  Rng rng(23);
  const auto a = random_measure_1d(rng, 256, 0.0, 1.0);
  const auto b = random_measure_1d(rng, 256, 0.0, 1.0);
  const auto lp = ot_discrete_exact(a, b, 2.0);
  const auto qt = w_exact_1d(a, b, 2.0);
  CHECK(std::abs(lp.value - qt.value) < 1e-9);
  CHECK(lp.duality_gap < 1e-9);
}

TEST_CASE("concave cost differs from the monotone coupling where it should") {
  // Overlapping supports: concave cost keeps the common mass in place and
  // ships one atom far, beating the monotone pairing.
  const auto a = DiscreteMeasure::make(
      1, {Point{0.0, 0, 0, 0}, Point{1.0, 0, 0, 0}}, {0.5, 0.5});
  const auto b = DiscreteMeasure::make(
      1, {Point{1.0, 0, 0, 0}, Point{2.0, 0, 0, 0}}, {0.5, 0.5});
  const double q = 0.5;
  std::vector<std::vector<double>> cost(2, std::vector<double>(2));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      cost[i][j] = std::pow(std::abs(a.atoms[i][0] - b.atoms[j][0]), q);
  const double brute = oracle::brute_force_ot(a.weights, b.weights, cost);
  const double lp = ot_discrete_exact(a, b, q).cost;
  CHECK(lp == doctest::Approx(brute).epsilon(1e-12));
  CHECK(lp == doctest::Approx(0.5 * std::sqrt(2.0)));
  // the monotone coupling pays 0.5*1 + 0.5*1 = 1
  const double monotone = 0.5 * cost[0][0] + 0.5 * cost[1][1];
  CHECK(lp < monotone - 1e-6);
  CHECK_THROWS_AS(w_exact_1d(a, b, q), ConfigError);
}

TEST_CASE("metric axioms on random discrete triples") {
  Rng rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = random_measure_1d(rng, 12, 0.0, 1.0);
    const auto b = random_measure_1d(rng, 9, 0.0, 1.0);
    const auto c = random_measure_1d(rng, 15, 0.0, 1.0);
    for (double q : {0.5, 2.0}) {
      const double ab = ot_discrete_exact(a, b, q).value;
      const double ba = ot_discrete_exact(b, a, q).value;
      const double bc = ot_discrete_exact(b, c, q).value;
      const double ac = ot_discrete_exact(a, c, q).value;
      CHECK(ab == doctest::Approx(ba).epsilon(1e-10));
      CHECK(ac <= ab + bc + 1e-9);
    }
  }
}

TEST_CASE("order relation (W_q1)^{1/q1} <= W_1 <= W_q2 for q1 < 1 < q2") {
  Rng rng(37);
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = random_measure_1d(rng, 10, 0.0, 1.0);
    const auto b = random_measure_1d(rng, 10, 0.0, 1.0);
    const double w_half = ot_discrete_exact(a, b, 0.5).value;  // cost itself
    const double w1 = ot_discrete_exact(a, b, 1.0).value;
    const double w2 = ot_discrete_exact(a, b, 2.0).value;
    CHECK(std::pow(w_half, 1.0 / 0.5) <= w1 + 1e-9);
    CHECK(w1 <= w2 + 1e-9);
  }
}

TEST_CASE("variation-norm upper bound for q=2") {
  // W_2(mu,nu)^2 <= diam^2/2 * ||mu-nu||_var on shared atom sets
  Rng rng(41);
  std::vector<Point> atoms(16);
  for (auto& p : atoms) p = Point{rng.uniform(0.0, 1.0), 0, 0, 0};
  std::vector<double> wa(16), wb(16);
  double ta = 0, tb = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    wa[i] = rng.uniform(0.0, 1.0);
    wb[i] = rng.uniform(0.0, 1.0);
    ta += wa[i];
    tb += wb[i];
  }
  for (std::size_t i = 0; i < 16; ++i) {
    wa[i] /= ta;
    wb[i] /= tb;
  }
  double fix_a = 0, fix_b = 0;
  for (std::size_t i = 0; i + 1 < 16; ++i) {
    fix_a += wa[i];
    fix_b += wb[i];
  }
  wa[15] = 1.0 - fix_a;
  wb[15] = 1.0 - fix_b;
  const auto ma = DiscreteMeasure::make(1, atoms, wa);
  const auto mb = DiscreteMeasure::make(1, atoms, wb);
  double var = 0.0;
  for (std::size_t i = 0; i < 16; ++i) var += std::abs(wa[i] - wb[i]);
  const double w2sq = ot_discrete_exact(ma, mb, 2.0).cost;
  CHECK(w2sq <= 0.5 * 1.0 * var + 1e-12);  // diam of [0,1] support is <= 1
}

TEST_CASE("entropic divergence: identical inputs collapse to zero") {
  Rng rng(43);
  const auto a = random_measure_1d(rng, 64, 0.0, 1.0);
  SinkhornOptions opts;
  opts.epsilon = 0.01;
  const auto r = ot_entropic(a, a, 2.0, opts);
  CHECK(std::abs(r.cost) <= 1e-10);
  CHECK(r.value <= 1e-5);
}

TEST_CASE("entropic value approaches the exact cost as eps shrinks") {
  Rng rng(47);
  const auto a = random_measure_1d(rng, 128, 0.0, 1.0);
  const auto b = random_measure_1d(rng, 128, 0.2, 1.2);
  const double exact = ot_discrete_exact(a, b, 2.0).cost;
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double eps : {0.05, 0.01, 0.002}) {
    SinkhornOptions opts;
    opts.epsilon = eps;
    opts.max_iter = 4000;
    const auto r = ot_entropic(a, b, 2.0, opts);
    const double gap = std::abs(r.cost - exact);
    CHECK(gap <= prev_gap * 1.5 + 1e-9);
    prev_gap = gap;
  }
  CHECK(prev_gap < 0.01 * exact);
}

TEST_CASE("sinkhorn reports non-convergence instead of failing") {
  Rng rng(53);
  const auto a = random_measure_1d(rng, 32, 0.0, 1.0);
  const auto b = random_measure_1d(rng, 32, 3.0, 4.0);
  SinkhornOptions opts;
  opts.epsilon = 1e-6;
  opts.max_iter = 3;
  opts.anneal = false;
  const auto r = ot_entropic(a, b, 2.0, opts);
  CHECK_FALSE(r.converged);
  CHECK(r.marginal_error > 0.0);
}

TEST_CASE("w_to_qsd in one dimension") {
  const auto dom = Domain::make(DomainKind::interval, {M_PI}, 32);

  SUBCASE("quantile grid of the target is near zero distance") {
    const auto grid = qsd_quantile_grid(dom, 4096);
    QsdDistanceOptions opts;
    const auto r = w_to_qsd(grid, dom, opts);
    CHECK(r.value < 1e-3 * dom.diameter());
  }

  SUBCASE("point mass: squared distance equals the quadrature moment") {
    const double x0 = 1.1;
    const auto delta = DiscreteMeasure::uniform(1, {Point{x0, 0, 0, 0}});
    QsdDistanceOptions opts;
    const auto r = w_to_qsd(delta, dom, opts);
    // oracle: int (x0-y)^2 dmu0(y) by quadrature
    GaussLegendre gl(512, 0.0, M_PI);
    double moment = 0.0;
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      const double y = gl.nodes[k];
      moment += gl.weights[k] * std::pow(x0 - y, 2) * 2.0 / M_PI *
                std::pow(std::sin(y), 2);
    }
    CHECK(r.cost == doctest::Approx(moment).epsilon(1e-6));
  }

  SUBCASE("method/dimension mismatch") {
    const auto delta = DiscreteMeasure::uniform(1, {Point{1.0, 0, 0, 0}});
    QsdDistanceOptions opts;
    opts.method = TransportMethod::sinkhorn;
    CHECK_THROWS_AS(w_to_qsd(delta, dom, opts), ConfigError);
  }
}

TEST_CASE("w_to_qsd sinkhorn path with two-cloud bias control (d=2)") {
  const auto dom = Domain::make(DomainKind::box, {M_PI, M_PI}, 64);
  const auto cloud = qsd_sample(dom, 500, 777);
  const auto emp = DiscreteMeasure::uniform(2, cloud);
  QsdDistanceOptions opts;
  opts.method = TransportMethod::sinkhorn;
  opts.n_ref = 500;
  opts.seed = 1234;
  opts.sinkhorn.marginal_tol = 1e-6;
  const auto r = w_to_qsd(emp, dom, opts);
  CHECK(r.cost >= -1e-9);
  CHECK(r.bias_estimate > 0.0);
  // a mu0 cloud sits near mu0: distance at the two-cloud noise scale
  CHECK(r.cost < 10.0 * (r.bias_estimate + 1e-4));
}

TEST_CASE("self-consistency decay of the entropic distance in d=3") {
  const auto dom = Domain::make(DomainKind::box, {1.0, 1.0, 1.0}, 32);
  QsdDistanceOptions opts;
  opts.method = TransportMethod::sinkhorn;
  opts.n_ref = 400;
  opts.seed = 5;
  opts.sinkhorn.marginal_tol = 1e-6;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n : {250, 1000}) {
    const auto emp = DiscreteMeasure::uniform(3, qsd_sample(dom, n, 99 + n));
    const auto r = w_to_qsd(emp, dom, opts);
    CHECK(r.cost < prev);
    prev = r.cost;
  }
}

TEST_CASE("empirical matching lower bound scales like N^{-p/d} in d=1") {
  const auto dom = Domain::make(DomainKind::interval, {M_PI}, 16);
  const double p = 0.5;
  std::vector<double> log_n, log_v, wts;
  Rng seed_src(71);
  for (std::size_t n : {250, 500, 1000, 2000}) {
    double acc = 0.0;
    const int reps = 6;
    for (int rep = 0; rep < reps; ++rep) {
      const auto emp = DiscreteMeasure::uniform(
          1, qsd_sample(dom, n, 1000 * n + rep));
      acc += matching_lower_bound(emp, dom, p);
    }
    log_n.push_back(std::log(static_cast<double>(n)));
    log_v.push_back(std::log(acc / reps));
    wts.push_back(1.0);
  }
  const auto fit = weighted_least_squares(log_n, log_v, wts);
  CHECK(std::abs(fit.slope - (-p / 1.0)) < 0.1);
  // fitted constant c = exp(intercept) stays positive and stable
  CHECK(std::exp(fit.intercept) > 0.0);
  CHECK(fit.r_squared > 0.98);
}

TEST_CASE("measure CSV round trip") {
  Rng rng(83);
  const auto m = random_measure_1d(rng, 17, 0.0, 2.0);
  const std::string path = "/tmp/subdiff_measure_test.csv";
  write_measure_csv(path, m);
  const auto back = read_measure_csv(path);
  REQUIRE(back.atoms.size() == m.atoms.size());
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    CHECK(back.atoms[i][0] == m.atoms[i][0]);
    CHECK(back.weights[i] == m.weights[i]);
  }
}

TEST_CASE("measure validation") {
  CHECK_THROWS_AS(DiscreteMeasure::make(1, {Point{0, 0, 0, 0}}, {0.5}),
                  ConfigError);
  CHECK_THROWS_AS(
      DiscreteMeasure::make(1, {Point{0, 0, 0, 0}, Point{1, 0, 0, 0}},
                            {1.5, -0.5}),
      ConfigError);
  CHECK_THROWS_AS(ot_discrete_exact(DiscreteMeasure::uniform(
                                        1, std::vector<Point>(513)),
                                    DiscreteMeasure::uniform(1, {Point{}}),
                                    2.0),
                  ConfigError);
}
