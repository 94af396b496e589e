#include <doctest.h>

#include <cmath>
#include <vector>

#include "subdiff/analysis.hpp"
#include "subdiff/pathsim.hpp"
#include "subdiff/stats.hpp"

using namespace subdiff;

namespace {

const Domain& wide_interval() {
  static const auto dom = Domain::make(DomainKind::interval, {10.0 * M_PI}, 256);
  return dom;
}

}  // namespace

TEST_CASE("deterministic replay: identical seed gives identical paths") {
  const auto& dom = wide_interval();
  const auto fn = BernsteinFn::drift(1.0);
  SimulateOptions opts;
  opts.horizon = 10.0;
  opts.dt = 0.25;
  opts.n_paths = 8;
  opts.mode = ConditioningMode::doob_is;
  opts.seed = 4242;
  const auto a = simulate_paths_collect(dom, fn, NuQsd{}, opts);
  opts.n_threads = 2;  // thread count must not affect content
  const auto b = simulate_paths_collect(dom, fn, NuQsd{}, opts);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].positions.size() == b[i].positions.size());
    for (std::size_t k = 0; k < a[i].positions.size(); ++k)
      CHECK(a[i].positions[k][0] == b[i].positions[k][0]);
    CHECK(a[i].is_weight == b[i].is_weight);
  }
}

TEST_CASE("boundary-concentrated initial law is rejected") {
  const auto& dom = wide_interval();
  SimulateOptions opts;
  opts.horizon = 1.0;
  opts.dt = 0.25;
  opts.n_paths = 1;
  opts.mode = ConditioningMode::rejection;
  CHECK_THROWS_AS(
      simulate_paths_collect(dom, BernsteinFn::drift(1.0),
                             NuPointMass{Point{0.0, 0, 0, 0}}, opts),
      ConfigError);
}

TEST_CASE("rejection acceptance matches the spectral survival probability") {
  const auto& dom = wide_interval();
  const auto fn = BernsteinFn::drift(1.0);
  const auto K = make_kernel(dom, KernelFamily::subordinated, fn);
  SimulateOptions opts;
  opts.horizon = 200.0;
  opts.dt = 0.25;
  opts.n_paths = 6000;
  opts.mode = ConditioningMode::rejection;
  opts.seed = 7;
  const auto paths = simulate_paths_collect(dom, fn, NuQsd{}, opts);
  std::size_t survived = 0;
  for (const auto& p : paths) survived += p.survived ? 1 : 0;
  const double phat = static_cast<double>(survived) / opts.n_paths;
  const double target = K.survival_prob(NuQsd{}, opts.horizon);
  const double se = std::sqrt(target * (1 - target) / opts.n_paths);
  INFO("phat=", phat, " target=", target);
  CHECK(std::abs(phat - target) < 3.0 * se);
}

TEST_CASE("doob importance weights reproduce the survival probability") {
  const auto& dom = wide_interval();
  const auto fn = BernsteinFn::drift(1.0);
  const auto K = make_kernel(dom, KernelFamily::subordinated, fn);
  SimulateOptions opts;
  opts.horizon = 200.0;
  opts.dt = 0.25;
  opts.n_paths = 4000;
  opts.mode = ConditioningMode::doob_is;
  opts.seed = 8;
  const auto paths = simulate_paths_collect(dom, fn, NuQsd{}, opts);
  const auto est = survival_from_doob_paths(dom, fn, paths);
  const double target = K.survival_prob(NuQsd{}, opts.horizon);
  INFO("est=", est.value, " +- ", est.stderr_, " target=", target);
  CHECK(std::abs(est.value - target) < 3.0 * est.stderr_);
}

TEST_CASE("accumulate: atom counts, constant paths, guards") {
  const auto& dom = wide_interval();
  PathSkeleton path;
  path.dt = 0.5;
  path.survived = true;
  const Point x0{15.0, 0, 0, 0};
  for (int k = 0; k <= 20; ++k) path.positions.push_back(x0);

  const auto s = accumulate(dom, path, 5.0, 4);
  CHECK(s.atoms.size() == 10);
  // frozen state: psi_m = (phi_m/phi_0)(x0) exactly
  for (int m = 1; m <= 4; ++m)
    CHECK(s.psi[m - 1] == doctest::Approx(dom.mode_over_ground(m, x0)));

  CHECK_THROWS_AS(accumulate(dom, path, 11.0, 4), ConfigError);
  path.survived = false;
  // kill lies in (10, 10.5]: averaging to t = 10 is still conditioned-valid,
  // t = 10.5 is not
  CHECK(accumulate(dom, path, 10.0, 4).atoms.size() == 20);
  CHECK_THROWS_AS(accumulate(dom, path, 10.5, 4), ConfigError);
  CHECK(accumulate(dom, path, 9.5, 4).atoms.size() == 19);
}

TEST_CASE("discretization order of the time average is O(dt)") {
  // decimate one fine path to coarser grids: common random numbers make the
  // Riemann-rule differences visible. RMS over paths of psi(2 dt) - psi(dt)
  // should halve per refinement (slope ~ 1).
  const auto& dom = wide_interval();
  const auto fn = BernsteinFn::drift(1.0);
  SimulateOptions opts;
  opts.horizon = 50.0;
  opts.dt = 0.125;
  opts.mode = ConditioningMode::doob_is;
  opts.n_paths = 200;
  opts.seed = 99;
  const auto paths = simulate_paths_collect(dom, fn, NuQsd{}, opts);

  const auto decimated_psi = [&](const PathSkeleton& p, std::size_t stride) {
    PathSkeleton q;
    q.dt = p.dt * static_cast<double>(stride);
    q.survived = true;
    for (std::size_t k = 0; k < p.positions.size(); k += stride)
      q.positions.push_back(p.positions[k]);
    return accumulate(dom, q, opts.horizon, 1).psi[0];
  };

  double rms1 = 0.0, rms2 = 0.0;  // (dt=1 vs 0.5), (0.5 vs 0.25)
  for (const auto& p : paths) {
    const double p8 = decimated_psi(p, 8), p4 = decimated_psi(p, 4),
                 p2 = decimated_psi(p, 2);
    rms1 += (p8 - p4) * (p8 - p4);
    rms2 += (p4 - p2) * (p4 - p2);
  }
  rms1 = std::sqrt(rms1 / static_cast<double>(paths.size()));
  rms2 = std::sqrt(rms2 / static_cast<double>(paths.size()));
  const double slope = std::log2(rms1 / rms2);
  INFO("rms(dt=1 vs .5)=", rms1, " rms(.5 vs .25)=", rms2, " slope=", slope);
  CHECK(slope > 0.5);
  CHECK(slope < 1.6);
}

TEST_CASE("conditional estimate of a constant is exact") {
  const auto& dom = wide_interval();
  const auto fn = BernsteinFn::drift(1.0);
  SimulateOptions opts;
  opts.horizon = 20.0;
  opts.dt = 0.5;
  opts.n_paths = 200;
  opts.seed = 3;
  for (auto mode : {ConditioningMode::rejection, ConditioningMode::doob_is}) {
    opts.mode = mode;
    const auto est = conditional_estimate(
        [](const EmpiricalSummary&) { return 1.0; }, dom, fn, NuQsd{}, 20.0,
        opts, 0);
    CHECK(est.value == doctest::Approx(1.0));
    CHECK(est.stderr_ == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("rejection and doob_is estimators agree on psi_1^2") {
  const auto& dom = wide_interval();
  const auto fn = BernsteinFn::drift(1.0);
  const auto functional = [](const EmpiricalSummary& s) {
    return s.psi[0] * s.psi[0];
  };
  SimulateOptions opts;
  opts.horizon = 60.0;
  opts.dt = 0.25;
  opts.seed = 11;
  opts.mode = ConditioningMode::rejection;
  opts.n_paths = 4000;
  const auto rej =
      conditional_estimate(functional, dom, fn, NuQsd{}, 60.0, opts, 1);
  opts.mode = ConditioningMode::doob_is;
  opts.n_paths = 4000;
  opts.seed = 12;
  const auto imp =
      conditional_estimate(functional, dom, fn, NuQsd{}, 60.0, opts, 1);
  const double tol =
      3.0 * std::sqrt(rej.stderr_ * rej.stderr_ + imp.stderr_ * imp.stderr_);
  INFO("rejection=", rej.value, "+-", rej.stderr_, " doob=", imp.value, "+-",
       imp.stderr_);
  CHECK(std::abs(rej.value - imp.value) < tol);
  CHECK(rej.acceptance_rate > 0.5);  // mild killing at this horizon
}

TEST_CASE("mode variance limit: t E[psi_m^2 | survival] near 2/(B gap)") {
  const auto& dom = wide_interval();
  const auto fn = BernsteinFn::drift(1.0);
  SimulateOptions opts;
  opts.horizon = 400.0;
  opts.dt = 0.25;
  opts.n_paths = 2000;
  opts.seed = 21;
  opts.mode = ConditioningMode::doob_is;
  for (int m : {1, 2}) {
    const auto est = conditional_estimate(
        [m](const EmpiricalSummary& s) {
          return s.psi[m - 1] * s.psi[m - 1];
        },
        dom, fn, NuQsd{}, opts.horizon, opts, m);
    const double target = mode_variance_target(dom, fn, m);
    // finite-horizon version of the same identity:
    // t E[psi^2] -> (2/a)(1 - (1 - e^{-a t})/(a t)), a = B(l_m) - B(l_0)
    const double a = fn(dom.eigenvalue(m)) - fn(dom.lambda0());
    const double at = a * opts.horizon;
    const double finite_t = target * (1.0 - (1.0 - std::exp(-at)) / at);
    const double got = opts.horizon * est.value;
    INFO("m=", m, " got=", got, " finite-t target=", finite_t,
         " limit=", target);
    CHECK(std::abs(got - finite_t) <
          std::max(0.03 * target, 4.0 * opts.horizon * est.stderr_));
  }
}

TEST_CASE("markov consistency: restart from a mid-path state") {
  const auto& dom = wide_interval();
  const auto fn = BernsteinFn::stable(0.75);
  SimulateOptions opts;
  opts.horizon = 12.0;
  opts.dt = 0.5;
  opts.n_paths = 4000;
  opts.mode = ConditioningMode::doob_is;
  opts.seed = 31;
  const auto paths = simulate_paths_collect(dom, fn, NuQsd{}, opts);
  // marginal at time 12 from full paths
  std::vector<double> direct;
  for (const auto& p : paths) direct.push_back(p.positions.back()[0]);
  // restart: state at time 6 used as a point initial law for 6 more units
  std::vector<double> restarted;
  SimulateOptions opts2 = opts;
  opts2.horizon = 6.0;
  opts2.n_paths = 1;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    opts2.seed = 100000 + i;
    const auto cont = simulate_paths_collect(
        dom, fn, NuPointMass{paths[i].positions[12]}, opts2);
    restarted.push_back(cont[0].positions.back()[0]);
  }
  CHECK(ks_test_two_sample(direct, restarted) > 1e-3);
}

TEST_CASE("composition simulator validates against the spectral chain") {
  const auto dom = Domain::make(DomainKind::interval, {M_PI}, 256);
  const auto fn = BernsteinFn::stable(0.75);
  const auto K = make_kernel(dom, KernelFamily::subordinated, fn);
  const double T = 4.0, dt = 0.5;
  const double x0 = 1.2;

  // spectral marginal sample at T/2 among survivors + survival frequency
  SimulateOptions opts;
  opts.horizon = T;
  opts.dt = dt;
  opts.n_paths = 10000;
  opts.mode = ConditioningMode::rejection;
  opts.seed = 41;
  opts.backend = StepBackend::spectral;
  const auto spectral =
      simulate_paths_collect(dom, fn, NuPointMass{Point{x0, 0, 0, 0}}, opts);

  std::vector<double> mid_spec, mid_comp;
  std::size_t surv_spec = 0, surv_comp = 0;
  const std::size_t mid_index = 4;  // time 2.0
  for (const auto& p : spectral) {
    if (p.positions.size() > mid_index) mid_spec.push_back(p.positions[mid_index][0]);
    surv_spec += p.survived ? 1 : 0;
  }
  for (std::size_t i = 0; i < 10000; ++i) {
    const auto p = composition_simulate(dom, fn, x0, T, dt, 9000 + i);
    if (p.positions.size() > mid_index) mid_comp.push_back(p.positions[mid_index][0]);
    surv_comp += p.survived ? 1 : 0;
  }
  // two-sample KS on the mid-time marginal among survivors
  CHECK(ks_test_two_sample(mid_spec, mid_comp) > 1e-3);
  // survival frequencies agree with the kernel quadrature
  const double target = K.survival_prob(NuPointMass{Point{x0, 0, 0, 0}}, T);
  for (const double s : {surv_spec, surv_comp}) {
    const double phat = static_cast<double>(s) / 10000.0;
    CHECK(std::abs(phat - target) <
          3.5 * std::sqrt(target * (1 - target) / 10000.0));
  }
}

TEST_CASE("composition simulator with drift B reduces to the killed diffusion") {
  const auto dom = Domain::make(DomainKind::interval, {M_PI}, 256);
  const auto fn = BernsteinFn::drift(1.0);
  const auto Kd = make_kernel(dom, KernelFamily::dirichlet);
  const double T = 1.0, dt = 0.25;
  std::size_t surv = 0;
  const std::size_t n = 20000;
  for (std::size_t i = 0; i < n; ++i)
    surv += composition_simulate(dom, fn, 1.5, T, dt, 333 + i).survived ? 1 : 0;
  const double target = Kd.survival_prob(NuPointMass{Point{1.5, 0, 0, 0}}, T);
  const double phat = static_cast<double>(surv) / n;
  CHECK(std::abs(phat - target) < 3.5 * std::sqrt(target * (1 - target) / n));
}

TEST_CASE("unsupported kinds raise for the composition simulator") {
  const auto dom = Domain::make(DomainKind::interval, {M_PI}, 64);
  CHECK_THROWS_AS(
      composition_simulate(dom, BernsteinFn::remark_example(0.5), 1.0, 1.0,
                           0.25, 1),
      UnsupportedSamplerError);
}
