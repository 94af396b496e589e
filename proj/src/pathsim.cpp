#include "subdiff/pathsim.hpp"

#include <atomic>
#include <cmath>
#include <memory>
#include <mutex>
#include <thread>

namespace subdiff {

namespace {

std::size_t steps_for(double horizon, double dt) {
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (!(horizon > 0.0) || !(dt > 0.0) || std::abs(ratio - rounded) > 1e-9)
    throw ConfigError("simulate: horizon must be a positive multiple of dt");
  return static_cast<std::size_t>(rounded);
}

std::string nu_tag(const NuSpec& nu) {
  if (std::holds_alternative<NuPointMass>(nu)) return "point";
  if (std::holds_alternative<NuQsd>(nu)) return "qsd";
  if (std::holds_alternative<NuGroundBiased>(nu)) return "ground_biased";
  return "density";
}

// Unified one-step interface over the spectral and composition backends.
// Owns the kernel behind a stable address; samplers point into it.
struct Stepper {
  std::shared_ptr<const KernelEval> kernel;
  std::shared_ptr<const StepSampler> spectral_killed;
  std::shared_ptr<const DoobStepSampler> spectral_doob;
  std::shared_ptr<const CompositionStepper> composition;

  std::optional<Point> advance(const Point& x, Rng& rng) const {
    if (spectral_killed) return spectral_killed->step(x, rng);
    if (spectral_doob) return spectral_doob->step(x, rng);
    return composition->step(x, rng);
  }
};

Stepper make_stepper(const Domain& domain, const BernsteinFn& fn,
                     ConditioningMode mode, double dt, StepBackend backend) {
  Stepper s;
  const bool doob = mode == ConditioningMode::doob_is;
  if (backend != StepBackend::composition) {
    try {
      s.kernel = std::make_shared<const KernelEval>(
          domain, KernelFamily::subordinated, fn);
      if (doob)
        s.spectral_doob = std::make_shared<const DoobStepSampler>(*s.kernel, dt);
      else
        s.spectral_killed = std::make_shared<const StepSampler>(*s.kernel, dt);
      return s;
    } catch (const TruncationError&) {
      if (backend == StepBackend::spectral) throw;
      s.kernel.reset();
    }
  }
  s.composition = std::make_shared<const CompositionStepper>(domain, fn, dt, doob);
  return s;
}

}  // namespace

void simulate_paths(
    const Domain& domain, const BernsteinFn& fn, const NuSpec& nu,
    const SimulateOptions& opts,
    const std::function<void(std::size_t, const PathSkeleton&)>& consume) {
  const std::size_t n_steps = steps_for(opts.horizon, opts.dt);
  if (opts.n_paths < 1) throw ConfigError("simulate: n_paths must be >= 1");
  const Stepper stepper =
      make_stepper(domain, fn, opts.mode, opts.dt, opts.backend);
  const bool doob = opts.mode == ConditioningMode::doob_is;
  const std::string tag = nu_tag(nu);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> survived_count{0};
  std::atomic<bool> abort_low_acceptance{false};

  const auto worker = [&]() {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= opts.n_paths) return;
      if (abort_low_acceptance.load()) return;
      Rng rng = Rng::for_stream(opts.seed, index);
      PathSkeleton path;
      path.dt = opts.dt;
      path.initial_law = tag;
      path.path_seed = index;
      path.positions.reserve(n_steps + 1);
      Point x = sample_initial(nu, domain, rng);
      path.positions.push_back(x);
      for (std::size_t k = 0; k < n_steps; ++k) {
        const auto y = stepper.advance(x, rng);
        if (!y) {
          path.survived = false;
          break;
        }
        x = *y;
        path.positions.push_back(x);
      }
      if (doob && path.survived)
        path.is_weight = domain.ground(path.positions.front()) /
                         domain.ground(path.positions.back());
      if (path.survived) survived_count.fetch_add(1);
      consume(index, path);
      // rejection feasibility watchdog
      if (!doob && index >= 20000 && index % 4096 == 0) {
        const double rate = static_cast<double>(survived_count.load()) /
                            static_cast<double>(index + 1);
        if (rate < 1e-4) abort_low_acceptance.store(true);
      }
    }
  };

  const int n_threads = std::max(1, opts.n_threads);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (abort_low_acceptance.load())
    throw InfeasibleError(
        "rejection acceptance below 1e-4: rescale the domain (interval "
        "[0, L pi] gives lambda_0 = 1/L^2) or switch to doob_is mode");
}

std::vector<PathSkeleton> simulate_paths_collect(const Domain& domain,
                                                 const BernsteinFn& fn,
                                                 const NuSpec& nu,
                                                 const SimulateOptions& opts) {
  std::vector<PathSkeleton> out(opts.n_paths);
  std::mutex m;
  simulate_paths(domain, fn, nu, opts,
                 [&](std::size_t index, const PathSkeleton& p) {
                   std::lock_guard<std::mutex> lock(m);
                   out[index] = p;
                 });
  return out;
}

EmpiricalSummary accumulate(const Domain& domain, const PathSkeleton& path,
                            double t, int m_psi) {
  if (!(t > 0.0)) throw ConfigError("accumulate: t must be positive");
  const double ratio = t / path.dt;
  const std::size_t n_atoms = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
  if (n_atoms > path.positions.size() ||
      (n_atoms == path.positions.size() && !path.survived))
    throw ConfigError("accumulate: t exceeds the simulated path extent");
  if (m_psi < 0 || m_psi > domain.m_trunc())
    throw ConfigError("accumulate: m_psi out of range");

  EmpiricalSummary s;
  s.t = t;
  s.atoms.assign(path.positions.begin(),
                 path.positions.begin() + static_cast<std::ptrdiff_t>(n_atoms));
  s.psi.assign(static_cast<std::size_t>(m_psi), 0.0);
  for (const auto& x : s.atoms)
    for (int m = 1; m <= m_psi; ++m)
      s.psi[static_cast<std::size_t>(m - 1)] += domain.mode_over_ground(m, x);
  for (auto& v : s.psi) v /= static_cast<double>(n_atoms);
  return s;
}

Estimate weighted_ratio_estimate(const std::vector<double>& weights,
                                 const std::vector<double>& values) {
  // self-normalized importance sampling with delta-method stderr
  if (weights.size() != values.size() || weights.empty())
    throw ConfigError("ratio estimate: size mismatch");
  const std::size_t n = weights.size();
  std::vector<double> wf(n);
  for (std::size_t i = 0; i < n; ++i) wf[i] = weights[i] * values[i];
  const auto mw = mean_stderr(weights);
  const auto mwf = mean_stderr(wf);
  Estimate e;
  e.mode = ConditioningMode::doob_is;
  e.value = mwf.mean / mw.mean;
  double cov = 0.0, vw = 0.0, vwf = 0.0, w2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (wf[i] - mwf.mean) * (weights[i] - mw.mean);
    vw += (weights[i] - mw.mean) * (weights[i] - mw.mean);
    vwf += (wf[i] - mwf.mean) * (wf[i] - mwf.mean);
    w2 += weights[i] * weights[i];
  }
  const double dn = static_cast<double>(n);
  cov /= dn - 1;
  vw /= dn - 1;
  vwf /= dn - 1;
  const double var_ratio =
      (vwf - 2.0 * e.value * cov + e.value * e.value * vw) /
      (mw.mean * mw.mean * dn);
  e.stderr_ = std::sqrt(std::max(var_ratio, 0.0));
  const double wsum = mw.mean * dn;
  e.n_effective = w2 > 0.0 ? wsum * wsum / w2 : 0.0;
  e.low_confidence = e.n_effective < 30.0;
  return e;
}

Estimate conditional_estimate(
    const std::function<double(const EmpiricalSummary&)>& functional,
    const Domain& domain, const BernsteinFn& fn, const NuSpec& nu, double t,
    const SimulateOptions& opts, int m_psi) {
  if (t > opts.horizon + 1e-12)
    throw ConfigError("conditional_estimate: t must not exceed the horizon T");
  std::vector<double> values;
  std::vector<double> weights;
  values.reserve(opts.n_paths);
  std::size_t n_killed = 0;
  std::mutex m;
  simulate_paths(domain, fn, nu, opts,
                 [&](std::size_t, const PathSkeleton& p) {
                   if (!p.survived) {
                     std::lock_guard<std::mutex> lock(m);
                     ++n_killed;
                     return;
                   }
                   const auto summary = accumulate(domain, p, t, m_psi);
                   const double v = functional(summary);
                   std::lock_guard<std::mutex> lock(m);
                   values.push_back(v);
                   if (p.is_weight) weights.push_back(*p.is_weight);
                 });

  if (opts.mode == ConditioningMode::rejection) {
    if (values.empty())
      throw InfeasibleError("conditional_estimate: zero accepted paths");
    const auto ms = mean_stderr(values);
    Estimate e;
    e.mode = ConditioningMode::rejection;
    e.value = ms.mean;
    e.stderr_ = ms.stderr_;
    e.n_effective = static_cast<double>(values.size());
    e.acceptance_rate = static_cast<double>(values.size()) /
                        static_cast<double>(opts.n_paths);
    e.low_confidence = e.n_effective < 30.0;
    return e;
  }
  Estimate e = weighted_ratio_estimate(weights, values);
  e.acceptance_rate = 1.0;
  return e;
}

PathSkeleton composition_simulate(const Domain& domain, const BernsteinFn& fn,
                                  double x0, double horizon, double dt,
                                  std::uint64_t seed) {
  if (domain.dim() != 1)
    throw ConfigError("composition_simulate: d = 1 only");
  if (fn.sampler_kind() != SamplerKind::exact)
    throw UnsupportedSamplerError(
        "composition_simulate: B lacks an exact increment sampler");
  const std::size_t n_steps = steps_for(horizon, dt);
  const double len = domain.lengths()[0];
  if (!(x0 > 0.0 && x0 < len))
    throw ConfigError("composition_simulate: x0 must be interior");

  Rng rng(seed ^ 0x5eed5eedULL);
  PathSkeleton path;
  path.dt = dt;
  path.initial_law = "point";
  path.path_seed = seed;
  path.positions.push_back(Point{x0, 0, 0, 0});

  const double lambda0 = domain.lambda0();
  double w = x0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double ds = fn.sample_increment(dt, rng);
    if (lambda0 * ds > 200.0) {  // survival < e^{-200}; the clock outran the box
      path.survived = false;
      break;
    }
    // fine Brownian grid over the increment, generator Delta (variance 2h)
    const std::size_t nsub = std::max<std::size_t>(
        32, static_cast<std::size_t>(std::ceil(ds / (0.005 * len * len))));
    const double h = ds / static_cast<double>(nsub);
    bool killed = false;
    for (std::size_t sub = 0; sub < nsub; ++sub) {
      const double wn = w + std::sqrt(2.0 * h) * rng.normal();
      if (wn <= 0.0 || wn >= len) {
        killed = true;
        break;
      }
      // Brownian-bridge crossing probabilities for both boundaries
      const double p0 = std::exp(-w * wn / h);
      const double pl = std::exp(-(len - w) * (len - wn) / h);
      if (rng.uniform() < p0 + pl - p0 * pl) {
        killed = true;
        break;
      }
      w = wn;
    }
    if (killed) {
      path.survived = false;
      break;
    }
    path.positions.push_back(Point{w, 0, 0, 0});
  }
  return path;
}

Estimate survival_from_doob_paths(const Domain& domain, const BernsteinFn& fn,
                                  const std::vector<PathSkeleton>& paths) {
  if (paths.empty()) throw ConfigError("survival estimate needs paths");
  std::vector<double> vals;
  vals.reserve(paths.size());
  const double lambda0 = domain.lambda0();
  for (const auto& p : paths) {
    if (!p.is_weight)
      throw ConfigError("survival_from_doob_paths: paths lack weights");
    const double T =
        p.dt * static_cast<double>(p.positions.size() - 1);
    vals.push_back(std::exp(-fn(lambda0) * T) * (*p.is_weight));
  }
  const auto ms = mean_stderr(vals);
  Estimate e;
  e.mode = ConditioningMode::doob_is;
  e.value = ms.mean;
  e.stderr_ = ms.stderr_;
  e.n_effective = static_cast<double>(vals.size());
  return e;
}

}  // namespace subdiff
