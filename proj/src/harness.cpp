#include "subdiff/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

#include "subdiff/stats.hpp"

namespace subdiff {

namespace {

std::string mode_name(ConditioningMode m) {
  return m == ConditioningMode::rejection ? "rejection" : "doob_is";
}

std::string method_name(TransportMethod m) {
  switch (m) {
    case TransportMethod::quantile:
      return "quantile";
    case TransportMethod::exact_lp:
      return "exact_lp";
    case TransportMethod::sinkhorn:
      return "sinkhorn";
  }
  return "?";
}

TransportMethod method_from_name(const std::string& s) {
  if (s == "quantile") return TransportMethod::quantile;
  if (s == "exact_lp") return TransportMethod::exact_lp;
  if (s == "sinkhorn") return TransportMethod::sinkhorn;
  throw ConfigError("unknown ot method '" + s + "'");
}

StepBackend backend_from_name(const std::string& s) {
  if (s == "auto") return StepBackend::automatic;
  if (s == "spectral") return StepBackend::spectral;
  if (s == "composition") return StepBackend::composition;
  throw ConfigError("unknown backend '" + s + "'");
}

std::string backend_name(StepBackend b) {
  switch (b) {
    case StepBackend::automatic:
      return "auto";
    case StepBackend::spectral:
      return "spectral";
    case StepBackend::composition:
      return "composition";
  }
  return "?";
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
  return nlohmann::json{
      {"experiment_id", experiment_id},
      {"domain", domain_spec},
      {"bernstein", bernstein_spec},
      {"nu", nu_spec},
      {"t_grid", t_grid},
      {"t_multipliers", t_multipliers},
      {"dt", dt},
      {"n_paths", n_paths},
      {"mode", mode_name(mode)},
      {"backend", backend_name(backend)},
      {"ot",
       {{"method", method_name(ot_method)},
        {"q", ot_q},
        {"n_ref", n_ref},
        {"epsilon", sinkhorn_epsilon},
        {"marginal_tol", sinkhorn_marginal_tol},
        {"max_iter", sinkhorn_max_iter}}},
      {"m_psi", m_psi},
      {"seed", seed},
      {"out_dir", out_dir},
      {"threads", n_threads},
      {"cache_paths", cache_paths}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.experiment_id = j.value("experiment_id", std::string("exp"));
  c.domain_spec = j.at("domain");
  c.bernstein_spec = j.at("bernstein");
  c.nu_spec = j.value("nu", nlohmann::json{{"kind", "qsd"}});
  c.t_grid = j.at("t_grid").get<std::vector<double>>();
  c.t_multipliers =
      j.value("t_multipliers", std::vector<double>{1.0});
  c.dt = j.at("dt").get<double>();
  c.n_paths = j.at("n_paths").get<std::size_t>();
  const std::string mode = j.value("mode", std::string("doob_is"));
  if (mode != "doob_is" && mode != "rejection")
    throw ConfigError("unknown mode '" + mode + "'");
  c.mode = mode == "rejection" ? ConditioningMode::rejection
                               : ConditioningMode::doob_is;
  c.backend = backend_from_name(j.value("backend", std::string("auto")));
  if (j.contains("ot")) {
    const auto& ot = j.at("ot");
    c.ot_method = method_from_name(ot.value("method", std::string("quantile")));
    c.ot_q = ot.value("q", 2.0);
    c.n_ref = ot.value("n_ref", static_cast<std::size_t>(2048));
    c.sinkhorn_epsilon = ot.value("epsilon", 0.0);
    c.sinkhorn_marginal_tol = ot.value("marginal_tol", 1e-8);
    c.sinkhorn_max_iter = ot.value("max_iter", 2000);
  }
  c.m_psi = j.value("m_psi", 8);
  c.seed = j.value("seed", static_cast<std::uint64_t>(1));
  c.out_dir = j.value("out_dir", std::string("."));
  c.n_threads = j.value("threads", 1);
  c.cache_paths = j.value("cache_paths", false);
  return c;
}

NuSpec ExperimentConfig::make_nu() const {
  const std::string kind = nu_spec.value("kind", std::string("qsd"));
  if (kind == "qsd") return NuQsd{};
  if (kind == "ground_biased") return NuGroundBiased{};
  if (kind == "point") {
    const auto coords = nu_spec.at("x").get<std::vector<double>>();
    Point p{0, 0, 0, 0};
    for (std::size_t i = 0; i < coords.size() && i < 4; ++i) p[static_cast<int>(i)] = coords[i];
    return NuPointMass{p};
  }
  throw ConfigError("unknown nu kind '" + kind + "'");
}

void ExperimentConfig::validate() const {
  if (n_paths < 1) throw ConfigError("config: n_paths must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("config: dt must be positive");
  if (t_grid.empty()) throw ConfigError("config: empty t grid");
  double prev = 0.0;
  for (double t : t_grid) {
    if (!(t > prev)) throw ConfigError("config: t grid must be strictly increasing");
    const double k = t / dt;
    if (std::abs(k - std::round(k)) > 1e-9)
      throw ConfigError("config: every t must be a multiple of dt");
    prev = t;
  }
  for (double m : t_multipliers)
    if (m < 1.0) throw ConfigError("config: T multipliers must be >= 1");
  if (m_psi < 0) throw ConfigError("config: m_psi must be >= 0");
  Domain::from_json(domain_spec);          // validates
  BernsteinFn::from_json(bernstein_spec);  // validates
}

std::uint64_t ExperimentConfig::simulation_hash() const {
  nlohmann::json j{{"domain", domain_spec},  {"bernstein", bernstein_spec},
                   {"nu", nu_spec},          {"t_grid", t_grid},
                   {"mult", t_multipliers},  {"dt", dt},
                   {"n_paths", n_paths},     {"mode", mode_name(mode)},
                   {"backend", backend_name(backend)}, {"seed", seed}};
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Path cache.
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kCacheMagic = 0x53445043;  // "SDPC"
constexpr std::uint32_t kCacheVersion = 1;

void write_path_cache(const std::string& path, double dt, int dim,
                      const std::vector<PathSkeleton>& paths) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InfeasibleError("cannot write path cache " + path);
  const auto put = [&](const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  const std::uint64_t count = paths.size();
  const std::uint32_t dim32 = static_cast<std::uint32_t>(dim);
  put(&kCacheMagic, 4);
  put(&kCacheVersion, 4);
  put(&count, 8);
  put(&dim32, 4);
  put(&dt, 8);
  for (const auto& p : paths) {
    const std::uint64_t seed = p.path_seed;
    const std::uint8_t survived = p.survived ? 1 : 0;
    const double weight =
        p.is_weight ? *p.is_weight : std::numeric_limits<double>::quiet_NaN();
    const std::uint64_t n_pos = p.positions.size();
    put(&seed, 8);
    put(&survived, 1);
    put(&weight, 8);
    put(&n_pos, 8);
    for (const auto& x : p.positions)
      for (int jdim = 0; jdim < dim; ++jdim) put(&x[jdim], 8);
  }
}

std::optional<std::vector<PathSkeleton>> load_path_cache(
    const std::string& path, double dt, int dim, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  const auto get = [&](void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    return static_cast<bool>(in);
  };
  std::uint32_t magic = 0, version = 0, dim32 = 0;
  std::uint64_t count = 0;
  double file_dt = 0;
  if (!get(&magic, 4) || magic != kCacheMagic) return std::nullopt;
  if (!get(&version, 4) || version != kCacheVersion) return std::nullopt;
  if (!get(&count, 8) || count != expected) return std::nullopt;
  if (!get(&dim32, 4) || static_cast<int>(dim32) != dim) return std::nullopt;
  if (!get(&file_dt, 8) || file_dt != dt) return std::nullopt;
  std::vector<PathSkeleton> paths(count);
  for (auto& p : paths) {
    std::uint64_t seed = 0, n_pos = 0;
    std::uint8_t survived = 0;
    double weight = 0;
    if (!get(&seed, 8) || !get(&survived, 1) || !get(&weight, 8) ||
        !get(&n_pos, 8))
      return std::nullopt;
    p.path_seed = seed;
    p.survived = survived != 0;
    p.dt = dt;
    if (!std::isnan(weight)) p.is_weight = weight;
    p.positions.resize(n_pos, Point{0, 0, 0, 0});
    for (auto& x : p.positions)
      for (int jdim = 0; jdim < dim; ++jdim)
        if (!get(&x[jdim], 8)) return std::nullopt;
  }
  return paths;
}

// Per-t transport context for d >= 2 sample-based targets.
struct RefContext {
  DiscreteMeasure ref1 = DiscreteMeasure::uniform(1, {Point{0.5, 0, 0, 0}});
  double epsilon = 0.0;
  double half_bb = 0.0;    // OT_eps(ref1, ref1) / 2
  double half_bias = 0.0;  // S_eps(ref1, ref2) / 2
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Domain domain = cfg.make_domain();
  const BernsteinFn fn = cfg.make_bernstein();
  const NuSpec nu = cfg.make_nu();
  const double rate0 = fn(domain.lambda0());

  const std::size_t n_t = cfg.t_grid.size();
  const std::size_t n_mult = cfg.t_multipliers.size();
  std::vector<std::vector<double>> T_grid(n_t, std::vector<double>(n_mult));
  double t_max_horizon = 0.0;
  for (std::size_t i = 0; i < n_t; ++i)
    for (std::size_t k = 0; k < n_mult; ++k) {
      double T = std::round(cfg.t_multipliers[k] * cfg.t_grid[i] / cfg.dt) *
                 cfg.dt;
      T = std::max(T, cfg.t_grid[i]);
      T_grid[i][k] = T;
      t_max_horizon = std::max(t_max_horizon, T);
    }

  // feasibility pre-check for rejection conditioning
  if (cfg.mode == ConditioningMode::rejection) {
    try {
      const auto K = make_kernel(domain, KernelFamily::subordinated, fn);
      K.require_truncation(t_max_horizon);
      if (K.survival_prob(nu, t_max_horizon) < 1e-4)
        throw InfeasibleError(
            "rejection acceptance below 1e-4 at the largest horizon; rescale "
            "the domain or run doob_is");
    } catch (const TruncationError&) {
      // no spectral estimate available; the runtime watchdog still guards
    }
  }

  // per-t reference context for sample-based OT methods
  std::vector<RefContext> refs(n_t);
  if (cfg.ot_method == TransportMethod::sinkhorn) {
    if (domain.dim() < 2)
      throw ConfigError("config: sinkhorn path is for d >= 2 (use quantile)");
    for (std::size_t i = 0; i < n_t; ++i) {
      RefContext& rc = refs[i];
      rc.ref1 = DiscreteMeasure::uniform(
          domain.dim(), qsd_sample(domain, cfg.n_ref, cfg.seed ^ (0xABCD + i)));
      const auto ref2 = DiscreteMeasure::uniform(
          domain.dim(),
          qsd_sample(domain, cfg.n_ref, cfg.seed ^ (0xDCBA + 7 * i)));
      if (cfg.sinkhorn_epsilon > 0.0) {
        rc.epsilon = cfg.sinkhorn_epsilon;
      } else {
        double acc = 0.0;  // mean nearest-neighbor cost of the reference cloud
        for (std::size_t a = 0; a < rc.ref1.atoms.size(); ++a) {
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t b = 0; b < rc.ref1.atoms.size(); ++b)
            if (a != b)
              best = std::min(best, euclidean_distance(rc.ref1.atoms[a],
                                                       rc.ref1.atoms[b],
                                                       domain.dim()));
          acc += std::pow(best, cfg.ot_q);
        }
        rc.epsilon = std::max(1e-10, 0.01 * acc / rc.ref1.atoms.size());
      }
      SinkhornOptions so;
      so.epsilon = rc.epsilon;
      so.max_iter = cfg.sinkhorn_max_iter;
      so.marginal_tol = cfg.sinkhorn_marginal_tol;
      rc.half_bb = 0.5 * entropic_self_cost(rc.ref1, cfg.ot_q, so);
      SinkhornOptions sd = so;
      sd.debias = true;
      rc.half_bias =
          0.5 * std::max(ot_entropic(rc.ref1, ref2, cfg.ot_q, sd).cost, 0.0);
    }
  } else if (cfg.ot_method == TransportMethod::exact_lp) {
    for (std::size_t i = 0; i < n_t; ++i)
      refs[i].ref1 = DiscreteMeasure::uniform(
          domain.dim(), qsd_sample(domain, cfg.n_ref, cfg.seed ^ (0xABCD + i)));
  } else if (domain.dim() != 1) {
    throw ConfigError("config: quantile method requires d = 1");
  }

  QsdMeasure qsd_target(domain);
  Continuous1d target1d;
  if (domain.dim() == 1) {
    target1d.quantile = [qsd_target](double u) {
      return qsd_target.axis_quantile(0, u);
    };
    target1d.density = [qsd_target](double y) {
      return qsd_target.density(Point{y, 0, 0, 0});
    };
  }

  // per-path slots; NaN marks "not conditioned-valid at this (t,T)"
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> val(cfg.n_paths * n_t, nan);
  std::vector<double> psi2(cfg.n_paths * n_t * static_cast<std::size_t>(cfg.m_psi), nan);
  std::vector<double> cond(cfg.n_paths * n_t * n_mult, nan);

  const auto consume = [&](std::size_t index, const PathSkeleton& path) {
    for (std::size_t i = 0; i < n_t; ++i) {
      const double t = cfg.t_grid[i];
      const std::size_t need_atoms =
          static_cast<std::size_t>(std::round(t / cfg.dt));
      const bool valid_at_t =
          path.positions.size() > need_atoms ||
          (path.positions.size() == need_atoms && path.survived);
      if (!valid_at_t) continue;
      const auto summary = accumulate(domain, path, t, cfg.m_psi);
      double cost = nan;
      const auto emp = DiscreteMeasure::uniform(domain.dim(), summary.atoms);
      switch (cfg.ot_method) {
        case TransportMethod::quantile:
          cost = w_exact_1d_vs_density(emp, target1d, cfg.ot_q).cost;
          break;
        case TransportMethod::exact_lp:
          cost = ot_discrete_exact(emp, refs[i].ref1, cfg.ot_q).cost;
          break;
        case TransportMethod::sinkhorn: {
          SinkhornOptions so;
          so.epsilon = refs[i].epsilon;
          so.max_iter = cfg.sinkhorn_max_iter;
          so.marginal_tol = cfg.sinkhorn_marginal_tol;
          so.debias = false;
          const double ab = ot_entropic(emp, refs[i].ref1, cfg.ot_q, so).cost;
          const double aa = entropic_self_cost(emp, cfg.ot_q, so);
          // debiased divergence minus the two-cloud reference bias estimate
          cost = ab - 0.5 * aa - refs[i].half_bb - refs[i].half_bias;
          break;
        }
      }
      val[index * n_t + i] = cost;
      for (int m = 0; m < cfg.m_psi; ++m)
        psi2[(index * n_t + i) * static_cast<std::size_t>(cfg.m_psi) +
             static_cast<std::size_t>(m)] =
            summary.psi[static_cast<std::size_t>(m)] *
            summary.psi[static_cast<std::size_t>(m)];
      for (std::size_t k = 0; k < n_mult; ++k) {
        const double T = T_grid[i][k];
        const std::size_t t_idx =
            static_cast<std::size_t>(std::round(T / cfg.dt));
        if (path.positions.size() <= t_idx) continue;  // died before T
        if (cfg.mode == ConditioningMode::rejection) {
          cond[(index * n_t + i) * n_mult + k] = 1.0;
        } else {
          cond[(index * n_t + i) * n_mult + k] =
              domain.ground(path.positions.front()) /
              domain.ground(path.positions[t_idx]);
        }
      }
    }
  };

  SimulateOptions sim;
  sim.horizon = t_max_horizon;
  sim.dt = cfg.dt;
  sim.n_paths = cfg.n_paths;
  sim.mode = cfg.mode;
  sim.seed = cfg.seed;
  sim.backend = cfg.backend;
  sim.n_threads = cfg.n_threads;

  ExperimentResult result;
  result.worker_count = std::max(1, cfg.n_threads);

  char hash_hex[24];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(cfg.simulation_hash()));
  const std::string cache_file =
      cfg.out_dir + "/paths_" + hash_hex + ".bin";
  if (cfg.cache_paths) {
    auto cached =
        load_path_cache(cache_file, cfg.dt, domain.dim(), cfg.n_paths);
    if (cached) {
      result.from_cache = true;
      for (std::size_t i = 0; i < cached->size(); ++i) consume(i, (*cached)[i]);
    } else {
      const auto paths = simulate_paths_collect(domain, fn, nu, sim);
      write_path_cache(cache_file, cfg.dt, domain.dim(), paths);
      for (std::size_t i = 0; i < paths.size(); ++i) consume(i, paths[i]);
    }
  } else {
    simulate_paths(domain, fn, nu, sim, consume);
  }

  // reductions, deterministic per (t, T)
  for (std::size_t i = 0; i < n_t; ++i) {
    const double t = cfg.t_grid[i];
    for (std::size_t k = 0; k < n_mult; ++k) {
      const double T = T_grid[i][k];
      std::vector<double> values, weights;
      std::vector<std::vector<double>> psis(static_cast<std::size_t>(cfg.m_psi));
      for (std::size_t p = 0; p < cfg.n_paths; ++p) {
        const double w = cond[(p * n_t + i) * n_mult + k];
        if (std::isnan(w)) continue;
        const double v = val[p * n_t + i];
        if (std::isnan(v)) continue;
        values.push_back(v);
        weights.push_back(w);
        for (int m = 0; m < cfg.m_psi; ++m)
          psis[static_cast<std::size_t>(m)].push_back(
              psi2[(p * n_t + i) * static_cast<std::size_t>(cfg.m_psi) +
                   static_cast<std::size_t>(m)]);
      }
      if (values.empty())
        throw InfeasibleError("run_experiment: zero conditioned paths at (t,T)");

      ResultRow row;
      row.experiment_id = cfg.experiment_id;
      row.t = t;
      row.T = T;
      row.estimator_mode = mode_name(cfg.mode);
      row.n_paths = cfg.n_paths;
      row.ot_method = method_name(cfg.ot_method);
      row.seed = cfg.seed;

      const auto reduce = [&](const std::vector<double>& v) {
        Estimate e;
        if (cfg.mode == ConditioningMode::rejection) {
          const auto ms = mean_stderr(v);
          e.value = ms.mean;
          e.stderr_ = ms.stderr_;
          e.n_effective = static_cast<double>(v.size());
        } else {
          e = weighted_ratio_estimate(weights, v);
        }
        return e;
      };

      const Estimate main = reduce(values);
      row.n_effective = main.n_effective;
      row.value = main.value;
      row.stderr_ = main.stderr_;
      row.t_times_value = t * main.value;
      result.rows.push_back(row);

      for (int m = 0; m < cfg.m_psi; ++m) {
        const Estimate pe = reduce(psis[static_cast<std::size_t>(m)]);
        AuxRow ar;
        ar.experiment_id = cfg.experiment_id;
        ar.t = t;
        ar.T = T;
        ar.name = "t_psi2_m" + std::to_string(m + 1);
        ar.value = t * pe.value;
        ar.stderr_ = t * pe.stderr_;
        result.aux.push_back(ar);
      }
      // normalized survival e^{B(l0) T} P(T < sigma)
      AuxRow sv;
      sv.experiment_id = cfg.experiment_id;
      sv.t = t;
      sv.T = T;
      sv.name = "survival_norm";
      if (cfg.mode == ConditioningMode::rejection) {
        const double alive = static_cast<double>(values.size());
        const double p = alive / static_cast<double>(cfg.n_paths);
        sv.value = std::exp(rate0 * T) * p;
        sv.stderr_ = std::exp(rate0 * T) *
                     std::sqrt(p * (1 - p) / static_cast<double>(cfg.n_paths));
      } else {
        const auto ms = mean_stderr(weights);
        sv.value = ms.mean;  // e^{B(l0)T} e^{-B(l0)T} E_Q[w] collapses to E w
        sv.stderr_ = ms.stderr_;
      }
      result.aux.push_back(sv);
      if (cfg.ot_method == TransportMethod::sinkhorn) {
        AuxRow br;
        br.experiment_id = cfg.experiment_id;
        br.t = t;
        br.T = T;
        br.name = "w2_bias_half";
        br.value = refs[i].half_bias;
        result.aux.push_back(br);
      }
    }
  }
  return result;
}

void write_rows_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InfeasibleError("cannot open " + path + " for writing");
  out << "experiment_id,t,T,estimator_mode,n_paths,n_effective,value,stderr,"
         "t_times_value,ot_method,seed\n";
  for (const auto& r : rows) {
    out << r.experiment_id << ',' << fmt(r.t) << ',' << fmt(r.T) << ','
        << r.estimator_mode << ',' << r.n_paths << ',' << fmt(r.n_effective)
        << ',' << fmt(r.value) << ',' << fmt(r.stderr_) << ','
        << fmt(r.t_times_value) << ',' << r.ot_method << ',' << r.seed << '\n';
  }
}

std::vector<ResultRow> read_rows_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty csv " + path);
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    ResultRow r;
    std::getline(ss, r.experiment_id, ',');
    std::getline(ss, tok, ',');
    r.t = std::stod(tok);
    std::getline(ss, tok, ',');
    r.T = std::stod(tok);
    std::getline(ss, r.estimator_mode, ',');
    std::getline(ss, tok, ',');
    r.n_paths = static_cast<std::size_t>(std::stoull(tok));
    std::getline(ss, tok, ',');
    r.n_effective = std::stod(tok);
    std::getline(ss, tok, ',');
    r.value = std::stod(tok);
    std::getline(ss, tok, ',');
    r.stderr_ = std::stod(tok);
    std::getline(ss, tok, ',');
    r.t_times_value = std::stod(tok);
    std::getline(ss, r.ot_method, ',');
    std::getline(ss, tok, ',');
    r.seed = std::stoull(tok);
    rows.push_back(r);
  }
  return rows;
}

void write_aux_csv(const std::string& path, const std::vector<AuxRow>& aux) {
  std::ofstream out(path);
  if (!out) throw InfeasibleError("cannot open " + path + " for writing");
  out << "experiment_id,t,T,name,value,stderr\n";
  for (const auto& r : aux)
    out << r.experiment_id << ',' << fmt(r.t) << ',' << fmt(r.T) << ','
        << r.name << ',' << fmt(r.value) << ',' << fmt(r.stderr_) << '\n';
}

RateFit rate_fit(const std::vector<ResultRow>& rows, const std::string& column,
                 double t_min, double predicted_exponent) {
  std::vector<double> x, y, w;
  for (const auto& r : rows) {
    if (r.t < t_min) continue;
    double v = 0.0, se = 0.0;
    if (column == "value") {
      v = r.value;
      se = r.stderr_;
    } else if (column == "t_times_value") {
      v = r.t_times_value;
      se = r.t * r.stderr_;
    } else {
      throw ConfigError("rate_fit: unknown column '" + column + "'");
    }
    if (!(v > 0.0)) continue;
    x.push_back(std::log(r.t));
    y.push_back(std::log(v));
    const double rel = se / v;
    w.push_back(rel > 1e-12 ? 1.0 / (rel * rel) : 1e24);
  }
  if (x.size() < 4)
    throw ConfigError("rate_fit: needs at least 4 usable points");
  const auto fit = weighted_least_squares(x, y, w);
  RateFit out;
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.slope_stderr = fit.slope_stderr;
  out.r_squared = fit.r_squared;
  out.points_used = fit.n;
  out.predicted_exponent = predicted_exponent;
  const double tol = std::max(2.0 * fit.slope_stderr, 0.15);
  if (std::abs(fit.slope - predicted_exponent) <= tol)
    out.verdict = "consistent";
  else if (fit.slope_stderr > 0.3)
    out.verdict = "inconclusive";
  else
    out.verdict = "inconsistent";
  return out;
}

nlohmann::json report_to_json(const std::string& suite,
                              const std::vector<CheckResult>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.passed;
    arr.push_back(nlohmann::json{{"name", c.name},
                                 {"status", c.passed ? "pass" : "fail"},
                                 {"measured", c.measured},
                                 {"tolerance", c.tolerance},
                                 {"detail", c.detail},
                                 {"seconds", c.seconds}});
  }
  return nlohmann::json{{"suite", suite}, {"passed", all}, {"checks", arr}};
}

}  // namespace subdiff
