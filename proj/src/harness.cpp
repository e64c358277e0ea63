#include "potlatch/harness.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "potlatch/error.hpp"
#include "potlatch/spectral.hpp"

namespace potlatch {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kDualReplicaOffset = 1ULL << 40;

[[noreturn]] void bad(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::ConfigInvalid, field + ": " + message);
}

std::size_t graph_sites(const GraphSpec& g) {
  return std::visit(
      [](const auto& v) -> std::size_t {
        using G = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<G, TorusGraph>)
          return TorusShape{v.d, v.n}.sites();
        else
          return static_cast<std::size_t>(v.n);
      },
      g.kind);
}

bool graph_is_torus(const GraphSpec& g) { return std::holds_alternative<TorusGraph>(g.kind); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

GraphSpec parse_graph(const json& j) {
  if (!j.is_object()) bad("graph", "must be an object");
  const std::string kind = j.value("kind", "");
  GraphSpec spec;
  if (kind == "torus") {
    if (!j.contains("d") || !j.contains("n")) bad("graph", "torus needs integer d and n");
    spec = GraphSpec::torus(j.at("d").get<int>(), j.at("n").get<int>());
  } else if (kind == "complete") {
    if (!j.contains("n")) bad("graph.n", "missing");
    spec = GraphSpec::complete(j.at("n").get<int>());
  } else if (kind == "custom") {
    spec = parse_custom_kernel_json(j.dump());
  } else {
    bad("graph.kind", "expected torus, complete or custom, got '" + kind + "'");
  }
  if (j.contains("site_cap")) spec.site_cap = j.at("site_cap").get<std::size_t>();
  return spec;
}

InitSpec parse_init(const json& j) {
  if (!j.is_object()) bad("init", "must be an object");
  InitSpec init;
  const std::string kind = j.value("kind", "");
  if (kind == "delta") {
    init.kind = InitSpec::Kind::Delta;
    init.site = j.value("site", std::size_t{0});
  } else if (kind == "constant") {
    init.kind = InitSpec::Kind::Constant;
    if (!j.contains("value")) bad("init.value", "missing");
    init.value = j.at("value").get<double>();
  } else if (kind == "iid") {
    init.kind = InitSpec::Kind::Iid;
    if (!j.contains("mean")) bad("init.mean", "missing");
    if (!j.contains("second_moment")) bad("init.second_moment", "missing");
    init.mean = j.at("mean").get<double>();
    init.second_moment = j.at("second_moment").get<double>();
    const std::string dist = j.value("distribution", "exponential");
    if (dist == "exponential")
      init.distribution = IidDistribution::Exponential;
    else if (dist == "bernoulli-scaled")
      init.distribution = IidDistribution::BernoulliScaled;
    else if (dist == "lognormal")
      init.distribution = IidDistribution::Lognormal;
    else
      bad("init.distribution", "expected exponential, bernoulli-scaled or lognormal");
  } else if (kind == "custom") {
    init.kind = InitSpec::Kind::Custom;
    if (!j.contains("values")) bad("init.values", "missing");
    init.values = j.at("values").get<std::vector<double>>();
  } else {
    bad("init.kind", "expected delta, constant, iid or custom, got '" + kind + "'");
  }
  return init;
}

json graph_to_json(const GraphSpec& g) {
  json j = std::visit(
      [](const auto& v) -> json {
        using G = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<G, TorusGraph>) {
          return {{"kind", "torus"}, {"d", v.d}, {"n", v.n}};
        } else if constexpr (std::is_same_v<G, CompleteGraph>) {
          return {{"kind", "complete"}, {"n", v.n}};
        } else {
          json rows = json::array();
          const auto nn = static_cast<std::size_t>(v.n);
          for (std::size_t i = 0; i < nn; ++i)
            rows.push_back(std::vector<double>(v.P.begin() + static_cast<long>(i * nn),
                                               v.P.begin() + static_cast<long>((i + 1) * nn)));
          json out = {{"kind", "custom"}, {"n", v.n}, {"P", rows}};
          if (v.pi) out["pi"] = *v.pi;
          return out;
        }
      },
      g.kind);
  if (g.site_cap != kDefaultSiteCap) j["site_cap"] = g.site_cap;
  return j;
}

std::string_view mode_name(ProcessMode m) {
  switch (m) {
    case ProcessMode::Smoothing: return "smoothing";
    case ProcessMode::Potlatch: return "potlatch";
    case ProcessMode::Dual: return "dual";
  }
  return "smoothing";
}

}  // namespace

std::vector<double> geometric_schedule(double start, double horizon, int per_decade) {
  std::vector<double> t{0.0};
  if (!(horizon > 0.0)) return t;
  if (per_decade < 1) bad("sample_times.per_decade", "must be >= 1");
  if (!(start > 0.0)) bad("sample_times.start", "must be > 0");
  for (int k = 0;; ++k) {
    const double v = start * std::pow(10.0, static_cast<double>(k) / per_decade);
    if (v >= horizon * (1.0 - 1e-12)) break;
    t.push_back(v);
  }
  t.push_back(horizon);
  return t;
}

std::vector<double> uniform_schedule(double step, double horizon) {
  if (!(step > 0.0)) bad("sample_times.step", "must be > 0");
  std::vector<double> t;
  const auto count = static_cast<std::size_t>(std::floor(horizon / step + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) t.push_back(static_cast<double>(k) * step);
  if (horizon - t.back() > 1e-9 * step) t.push_back(horizon);
  else t.back() = horizon;
  return t;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad("document", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("document", "must be a JSON object");
  static const std::vector<std::string> allowed = {"graph",    "process", "init",  "horizon",
                                                   "sample_times", "replicas", "seed", "workers",
                                                   "checks",   "t_inf"};
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) bad(key, "unknown field");

  ExperimentConfig cfg;
  try {
    if (!j.contains("graph")) bad("graph", "missing");
    cfg.graph = parse_graph(j.at("graph"));
    const std::string process = j.value("process", "smoothing");
    if (process == "smoothing")
      cfg.process = ProcessMode::Smoothing;
    else if (process == "potlatch")
      cfg.process = ProcessMode::Potlatch;
    else if (process == "dual")
      cfg.process = ProcessMode::Dual;
    else
      bad("process", "expected smoothing, potlatch or dual");
    if (j.contains("init")) cfg.init = parse_init(j.at("init"));
    if (!j.contains("horizon")) bad("horizon", "missing");
    cfg.horizon = j.at("horizon").get<double>();
    if (!(cfg.horizon >= 0.0) || !std::isfinite(cfg.horizon)) bad("horizon", "must be finite and >= 0");
    if (j.contains("sample_times")) {
      const auto& s = j.at("sample_times");
      if (s.is_array()) {
        cfg.sample_times = s.get<std::vector<double>>();
      } else if (s.is_object() && s.contains("geometric")) {
        const auto& g = s.at("geometric");
        cfg.sample_times =
            geometric_schedule(g.value("start", 0.1), cfg.horizon, g.value("per_decade", 20));
      } else if (s.is_object() && s.contains("uniform")) {
        cfg.sample_times = uniform_schedule(s.at("uniform").at("step").get<double>(), cfg.horizon);
      } else {
        bad("sample_times", "expected an array, {\"geometric\": {...}} or {\"uniform\": {...}}");
      }
    }
    if (j.contains("replicas")) {
      const auto r = j.at("replicas").get<long long>();
      if (r < 1) bad("replicas", "must be >= 1");
      cfg.replicas = static_cast<std::size_t>(r);
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<std::size_t>();
    if (j.contains("checks")) cfg.checks = j.at("checks").get<std::vector<std::string>>();
    if (j.contains("t_inf")) cfg.t_inf = j.at("t_inf").get<double>();
  } catch (const json::exception& e) {
    bad("document", std::string("wrong value type: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    bad("graph", e.what());
  }
  if (cfg.sample_times.empty()) cfg.sample_times = geometric_schedule(0.1, cfg.horizon);
  validate_config(cfg);
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["graph"] = graph_to_json(cfg.graph);
  j["process"] = mode_name(cfg.process);
  json init;
  switch (cfg.init.kind) {
    case InitSpec::Kind::Delta: init = {{"kind", "delta"}, {"site", cfg.init.site}}; break;
    case InitSpec::Kind::Constant: init = {{"kind", "constant"}, {"value", cfg.init.value}}; break;
    case InitSpec::Kind::Iid: {
      const char* dist = cfg.init.distribution == IidDistribution::Exponential ? "exponential"
                         : cfg.init.distribution == IidDistribution::BernoulliScaled
                             ? "bernoulli-scaled"
                             : "lognormal";
      init = {{"kind", "iid"},
              {"mean", cfg.init.mean},
              {"second_moment", cfg.init.second_moment},
              {"distribution", dist}};
      break;
    }
    case InitSpec::Kind::Custom: init = {{"kind", "custom"}, {"values", cfg.init.values}}; break;
  }
  j["init"] = init;
  j["horizon"] = cfg.horizon;
  j["sample_times"] = cfg.sample_times;
  j["replicas"] = cfg.replicas;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["checks"] = cfg.checks;
  if (cfg.t_inf) j["t_inf"] = *cfg.t_inf;
  return j.dump(2);
}

const std::vector<std::string_view>& known_checks() {
  static const std::vector<std::string_view> names = {
      "mass_conservation", "energy_monotone",     "max_min_monotone", "global_envelope",
      "generator_identities", "spectral_identities", "gap_formulas",   "G_integral",
      "renewal_consistency", "duality",            "corollary",        "martingale",
      "torus_poly_rates",  "torus_exp_rate",      "w2_coupling",      "avg_mass"};
  return names;
}

void validate_config(const ExperimentConfig& cfg) {
  try {
    cfg.graph.validate();
  } catch (const Error& e) {
    bad("graph", e.what());
  }
  const std::size_t n = graph_sites(cfg.graph);
  const bool torus = graph_is_torus(cfg.graph);
  if (cfg.replicas < 1) bad("replicas", "must be >= 1");
  if (!(cfg.horizon >= 0.0) || !std::isfinite(cfg.horizon)) bad("horizon", "must be finite and >= 0");
  for (std::size_t k = 0; k < cfg.sample_times.size(); ++k) {
    const double t = cfg.sample_times[k];
    if (!(t >= 0.0) || t > cfg.horizon) bad("sample_times", "entries must lie in [0, horizon]");
    if (k > 0 && !(t > cfg.sample_times[k - 1])) bad("sample_times", "must be strictly increasing");
  }
  if (cfg.sample_times.empty()) bad("sample_times", "must not be empty");
  const bool mass_process = cfg.process != ProcessMode::Smoothing;
  const auto& init = cfg.init;
  switch (init.kind) {
    case InitSpec::Kind::Delta:
      if (init.site >= n) bad("init.site", "out of range for " + std::to_string(n) + " sites");
      break;
    case InitSpec::Kind::Constant:
      if (!std::isfinite(init.value)) bad("init.value", "must be finite");
      if (mass_process && init.value < 0.0) bad("init.value", "potlatch masses must be >= 0");
      break;
    case InitSpec::Kind::Iid:
      if (!(init.mean > 0.0)) bad("init.mean", "must be > 0");
      if (init.second_moment < init.mean * init.mean)
        bad("init.second_moment", "must be >= mean^2");
      if (init.distribution == IidDistribution::Exponential &&
          std::abs(init.second_moment - 2.0 * init.mean * init.mean) >
              1e-9 * init.second_moment)
        bad("init.second_moment", "exponential law has second moment 2 * mean^2");
      break;
    case InitSpec::Kind::Custom:
      if (init.values.size() != n)
        bad("init.values", "needs " + std::to_string(n) + " entries");
      for (double v : init.values) {
        if (!std::isfinite(v)) bad("init.values", "entries must be finite");
        if (mass_process && v < 0.0) bad("init.values", "potlatch masses must be >= 0");
      }
      break;
  }
  if (cfg.t_inf && !(*cfg.t_inf > 0.0)) bad("t_inf", "must be > 0");

  const auto& names = known_checks();
  for (const auto& c : cfg.checks) {
    if (std::find(names.begin(), names.end(), c) == names.end()) bad("checks", "unknown check '" + c + "'");
    const bool smoothing = cfg.process == ProcessMode::Smoothing;
    auto need = [&](bool ok, const std::string& what) {
      if (!ok) bad("checks", "'" + c + "' requires " + what);
    };
    if (c == "mass_conservation") need(mass_process, "process potlatch or dual");
    if (c == "energy_monotone" || c == "generator_identities" || c == "martingale" ||
        c == "torus_poly_rates" || c == "torus_exp_rate" || c == "avg_mass")
      need(smoothing && torus, "a smoothing process on a torus");
    if (c == "max_min_monotone" || c == "global_envelope" || c == "corollary")
      need(smoothing, "process smoothing");
    if (c == "spectral_identities" || c == "gap_formulas" || c == "G_integral")
      need(torus, "a torus graph");
    if (c == "renewal_consistency")
      need(smoothing && torus && init.kind == InitSpec::Kind::Delta,
           "a smoothing process on a torus from a delta profile");
    if (c == "duality" || c == "w2_coupling") need(cfg.process == ProcessMode::Dual, "process dual");
  }
}

MassProfile sample_initial(const InitSpec& init, std::size_t n, std::mt19937_64& rng) {
  MassProfile y(n, 0.0);
  switch (init.kind) {
    case InitSpec::Kind::Delta: y.at(init.site) = 1.0; break;
    case InitSpec::Kind::Constant: std::fill(y.begin(), y.end(), init.value); break;
    case InitSpec::Kind::Custom:
      if (init.values.size() != n) bad("init.values", "length mismatch");
      y = init.values;
      break;
    case InitSpec::Kind::Iid: {
      const double mu = init.mean;
      const double zeta = init.second_moment;
      switch (init.distribution) {
        case IidDistribution::Exponential: {
          std::exponential_distribution<double> dist(1.0 / mu);
          for (double& v : y) v = dist(rng);
          break;
        }
        case IidDistribution::BernoulliScaled: {
          std::bernoulli_distribution coin(mu * mu / zeta);
          const double scale = zeta / mu;
          for (double& v : y) v = coin(rng) ? scale : 0.0;
          break;
        }
        case IidDistribution::Lognormal: {
          const double s2 = std::log(zeta / (mu * mu));
          std::lognormal_distribution<double> dist(std::log(mu) - 0.5 * s2, std::sqrt(s2));
          for (double& v : y) v = dist(rng);
          break;
        }
      }
      break;
    }
  }
  return y;
}

bool VerdictReport::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace

std::string VerdictReport::to_json() const {
  json arr = json::array();
  for (const auto& v : verdicts) {
    json j = {{"check", v.check},
              {"pass", v.pass},
              {"observed", number_or_null(v.observed)},
              {"bound", number_or_null(v.bound)},
              {"tolerance", number_or_null(v.tolerance)},
              {"runtime_seconds", number_or_null(v.runtime_seconds)}};
    if (!v.detail.empty()) j["detail"] = v.detail;
    arr.push_back(std::move(j));
  }
  return json{{"verdicts", arr}, {"all_pass", all_pass()}}.dump(2);
}

VerdictReport VerdictReport::from_json(const std::string& text) {
  VerdictReport report;
  try {
    const auto j = json::parse(text);
    for (const auto& e : j.at("verdicts")) {
      Verdict v;
      v.check = e.at("check").get<std::string>();
      v.pass = e.at("pass").get<bool>();
      v.observed = number_from(e.at("observed"));
      v.bound = number_from(e.at("bound"));
      v.tolerance = number_from(e.at("tolerance"));
      v.runtime_seconds = number_from(e.value("runtime_seconds", json(nullptr)));
      v.detail = e.value("detail", "");
      report.verdicts.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("verdict document: ") + e.what());
  }
  return report;
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

double default_t_inf(const Kernel& k) { return 20.0 / numeric_two_step_gap(k).gap_two_step; }

namespace {

// Running aggregates for one experiment.
struct ExperimentAccumulator {
  std::vector<Welford> moments;
  std::array<double, 6> maxima{};
  std::vector<FunctionalSeries> trajectories;

  void merge(const ExperimentAccumulator& o) {
    for (std::size_t i = 0; i < moments.size(); ++i) moments[i].merge(o.moments[i]);
    for (std::size_t i = 0; i < maxima.size(); ++i) maxima[i] = std::max(maxima[i], o.maxima[i]);
    trajectories.insert(trajectories.end(), o.trajectories.begin(), o.trajectories.end());
  }
};

enum MaxSlot : std::size_t {
  kMassDrift = 0,
  kEnergyIdentity = 1,
  kEnergyIncrease = 2,
  kMaxMinViolation = 3,
  kSpectralIdentity = 4,
};

// Relative mismatch of the three Fourier identities on one (centered) state.
double spectral_identity_error(std::span<const double> y, const TorusShape& shape,
                               const FunctionalEvaluator& ev, const TorusSpectrum& ts) {
  const double N = static_cast<double>(y.size());
  std::vector<double> c(y.begin(), y.end());
  double mean = 0.0;
  for (double v : c) mean += v;
  mean /= N;
  for (double& v : c) v -= mean;
  const auto coords = spectral_coords(c, shape);
  double e_sum = 0.0;
  double v_sum = 0.0;
  double s_sum = 0.0;
  for (std::size_t x = 1; x < coords.size(); ++x) {
    const double q = coords[x] * coords[x];
    e_sum += ts.lambda_hat[x] * q;
    v_sum += q;
    s_sum += ts.lambda_hat[x] * ts.lambda_hat[x] * q;
  }
  s_sum *= N;
  auto rel = [](double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
  };
  return std::max({rel(ev.energy(c), e_sum), rel(ev.variance(c), v_sum), rel(ev.sum_delta_sq(c), s_sum)});
}

// |f''| h^3 / 12 estimate for trapezoid on [t_k, t_{k+1}] from sampled means.
double trapezoid_error_estimate(std::span<const double> t, std::span<const double> f, std::size_t k) {
  if (t.size() < 3) return 0.0;
  double second = 0.0;
  for (std::size_t j = k; j <= k + 1; ++j) {
    const std::size_t c = std::clamp<std::size_t>(j, 1, t.size() - 2);
    const double h1 = t[c] - t[c - 1];
    const double h2 = t[c + 1] - t[c];
    second = std::max(second,
                      std::abs(2.0 * ((f[c + 1] - f[c]) / h2 - (f[c] - f[c - 1]) / h1) / (h1 + h2)));
  }
  const double h = t[k + 1] - t[k];
  return std::abs(second) * h * h * h / 12.0;
}

Verdict make_verdict(std::string name, bool pass, double observed, double bound, double tolerance,
                     double runtime, std::string detail = {}) {
  return Verdict{std::move(name), pass, observed, bound, tolerance, runtime, std::move(detail)};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg_in, bool keep_trajectories) {
  ExperimentConfig cfg = cfg_in;
  if (cfg.sample_times.empty()) cfg.sample_times = geometric_schedule(0.1, cfg.horizon);
  validate_config(cfg);
  const auto sim_start = std::chrono::steady_clock::now();
  const Kernel k = build_kernel(cfg.graph);
  const FunctionalEvaluator ev(k);
  const std::size_t n = k.size();
  const double N = static_cast<double>(n);
  const auto& times = cfg.sample_times;
  const std::size_t T = times.size();
  auto has = [&](std::string_view c) {
    return std::find(cfg.checks.begin(), cfg.checks.end(), c) != cfg.checks.end();
  };
  const bool torus = k.is_torus();
  const bool want_spectral = has("spectral_identities");
  const bool want_generator = has("generator_identities") && T >= 2;
  const bool want_martingale = has("martingale");
  const bool want_corollary = has("corollary");
  std::optional<TorusSpectrum> ts;
  if (torus) ts = torus_gaps(k.torus()->d, k.torus()->n);

  // Slot layout.
  const std::size_t slot_v0 = T * kFunctionalCount;
  const std::size_t slot_gen = slot_v0 + 1;
  const std::size_t gen_count = want_generator ? 2 * (T - 1) : 0;
  const std::size_t slot_mart = slot_gen + gen_count;
  const std::size_t mart_count = want_martingale ? 2 * T : 0;
  const std::size_t slot_corr = slot_mart + mart_count;
  const std::size_t corr_count = want_corollary ? T : 0;
  ExperimentAccumulator proto;
  proto.moments.resize(slot_corr + corr_count);

  std::optional<MartingaleFunctional> mart;
  if (want_martingale) {
    std::vector<double> f0(n, 0.0);
    f0[0] = 1.0;
    mart.emplace(cfg.horizon, f0, *k.torus(), times);
  }

  const bool dual = cfg.process == ProcessMode::Dual;
  const ProcessKind kind =
      cfg.process == ProcessMode::Smoothing ? ProcessKind::Smoothing : ProcessKind::Potlatch;

  auto body = [&](std::size_t r, ExperimentAccumulator& acc) {
    auto init_rng = make_rng(cfg.seed, r, 1);
    MassProfile init = sample_initial(cfg.init, n, init_rng);
    ClockStream clock(cfg.seed, r, n);
    std::vector<FunctionalRecord> records;
    if (dual) {
      const double total = std::accumulate(init.begin(), init.end(), 0.0);
      const auto run = simulate_dual_coupled(k, init, cfg.horizon, times, clock);
      records.reserve(T);
      for (const auto& s : run.samples) {
        records.push_back(ev.evaluate(s.x, s.t));
        const double now = std::accumulate(s.x.begin(), s.x.end(), 0.0);
        if (total > 0.0)
          acc.maxima[kMassDrift] = std::max(acc.maxima[kMassDrift], std::abs(now - total) / total);
      }
      if (keep_trajectories)
        acc.trajectories.push_back(FunctionalSeries{kind, cfg.seed, r, records});
    } else {
      std::vector<double> m_one(want_martingale ? T : 0);
      std::vector<double> m_heat(want_martingale ? T : 0);
      SampleObserver observer;
      if (want_spectral || want_martingale) {
        observer = [&](std::size_t idx, double, std::span<const double> y, double offset) {
          if (want_spectral)
            acc.maxima[kSpectralIdentity] = std::max(acc.maxima[kSpectralIdentity],
                                                     spectral_identity_error(y, *k.torus(), ev, *ts));
          if (want_martingale) {
            double sum = 0.0;
            for (double v : y) sum += v;
            m_one[idx] = sum + N * offset;
            m_heat[idx] = mart->value(idx, y, offset);
          }
        };
      }
      SimulationOptions opts;
      opts.track_energy_identity = has("energy_monotone");
      const double e0 = torus ? ev.energy(init) : 0.0;
      const double spread0 = *std::max_element(init.begin(), init.end()) -
                             *std::min_element(init.begin(), init.end());
      auto res = simulate(kind, k, &ev, init, cfg.horizon, times, clock, observer, opts);
      records = std::move(res.series.records);
      acc.maxima[kMassDrift] = std::max(acc.maxima[kMassDrift], res.max_mass_drift);
      if (e0 > 0.0)
        acc.maxima[kEnergyIdentity] =
            std::max(acc.maxima[kEnergyIdentity], res.max_energy_identity_error / e0);
      for (std::size_t s = 0; s + 1 < T; ++s) {
        if (torus && e0 > 0.0)
          acc.maxima[kEnergyIncrease] = std::max(acc.maxima[kEnergyIncrease],
                                                 (records[s + 1].E - records[s].E) / e0);
        if (spread0 > 0.0) {
          const double up = records[s + 1].max_mass - records[s].max_mass;
          const double down = records[s].min_mass - records[s + 1].min_mass;
          acc.maxima[kMaxMinViolation] =
              std::max(acc.maxima[kMaxMinViolation], std::max(up, down) / spread0);
        }
      }
      if (want_generator) {
        for (std::size_t s = 0; s + 1 < T; ++s) {
          const double h = times[s + 1] - times[s];
          const auto& a = records[s];
          const auto& b = records[s + 1];
          const double de = (b.E - a.E) + 0.5 * h * (a.sum_delta_sq + b.sum_delta_sq) / N;
          auto rhs_v = [N](const FunctionalRecord& x) {
            return -2.0 * x.E + (1.0 - 1.0 / N) * x.sum_delta_sq / N;
          };
          const double dv = (b.V - a.V) - 0.5 * h * (rhs_v(a) + rhs_v(b));
          acc.moments[slot_gen + 2 * s].add(de);
          acc.moments[slot_gen + 2 * s + 1].add(dv);
        }
      }
      if (want_martingale)
        for (std::size_t s = 0; s < T; ++s) {
          acc.moments[slot_mart + 2 * s].add(m_one[s] - m_one[0]);
          acc.moments[slot_mart + 2 * s + 1].add(m_heat[s] - m_heat[0]);
        }
      if (want_corollary)
        for (std::size_t s = 0; s < T; ++s) acc.moments[slot_corr + s].add(records[s].E2 + records[s].Estar);
      if (keep_trajectories) {
        res.series.records = records;
        acc.trajectories.push_back(std::move(res.series));
      }
    }
    for (std::size_t s = 0; s < T; ++s)
      for (std::size_t f = 0; f < kFunctionalCount; ++f)
        acc.moments[s * kFunctionalCount + f].add(functional_value(records[s], f));
    acc.moments[slot_v0].add(ev.variance(init));
  };

  ExperimentAccumulator total = run_replicas(cfg.replicas, cfg.workers, proto, body);
  const double sim_seconds = seconds_since(sim_start);

  ExperimentResult result;
  result.trajectories = std::move(total.trajectories);
  for (std::size_t f = 0; f < kFunctionalCount; ++f) {
    std::vector<Welford> col(T);
    for (std::size_t s = 0; s < T; ++s) col[s] = total.moments[s * kFunctionalCount + f];
    result.functionals.push_back(to_estimate(times, col));
  }
  const McEstimate& est_v = result.functionals[0];
  const McEstimate& est_e = result.functionals[1];
  const McEstimate& est_s = result.functionals[4];
  const double V0 = total.moments[slot_v0].mean;

  for (const auto& name : cfg.checks) {
    const auto start = std::chrono::steady_clock::now();
    auto runtime = [&]() { return sim_seconds + seconds_since(start); };
    try {
      if (name == "mass_conservation") {
        const double obs = total.maxima[kMassDrift];
        result.report.verdicts.push_back(
            make_verdict(name, obs <= 1e-12, obs, 0.0, 1e-12, runtime(),
                         dual ? "relative drift at sample times" : "max relative drift per event"));
      } else if (name == "energy_monotone") {
        const double obs = std::max(total.maxima[kEnergyIdentity], total.maxima[kEnergyIncrease]);
        result.report.verdicts.push_back(make_verdict(
            name, obs <= 1e-12, obs, 0.0, 1e-12, runtime(),
            "per-event |drop - Delta^2/N| and sampled increases, relative to E(0)"));
      } else if (name == "max_min_monotone") {
        const double obs = total.maxima[kMaxMinViolation];
        result.report.verdicts.push_back(make_verdict(name, obs <= 1e-12, obs, 0.0, 1e-12, runtime()));
      } else if (name == "spectral_identities") {
        const double obs = total.maxima[kSpectralIdentity];
        result.report.verdicts.push_back(make_verdict(name, obs <= 1e-9, obs, 0.0, 1e-9, runtime()));
      } else if (name == "gap_formulas") {
        const auto& shape = *k.torus();
        const double closed = torus_gamma2(shape.d, shape.n);
        const double numeric = numeric_two_step_gap(k).gap_two_step;
        const double obs = std::abs(closed - numeric);
        result.report.verdicts.push_back(make_verdict(name, obs <= 1e-10, numeric, closed, 1e-10,
                                                      seconds_since(start)));
      } else if (name == "G_integral") {
        const auto& shape = *k.torus();
        const auto g = compute_G(shape.d, shape.n);
        const double integral = integral_check_G(g);
        const double g0_err = std::abs(g.values[0] - (1.0 + 0.5 / shape.d));
        const bool ok = std::abs(integral - 0.5) <= 1e-6 && g0_err <= 1e-9;
        result.report.verdicts.push_back(make_verdict(name, ok, integral, 0.5, 1e-6,
                                                      seconds_since(start),
                                                      "G(0) error " + fmt(g0_err)));
      } else if (name == "global_envelope") {
        const double gamma2 = numeric_two_step_gap(k).gap_two_step;
        double worst = -std::numeric_limits<double>::infinity();
        double worst_tol = 0.0;
        bool ok = true;
        for (std::size_t s = 0; s < T; ++s) {
          const double env = global_envelope_value(V0, gamma2, times[s]);
          const double excess = est_v.mean[s] - env;
          const double tol = 3.0 * est_v.standard_error[s] + 1e-14 * V0;
          if (excess > tol) ok = false;
          if (excess - tol > worst - worst_tol) {
            worst = excess;
            worst_tol = tol;
          }
        }
        result.report.verdicts.push_back(make_verdict(name, ok, worst, 0.0, worst_tol, runtime(),
                                                      "max of mean V - V0 exp(-gamma2 t)"));
      } else if (name == "generator_identities") {
        if (!want_generator) throw Error(ErrorCode::ConfigInvalid, "needs >= 2 sample times");
        const double z = bonferroni_z(gen_count);
        std::vector<double> fe(T);
        std::vector<double> fv(T);
        for (std::size_t s = 0; s < T; ++s) {
          fe[s] = -est_s.mean[s] / N;
          fv[s] = -2.0 * est_e.mean[s] + (1.0 - 1.0 / N) * est_s.mean[s] / N;
        }
        double worst = 0.0;
        for (std::size_t s = 0; s + 1 < T; ++s) {
          for (int which = 0; which < 2; ++which) {
            const auto& w = total.moments[slot_gen + 2 * s + static_cast<std::size_t>(which)];
            const double quad = 2.0 * trapezoid_error_estimate(times, which == 0 ? fe : fv, s);
            const double tol = z * w.standard_error() + quad + 1e-15;
            worst = std::max(worst, std::abs(w.mean) / tol);
          }
        }
        result.report.verdicts.push_back(make_verdict(
            name, worst <= 1.0, worst, 1.0, z, runtime(),
            "max |mean increment residual| / (z se + quadrature), Bonferroni z"));
      } else if (name == "renewal_consistency") {
        const auto& shape = *k.torus();
        const double h = std::max(kDefaultGridStep, cfg.horizon / 20000.0);
        const auto g = compute_G(shape.d, shape.n, h, cfg.horizon + 2.0 * h);
        const auto H = renewal_H(g);
        const double z = bonferroni_z(T);
        double worst = 0.0;
        for (std::size_t s = 0; s < T; ++s) {
          const double diff = std::abs(est_s.mean[s] - H.at(times[s]));
          const double tol = z * est_s.standard_error[s] + 1e-6 * H.at(times[s]) + 1e-12;
          worst = std::max(worst, diff / tol);
        }
        result.report.verdicts.push_back(make_verdict(name, worst <= 1.0, worst, 1.0, z, runtime(),
                                                      "max |MC - H| / (z se)"));
      } else if (name == "corollary") {
        const double gamma2 = numeric_two_step_gap(k).gap_two_step;
        std::vector<Welford> col(total.moments.begin() + static_cast<long>(slot_corr),
                                 total.moments.begin() + static_cast<long>(slot_corr + T));
        const auto est = to_estimate(times, col);
        const auto c = local_corollary_check(times, est.mean, est.standard_error, V0, gamma2);
        result.report.verdicts.push_back(make_verdict(
            name, c.pass(), c.integral, V0,
            3.0 * c.propagated_se + c.tail_bound + c.quadrature_error, runtime(),
            "se " + fmt(c.propagated_se) + ", tail " + fmt(c.tail_bound) + ", quadrature " +
                fmt(c.quadrature_error)));
      } else if (name == "martingale") {
        const double z = bonferroni_z(2 * T);
        double worst = 0.0;
        for (std::size_t s = 1; s < T; ++s)
          for (int which = 0; which < 2; ++which) {
            const auto& w = total.moments[slot_mart + 2 * s + static_cast<std::size_t>(which)];
            const double tol = z * w.standard_error() + 1e-12;
            worst = std::max(worst, std::abs(w.mean) / tol);
          }
        result.report.verdicts.push_back(make_verdict(name, worst <= 1.0, worst, 1.0, z, runtime(),
                                                      "f = 1 and f = heat-evolved delta_0"));
      } else if (name == "torus_poly_rates") {
        const auto& shape = *k.torus();
        const double rate = G_tail_rate(shape.d, shape.n);
        const double dd = shape.d;
        const auto fv = rate_fit(est_v, 10.0, 100.0, rate);
        const auto fe = rate_fit(est_e, 10.0, 100.0, rate);
        const bool ok_v = std::abs(fv.poly_exponent + dd / 2.0) <= 0.15;
        const bool ok_e = std::abs(fe.poly_exponent + dd / 2.0 + 1.0) <= 0.15;
        const double gap = fv.poly_exponent - fe.poly_exponent;
        const bool ok_gap = std::abs(gap - 1.0) <= 0.3;
        result.report.verdicts.push_back(make_verdict(
            name, ok_v && ok_e && ok_gap, gap, 1.0, 0.3, runtime(),
            "V exponent " + fmt(fv.poly_exponent) + ", E exponent " + fmt(fe.poly_exponent)));
      } else if (name == "torus_exp_rate") {
        const auto& shape = *k.torus();
        const double nn = std::pow(static_cast<double>(shape.n), 2);
        const double target = G_tail_rate(shape.d, shape.n);
        const auto fit = rate_fit(est_v, nn, 4.0 * nn);
        const double rel = std::abs(fit.exp_rate - target) / target;
        result.report.verdicts.push_back(make_verdict(name, rel <= 0.15, fit.exp_rate, target,
                                                      0.15 * target, runtime()));
      } else if (name == "duality") {
        auto v = duality_experiment(cfg);
        result.report.verdicts.push_back(std::move(v));
      } else if (name == "w2_coupling") {
        result.report.verdicts.push_back(w2_coupling_verdict(cfg));
      } else if (name == "avg_mass") {
        const auto am = avg_mass_experiment(cfg);
        const double target = -(static_cast<double>(k.torus()->d) / 2.0 + 1.0);
        if (!am.fit) throw Error(ErrorCode::ConfigInvalid, "avg_mass needs samples in [10, 100]");
        const double p = am.fit->poly_exponent;
        result.report.verdicts.push_back(make_verdict(name, std::abs(p - target) <= 0.15, p, target,
                                                      0.15, seconds_since(start),
                                                      "bias bound " + fmt(am.bias_bound)));
      }
    } catch (const Error& e) {
      result.report.verdicts.push_back(make_verdict(name, false, kNaN, kNaN, kNaN, runtime(), e.what()));
    }
  }
  return result;
}

AvgMassResult avg_mass_experiment(const ExperimentConfig& cfg) {
  if (cfg.process != ProcessMode::Smoothing || !graph_is_torus(cfg.graph))
    throw Error(ErrorCode::ConfigInvalid, "avg_mass needs a smoothing process on a torus");
  const Kernel k = build_kernel(cfg.graph);
  const auto& shape = *k.torus();
  const std::size_t n = k.size();
  AvgMassResult out;
  out.t_inf = cfg.t_inf.value_or(default_t_inf(k));
  std::vector<double> times;
  for (double t : cfg.sample_times)
    if (t < out.t_inf) times.push_back(t);
  times.push_back(out.t_inf);
  const std::size_t T = times.size();

  struct Acc {
    std::vector<Welford> stat;
    Welford bias;
    double scale = 0.0;
    void merge(const Acc& o) {
      for (std::size_t i = 0; i < stat.size(); ++i) stat[i].merge(o.stat[i]);
      bias.merge(o.bias);
      scale = std::max(scale, o.scale);
    }
  };
  Acc proto;
  proto.stat.resize(T - 1);
  auto body = [&](std::size_t r, Acc& acc) {
    auto init_rng = make_rng(cfg.seed, r, 1);
    MassProfile init = sample_initial(cfg.init, n, init_rng);
    acc.scale = std::max(acc.scale, median_l1_scale(init));
    ClockStream clock(cfg.seed, r, n);
    std::vector<double> ybar(T);
    double spread = 0.0;
    SampleObserver obs = [&](std::size_t idx, double, std::span<const double> y, double offset) {
      double sum = 0.0;
      for (double v : y) sum += v;
      ybar[idx] = sum / static_cast<double>(n) + offset;
      if (idx + 1 == T) spread = *std::max_element(y.begin(), y.end()) - *std::min_element(y.begin(), y.end());
    };
    SimulationOptions opts;
    opts.record_functionals = false;
    simulate(ProcessKind::Smoothing, k, nullptr, init, out.t_inf, times, clock, obs, opts);
    for (std::size_t s = 0; s + 1 < T; ++s) {
      const double d = ybar[s] - ybar[T - 1];
      acc.stat[s].add(d * d);
    }
    acc.bias.add(spread * spread);
  };
  const Acc total = run_replicas(cfg.replicas, cfg.workers, proto, body);
  out.statistic = to_estimate(std::span<const double>(times).first(T - 1), total.stat);
  out.bias_bound = std::sqrt(total.bias.mean);
  out.envelope = default_envelope_params(shape.d, shape.n, EnvelopeKind::Average);
  out.envelope.amplitude = 0.0;
  for (std::size_t s = 0; s + 1 < T; ++s) {
    EnvelopeParams unit = out.envelope;
    unit.amplitude = 1.0;
    const double shape_value = envelope_torus_value(shape.d, shape.n, EnvelopeKind::Average, unit, times[s]);
    if (total.scale > 0.0 && shape_value > 0.0)
      out.envelope.amplitude =
          std::max(out.envelope.amplitude, out.statistic.mean[s] / (shape_value * total.scale));
  }
  out.envelope.amplitude *= total.scale;
  try {
    out.fit = rate_fit(out.statistic, 10.0, 100.0, G_tail_rate(shape.d, shape.n));
  } catch (const Error&) {
    out.fit.reset();
  }
  return out;
}

namespace {

struct PowerSums {
  double count = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
  double s4 = 0.0;

  void add(double x) {
    const double x2 = x * x;
    count += 1.0;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
  }
  void merge(const PowerSums& o) {
    count += o.count;
    s1 += o.s1;
    s2 += o.s2;
    s3 += o.s3;
    s4 += o.s4;
  }
  double mean() const { return s1 / count; }
  double central2() const {
    const double m = mean();
    return std::max(0.0, s2 / count - m * m);
  }
  double central4() const {
    const double m = mean();
    const double e2 = s2 / count;
    const double e3 = s3 / count;
    const double e4 = s4 / count;
    return std::max(0.0, e4 - 4.0 * m * e3 + 6.0 * m * m * e2 - 3.0 * m * m * m * m);
  }
  double variance() const { return central2() * count / (count - 1.0); }
  double mean_se() const { return std::sqrt(variance() / count); }
  double variance_se() const {
    const double s2v = central2();
    return std::sqrt(std::max(0.0, central4() - s2v * s2v) / count);
  }
};

struct PowerBank {
  std::vector<PowerSums> sums;
  double max_mass_error = 0.0;
  void merge(const PowerBank& o) {
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i].merge(o.sums[i]);
    max_mass_error = std::max(max_mass_error, o.max_mass_error);
  }
};

}  // namespace

Verdict duality_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const Kernel k = build_kernel(cfg.graph);
  const std::size_t n = k.size();
  const auto& times = cfg.sample_times;
  const std::size_t T = times.size();
  PowerBank proto;
  proto.sums.resize(T * n);

  const PowerBank direct = run_replicas(cfg.replicas, cfg.workers, proto, [&](std::size_t r, PowerBank& acc) {
    auto init_rng = make_rng(cfg.seed, r, 1);
    const MassProfile x0 = sample_initial(cfg.init, n, init_rng);
    const double mass0 = std::accumulate(x0.begin(), x0.end(), 0.0);
    ClockStream clock(cfg.seed, r, n);
    SampleObserver obs = [&](std::size_t idx, double, std::span<const double> x, double) {
      double mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc.sums[idx * n + i].add(x[i]);
        mass += x[i];
      }
      acc.max_mass_error = std::max(acc.max_mass_error, std::abs(mass - mass0));
    };
    SimulationOptions opts;
    opts.record_functionals = false;
    simulate(ProcessKind::Potlatch, k, nullptr, x0, cfg.horizon, times, clock, obs, opts);
  });
  const PowerBank dual = run_replicas(cfg.replicas, cfg.workers, proto, [&](std::size_t r, PowerBank& acc) {
    const std::uint64_t id = r + kDualReplicaOffset;
    auto init_rng = make_rng(cfg.seed, id, 1);
    const MassProfile x0 = sample_initial(cfg.init, n, init_rng);
    ClockStream clock(cfg.seed, id, n);
    const auto run = simulate_dual_coupled(k, x0, cfg.horizon, times, clock);
    for (std::size_t s = 0; s < T; ++s)
      for (std::size_t i = 0; i < n; ++i) acc.sums[s * n + i].add(run.samples[s].x_tilde[i]);
  });

  const double z = bonferroni_z(2 * T * n);
  double worst = 0.0;
  for (std::size_t c = 0; c < T * n; ++c) {
    const auto& a = direct.sums[c];
    const auto& b = dual.sums[c];
    const double se_mean = std::hypot(a.mean_se(), b.mean_se());
    const double se_var = std::hypot(a.variance_se(), b.variance_se());
    const double dm = std::abs(a.mean() - b.mean());
    const double dv = std::abs(a.variance() - b.variance());
    worst = std::max(worst, dm / (z * se_mean + 1e-12));
    worst = std::max(worst, dv / (z * se_var + 1e-12));
  }
  const bool mass_ok = direct.max_mass_error <= 1e-12 * std::max(1.0, static_cast<double>(n));
  return Verdict{"duality", worst <= 1.0 && mass_ok, worst, 1.0, z, seconds_since(start),
                 "max |difference| / (z se) over means and variances; direct mass error " +
                     fmt(direct.max_mass_error)};
}

CouplingSummary coupling_experiment(const ExperimentConfig& cfg, double t_inf) {
  const Kernel k = build_kernel(cfg.graph);
  const std::size_t n = k.size();
  std::vector<double> times;
  for (double t : cfg.sample_times)
    if (t < t_inf) times.push_back(t);
  times.push_back(t_inf);
  const CouplingSummary proto(times, t_inf);
  return run_replicas(cfg.replicas, cfg.workers, proto, [&](std::size_t r, CouplingSummary& acc) {
    auto init_rng = make_rng(cfg.seed, r, 1);
    const MassProfile x0 = sample_initial(cfg.init, n, init_rng);
    ClockStream clock(cfg.seed, r, n);
    const auto run = simulate_dual_coupled(k, x0, t_inf, times, clock);
    acc.add(run, x0);
  });
}

Verdict w2_coupling_verdict(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const Kernel k = build_kernel(cfg.graph);
  const double gamma2 = numeric_two_step_gap(k).gap_two_step;
  const double t_inf = cfg.t_inf.value_or(20.0 / gamma2);
  const auto summary = coupling_experiment(cfg, t_inf);
  double worst = -std::numeric_limits<double>::infinity();
  double worst_tol = 0.0;
  bool ok = true;
  std::string detail;
  try {
    for (std::size_t s = 0; s + 1 < summary.sample_times.size(); ++s) {
      const auto b = coupling_w2_bound(summary, s, k, gamma2);
      const double excess = b.statistic + b.bias_bound - b.closed_form;
      const double tol = 3.0 * b.standard_error;
      if (excess > tol) ok = false;
      if (excess - tol > worst - worst_tol) {
        worst = excess;
        worst_tol = tol;
      }
    }
    detail = "max of statistic + bias - closed form, t_inf " + fmt(t_inf);
  } catch (const Error& e) {
    ok = false;
    detail = e.what();
  }
  return Verdict{"w2_coupling", ok, worst, 0.0, worst_tol, seconds_since(start), detail};
}

const std::vector<std::string_view>& known_suites() {
  static const std::vector<std::string_view> names = {
      "identities", "conservation", "global", "torus-rates", "renewal", "duality", "corollary"};
  return names;
}

namespace {

ExperimentConfig suite_config(GraphSpec graph, ProcessMode mode, InitSpec init, double horizon,
                              std::vector<double> times, std::size_t replicas,
                              std::vector<std::string> checks) {
  ExperimentConfig cfg;
  cfg.graph = std::move(graph);
  cfg.process = mode;
  cfg.init = std::move(init);
  cfg.horizon = horizon;
  cfg.sample_times = std::move(times);
  cfg.replicas = replicas;
  cfg.checks = std::move(checks);
  return cfg;
}

InitSpec delta0() { return InitSpec{}; }
InitSpec constant(double c) {
  InitSpec s;
  s.kind = InitSpec::Kind::Constant;
  s.value = c;
  return s;
}
InitSpec iid_exponential() {
  InitSpec s;
  s.kind = InitSpec::Kind::Iid;
  s.mean = 1.0;
  s.second_moment = 2.0;
  return s;
}

}  // namespace

VerdictReport run_suite(std::string_view suite, std::optional<std::size_t> replicas,
                        std::uint64_t seed, std::size_t workers) {
  std::vector<ExperimentConfig> configs;
  auto R = [&](std::size_t dflt) { return replicas.value_or(dflt); };
  using M = ProcessMode;
  if (suite == "identities") {
    configs.push_back(suite_config(GraphSpec::torus(1, 5), M::Smoothing, iid_exponential(), 5.0,
                                   uniform_schedule(0.05, 5.0), R(20000),
                                   {"spectral_identities", "generator_identities", "gap_formulas",
                                    "G_integral"}));
    configs.push_back(suite_config(GraphSpec::torus(2, 3), M::Smoothing, iid_exponential(), 5.0,
                                   geometric_schedule(0.1, 5.0), R(200),
                                   {"spectral_identities", "gap_formulas", "G_integral"}));
  } else if (suite == "conservation") {
    configs.push_back(suite_config(GraphSpec::torus(1, 5), M::Potlatch, iid_exponential(), 20.0,
                                   geometric_schedule(0.1, 20.0), R(200), {"mass_conservation"}));
    configs.push_back(suite_config(GraphSpec::torus(1, 5), M::Smoothing, iid_exponential(), 20.0,
                                   geometric_schedule(0.1, 20.0), R(200),
                                   {"energy_monotone", "max_min_monotone"}));
  } else if (suite == "global") {
    for (auto g : {GraphSpec::torus(1, 5), GraphSpec::torus(2, 3), GraphSpec::complete(4)})
      configs.push_back(suite_config(g, M::Smoothing, delta0(), 10.0, geometric_schedule(0.1, 10.0),
                                     R(20000), {"global_envelope"}));
  } else if (suite == "torus-rates") {
    configs.push_back(suite_config(GraphSpec::torus(1, 101), M::Smoothing, delta0(), 100.0,
                                   geometric_schedule(1.0, 100.0), R(20000), {"torus_poly_rates"}));
    configs.push_back(suite_config(GraphSpec::torus(1, 15), M::Smoothing, delta0(), 900.0,
                                   uniform_schedule(15.0, 900.0), R(20000), {"torus_exp_rate"}));
  } else if (suite == "renewal") {
    configs.push_back(suite_config(GraphSpec::torus(1, 5), M::Smoothing, delta0(), 5.0,
                                   {0.0, 0.5, 1.0, 2.0, 5.0}, R(200000),
                                   {"renewal_consistency", "G_integral"}));
  } else if (suite == "duality") {
    configs.push_back(suite_config(GraphSpec::torus(1, 3), M::Dual, constant(1.0), 2.0,
                                   {0.0, 0.5, 1.0, 2.0}, R(100000), {"duality", "w2_coupling"}));
    InitSpec two;
    two.kind = InitSpec::Kind::Custom;
    two.values = {1.0, 0.0};
    configs.push_back(suite_config(GraphSpec::complete(2), M::Dual, two, 2.0, {0.0, 0.5, 1.0, 2.0},
                                   R(100000), {"duality"}));
  } else if (suite == "corollary") {
    configs.push_back(suite_config(GraphSpec::torus(1, 3), M::Smoothing, delta0(), 8.0,
                                   uniform_schedule(0.01, 8.0), R(100000), {"corollary"}));
    configs.push_back(suite_config(GraphSpec::torus(1, 5), M::Smoothing, delta0(), 2.0,
                                   {0.0, 0.25, 0.5, 1.0, 1.5, 2.0}, R(100000), {"martingale"}));
  } else {
    throw Error(ErrorCode::ConfigInvalid, "suite: unknown suite '" + std::string(suite) + "'");
  }
  VerdictReport report;
  for (auto& cfg : configs) {
    cfg.seed = seed;
    cfg.workers = workers;
    const auto result = run_experiment(cfg);
    for (auto v : result.report.verdicts) {
      v.detail = cfg.graph.describe() + (v.detail.empty() ? "" : "; " + v.detail);
      report.verdicts.push_back(std::move(v));
    }
  }
  return report;
}

void write_trajectory_csv(std::ostream& os, const std::vector<FunctionalSeries>& series) {
  os << "replica_id,t,V,E,E2,Estar,sum_delta_sq,Ybar,min_mass,max_mass\n";
  os << std::setprecision(17);
  for (const auto& s : series)
    for (const auto& r : s.records) {
      os << s.replica_id << ',' << r.t;
      for (std::size_t f = 0; f < kFunctionalCount; ++f) os << ',' << functional_value(r, f);
      os << '\n';
    }
}

void write_estimate_csv(std::ostream& os, const McEstimate& est) {
  os << "t,value,stderr\n" << std::setprecision(17);
  for (std::size_t i = 0; i < est.sample_times.size(); ++i)
    os << est.sample_times[i] << ',' << est.mean[i] << ',' << est.standard_error[i] << '\n';
}

}  // namespace potlatch
