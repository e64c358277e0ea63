// Acceptance criteria runner: one PASS/FAIL line per criterion.
//
//   acceptance [--only N]... [--workers W]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "oracles.hpp"
#include "potlatch/analysis.hpp"
#include "potlatch/engine.hpp"
#include "potlatch/error.hpp"
#include "potlatch/harness.hpp"
#include "potlatch/kernel.hpp"
#include "potlatch/spectral.hpp"

using namespace potlatch;

namespace {

std::size_t g_workers = 0;

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> info;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class... A>
std::string cat(const A&... parts) {
  std::ostringstream os;
  os.precision(6);
  (os << ... << parts);
  return os.str();
}

ExperimentConfig make_config(GraphSpec graph, ProcessMode mode, InitSpec init, double horizon,
                             std::vector<double> times, std::size_t replicas, std::uint64_t seed,
                             std::vector<std::string> checks = {}) {
  ExperimentConfig cfg;
  cfg.graph = std::move(graph);
  cfg.process = mode;
  cfg.init = std::move(init);
  cfg.horizon = horizon;
  cfg.sample_times = std::move(times);
  cfg.replicas = replicas;
  cfg.seed = seed;
  cfg.workers = g_workers;
  cfg.checks = std::move(checks);
  return cfg;
}

InitSpec delta0() { return InitSpec{}; }

InitSpec custom_init(std::vector<double> v) {
  InitSpec s;
  s.kind = InitSpec::Kind::Custom;
  s.values = std::move(v);
  return s;
}

InitSpec constant_one() {
  InitSpec s;
  s.kind = InitSpec::Kind::Constant;
  s.value = 1.0;
  return s;
}

// 1. Fourier identities for E, V and sum Delta^2 on random profiles.
Outcome spectral_identities() {
  Outcome out;
  double worst = 0.0;
  double worst_oracle = 0.0;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (auto shape : {TorusShape{1, 5}, TorusShape{2, 3}}) {
    const Kernel k = build_kernel(GraphSpec::torus(shape.d, shape.n));
    const FunctionalEvaluator ev(k);
    const auto ts = torus_gaps(shape.d, shape.n);
    const std::size_t N = shape.sites();
    const double Nd = static_cast<double>(N);
    // Oracle basis: Jacobi eigenvectors of P; lambda_hat = 1 - eigenvalue.
    oracle::Matrix vecs;
    const auto evals = oracle::jacobi_eigenvalues(oracle::torus_matrix(shape.d, shape.n), N, &vecs);
    auto rel = [](double a, double b) {
      const double s = std::max(std::abs(a), std::abs(b));
      return s > 0 ? std::abs(a - b) / s : 0.0;
    };
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> y(N);
      for (double& v : y) v = g(rng);
      const double E = ev.energy(y);
      const double V = ev.variance(y);
      const double S = ev.sum_delta_sq(y);
      const auto c = spectral_coords(y, shape);
      double e = 0, v = 0, s = 0;
      for (std::size_t x = 1; x < N; ++x) {
        e += ts.lambda_hat[x] * c[x] * c[x];
        v += c[x] * c[x];
        s += ts.lambda_hat[x] * ts.lambda_hat[x] * c[x] * c[x];
      }
      s *= Nd;
      worst = std::max({worst, rel(E, e), rel(V, v), rel(S, s)});
      // Same identities through the independent eigenbasis (constant mode is index 0).
      double eo = 0, vo = 0, so = 0;
      for (std::size_t x = 1; x < N; ++x) {
        double dot = 0;
        for (std::size_t i = 0; i < N; ++i) dot += vecs[i * N + x] * y[i];
        const double cx = dot / std::sqrt(Nd);
        const double lam = 1.0 - evals[x];
        eo += lam * cx * cx;
        vo += cx * cx;
        so += lam * lam * cx * cx;
      }
      so *= Nd;
      worst_oracle = std::max({worst_oracle, rel(E, eo), rel(V, vo), rel(S, so)});
    }
  }
  out.pass = worst <= 1e-9 && worst_oracle <= 1e-9;
  out.summary = cat("max relative error ", worst, " (Fourier basis), ", worst_oracle,
                    " (Jacobi basis); tolerance 1e-9");
  return out;
}

// 2. Per-event mass conservation and energy drop.
Outcome per_event_invariants() {
  Outcome out;
  const Kernel k = build_kernel(GraphSpec::torus(1, 5));
  const FunctionalEvaluator ev(k);
  const double N = 5.0;
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(1.0);
  MassProfile x(5);
  for (double& v : x) v = e(rng);
  MassProfile y = x;
  double drift = 0.0;
  double drop_err = 0.0;
  double drop_err_literal = 0.0;
  double max_rise = 0.0;
  const double E0 = ev.energy(y);
  ClockStream clock(2, 0, 5);
  const double mass0 = std::accumulate(x.begin(), x.end(), 0.0);
  for (int i = 0; i < 10000; ++i) {
    const auto ev1 = clock.next();
    const double before = std::accumulate(x.begin(), x.end(), 0.0);
    potlatch_step(x, ev1.site, k);
    const double after = std::accumulate(x.begin(), x.end(), 0.0);
    drift = std::max(drift, std::abs(after - before) / mass0);
  }
  ClockStream clock2(2, 1, 5);
  for (int i = 0; i < 10000; ++i) {
    const auto ev2 = clock2.next();
    double delta = -y[ev2.site];
    for (const auto& entry : k.row(ev2.site)) delta += entry.p * y[entry.col];
    const double before = ev.energy(y);
    smoothing_step(y, ev2.site, k);
    const double after = ev.energy(y);
    const double drop = before - after;
    max_rise = std::max(max_rise, -drop);
    drop_err = std::max(drop_err, std::abs(drop - delta * delta / N) / E0);
    drop_err_literal = std::max(drop_err_literal, std::abs(drop - delta * delta / (2 * N)) / E0);
  }
  out.pass = drift <= 1e-12 && drop_err <= 1e-12 && max_rise <= 1e-12 * E0;
  out.summary = cat("mass drift ", drift, "; |drop - Delta^2/N| / E(0) = ", drop_err, "; tolerance 1e-12");
  out.info.push_back(cat("drop against Delta^2/(2N) instead: max error ", drop_err_literal,
                         " relative to E(0) (energy summed over ordered neighbour pairs)"));
  return out;
}

// 3. Integral of G and G(0).
Outcome g_integral() {
  Outcome out;
  double worst_int = 0.0;
  double worst_g0 = 0.0;
  int cases = 0;
  for (int d = 1; d <= 3; ++d)
    for (int n : {3, 5, 7, 9}) {
      if (std::pow(n, d) > 1e4) continue;
      const auto g = compute_G(d, n);
      worst_int = std::max(worst_int, std::abs(integral_check_G(g) - 0.5));
      worst_g0 = std::max(worst_g0, std::abs(g.values[0] - (1.0 + 0.5 / d)));
      ++cases;
    }
  out.pass = worst_int <= 1e-6 && worst_g0 <= 1e-9;
  out.summary = cat(cases, " (d,n) pairs; max |int G - 1/2| = ", worst_int, " (tol 1e-6), max |G(0) - 1 - 1/(2d)| = ",
                    worst_g0, " (tol 1e-9)");
  return out;
}

// 4. Renewal solution against Monte Carlo.
Outcome renewal() {
  Outcome out;
  const std::vector<double> times = {0.0, 0.5, 1.0, 2.0, 5.0};
  auto cfg = make_config(GraphSpec::torus(1, 5), ProcessMode::Smoothing, delta0(), 5.0, times, 200000, 4);
  const auto res = run_experiment(cfg);
  const auto& S = res.functionals[4];
  const auto H = renewal_H(compute_G(1, 5, kDefaultGridStep, 6.0));
  double worst = 0.0;
  std::ostringstream detail;
  detail.precision(6);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double z = std::abs(S.mean[i] - H.at(times[i])) / S.standard_error[i];
    worst = std::max(worst, z);
    detail << " t=" << times[i] << ": H=" << H.at(times[i]) << " MC=" << S.mean[i] << "+-" << S.standard_error[i];
  }
  out.pass = worst <= 3.0;
  out.summary = cat("max |MC - H| / se = ", worst, " (limit 3), 2e5 replicas");
  out.info.push_back(detail.str());
  return out;
}

// 5. Global envelope on random kernels and two tori.
Outcome global_envelope() {
  Outcome out;
  std::vector<GraphSpec> graphs;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5; ++i) {
    const std::size_t n = 4 + static_cast<std::size_t>(i) + (i == 4 ? 2 : 0);
    const auto rk = oracle::random_reversible(n, rng, 0.4);
    graphs.push_back(GraphSpec::custom(static_cast<int>(n), rk.P));
  }
  graphs.push_back(GraphSpec::torus(1, 5));
  graphs.push_back(GraphSpec::torus(2, 3));
  out.pass = true;
  double worst = -1e300;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    auto cfg = make_config(graphs[i], ProcessMode::Smoothing, delta0(), 10.0, geometric_schedule(0.05, 10.0, 10),
                           100000, 50 + i, {"global_envelope"});
    const auto res = run_experiment(cfg);
    const auto& v = res.report.verdicts.at(0);
    // Report the worst standardized excess over the envelope.
    const Kernel k = build_kernel(graphs[i]);
    const double gamma2 = numeric_two_step_gap(k).gap_two_step;
    const auto& V = res.functionals[0];
    const double V0 = V.mean[0];
    double z = -1e300;
    for (std::size_t s = 1; s < V.mean.size(); ++s)
      z = std::max(z, (V.mean[s] - global_envelope_value(V0, gamma2, V.sample_times[s])) / V.standard_error[s]);
    worst = std::max(worst, z);
    out.pass = out.pass && v.pass;
    out.info.push_back(cat(graphs[i].describe(), ": gamma2 ", gamma2, ", max (mean - envelope) / se = ", z,
                           v.pass ? "" : " FAIL"));
  }
  out.summary = cat("7 kernels, 1e5 replicas each; max (mean V - envelope) / se = ", worst, " (limit 3)");
  return out;
}

// 6. Polynomial regime exponents on T_101^1.
Outcome torus_poly() {
  Outcome out;
  const int n = 101;
  auto times = geometric_schedule(1.0, 100.0, 20);
  auto cfg = make_config(GraphSpec::torus(1, n), ProcessMode::Smoothing, delta0(), 100.0, times, 20000, 6);
  const auto res = run_experiment(cfg);
  const double rate = G_tail_rate(1, n);
  const auto fv = rate_fit(res.functionals[0], 10.0, 100.0, rate);
  const auto fe = rate_fit(res.functionals[1], 10.0, 100.0, rate);
  const double gap = fv.poly_exponent - fe.poly_exponent;
  out.pass = fv.poly_exponent >= -0.65 && fv.poly_exponent <= -0.35 && fe.poly_exponent >= -1.65 &&
             fe.poly_exponent <= -1.35 && std::abs(gap - 1.0) <= 0.3;
  out.summary = cat("E V exponent ", fv.poly_exponent, " in [-0.65,-0.35]; E E exponent ", fe.poly_exponent,
                    " in [-1.65,-1.35]; difference ", gap, " in 1 +- 0.3 (exp factor fixed at 2 gamma11 = ", rate, ")");
  try {
    const auto jv = rate_fit(res.functionals[0], 10.0, 100.0);
    const auto je = rate_fit(res.functionals[1], 10.0, 100.0);
    out.info.push_back(cat("joint fit with free rate: V exponent ", jv.poly_exponent, " rate ", jv.exp_rate,
                           "; E exponent ", je.poly_exponent, " rate ", je.exp_rate));
  } catch (const potlatch::Error& e) {
    out.info.push_back(cat("joint fit failed: ", e.what()));
  }
  return out;
}

// 7. Exponential regime rate on T_15^1.
Outcome torus_exp() {
  Outcome out;
  const int n = 15;
  auto cfg = make_config(GraphSpec::torus(1, n), ProcessMode::Smoothing, delta0(), 900.0, uniform_schedule(15.0, 900.0),
                         20000, 7);
  const auto res = run_experiment(cfg);
  const double target = G_tail_rate(1, n);
  const auto fit = rate_fit(res.functionals[0], 225.0, 900.0);
  const double rel = std::abs(fit.exp_rate - target) / target;
  out.pass = rel <= 0.15;
  out.summary = cat("fitted rate ", fit.exp_rate, " vs 2 gamma11 = ", target, " (relative difference ", rel,
                    ", limit 0.15)");
  out.info.push_back(cat("fitted polynomial exponent ", fit.poly_exponent, ", R^2 ", fit.r_squared));
  return out;
}

// 8. Duality on T_3^1 and complete(3).
Outcome duality() {
  Outcome out;
  out.pass = true;
  std::vector<std::string> parts;
  for (auto g : {GraphSpec::torus(1, 3), GraphSpec::complete(3)}) {
    const auto init = g.describe().rfind("torus", 0) == 0 ? constant_one() : custom_init({1, 0, 0});
    auto cfg = make_config(g, ProcessMode::Dual, init, 2.0, {0.0, 0.5, 1.0, 2.0}, 100000, 8);
    const auto v = duality_experiment(cfg);
    out.pass = out.pass && v.pass;
    parts.push_back(cat(g.describe(), " max |diff|/se = ", v.observed, " vs z = ", v.tolerance));
  }
  out.summary = cat(parts[0], "; ", parts[1], " (1e5 replicas per side)");
  return out;
}

// 9. Corollary integral equals V0.
Outcome corollary() {
  Outcome out;
  out.pass = true;
  for (auto g : {GraphSpec::torus(1, 3), GraphSpec::complete(3)}) {
    auto cfg = make_config(g, ProcessMode::Smoothing, delta0(), 10.0, uniform_schedule(0.01, 10.0), 100000, 9,
                           {"corollary"});
    const auto res = run_experiment(cfg);
    const auto& v = res.report.verdicts.at(0);
    out.pass = out.pass && v.pass;
    out.info.push_back(cat(g.describe(), ": integral ", v.observed, " vs V0 ", v.bound, ", |diff| ",
                           std::abs(v.observed - v.bound), " allowed ", v.tolerance, " (", v.detail, ")"));
  }
  out.summary = "integral of E(E2 + E*) vs V0 = 2/9 on T_3^1 and complete(3), 1e5 replicas";
  return out;
}

// 10. Heat-kernel martingales.
Outcome martingale() {
  Outcome out;
  auto cfg = make_config(GraphSpec::torus(1, 5), ProcessMode::Smoothing, delta0(), 2.0,
                         {0.0, 0.25, 0.5, 1.0, 1.5, 2.0}, 100000, 10, {"martingale"});
  const auto res = run_experiment(cfg);
  const auto& v = res.report.verdicts.at(0);
  out.pass = v.pass;
  out.summary = cat("max |E M_f(t) - E M_f(0)| / se = ", v.observed * v.tolerance, " (Bonferroni 3-sigma z = ",
                    v.tolerance, "), f = 1 and heat-evolved delta_0, 1e5 replicas");
  return out;
}

// 11. Closed-form gamma2 against numerical eigensolves.
Outcome gap_formulas() {
  Outcome out;
  double worst = 0.0;
  double worst_jacobi = 0.0;
  int cases = 0;
  int dense = 0;
  int banded = 0;
  int lanczos = 0;
  std::string worst_case;
  for (int d = 1; d <= 12; ++d) {
    for (int n = 3;; n += 2) {
      const double N = std::pow(n, d);
      if (N > 3000) break;
      const Kernel k = build_kernel(GraphSpec::torus(d, n));
      const auto numeric = numeric_two_step_gap(k);
      const double err = std::abs(numeric.gap_two_step - torus_gamma2(d, n));
      if (err > worst) {
        worst = err;
        worst_case = cat("d=", d, " n=", n);
      }
      (numeric.route == linalg::EigenRoute::Dense     ? dense
       : numeric.route == linalg::EigenRoute::Lanczos ? lanczos
                                                      : banded)++;
      if (N <= 150) {
        const auto Nn = static_cast<std::size_t>(N);
        const double ref = oracle::two_step_gap(oracle::torus_matrix(d, n), std::vector<double>(Nn, 1.0 / N));
        worst_jacobi = std::max(worst_jacobi, std::abs(ref - torus_gamma2(d, n)));
      }
      ++cases;
    }
  }
  out.pass = worst <= 1e-10 && worst_jacobi <= 1e-10;
  out.summary = cat(cases, " tori with n^d <= 3000; max |closed form - eigensolve| = ", worst, " at ", worst_case,
                    " (tol 1e-10)");
  out.info.push_back(cat("routes: ", dense, " dense, ", banded, " banded inertia, ", lanczos,
                         " Lanczos; Jacobi cross-check (n^d <= 150) max error ", worst_jacobi));
  return out;
}

// 12. Coupling Wasserstein bound.
Outcome w2_coupling() {
  Outcome out;
  out.pass = true;
  std::vector<std::string> parts;
  for (int n : {3, 5}) {
    auto cfg = make_config(GraphSpec::torus(1, n), ProcessMode::Dual, constant_one(), 8.0,
                           {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}, 20000, 12);
    const Kernel k = build_kernel(cfg.graph);
    const double gamma2 = numeric_two_step_gap(k).gap_two_step;
    const double t_inf = default_t_inf(k);
    const auto summary = coupling_experiment(cfg, t_inf);
    double worst = -1e300;
    bool ok = true;
    try {
      for (std::size_t s = 0; s + 1 < summary.sample_times.size(); ++s) {
        const auto b = coupling_w2_bound(summary, s, k, gamma2);
        const double excess = b.statistic + b.bias_bound - b.closed_form;
        worst = std::max(worst, excess);
        ok = ok && excess <= 3.0 * b.standard_error;
        out.info.push_back(cat("T_", n, " t=", summary.sample_times[s], ": statistic ", b.statistic, " +- ",
                               b.standard_error, ", bias <= ", b.bias_bound, ", closed form ", b.closed_form));
      }
    } catch (const potlatch::Error& e) {
      ok = false;
      out.info.push_back(e.what());
    }
    out.pass = out.pass && ok;
    parts.push_back(cat("T_", n, "^1 max(statistic + bias - bound) = ", worst));
  }
  out.summary = cat(parts[0], "; ", parts[1], " (must be <= 3 se)");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--workers", g_workers, "Worker threads (0: all cores)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "spectral functional identities", 5, spectral_identities},
      {2, "per-event invariants", 10, per_event_invariants},
      {3, "integral of G", 30, g_integral},
      {4, "renewal consistency", 300, renewal},
      {5, "global envelope", 300, global_envelope},
      {6, "torus polynomial regime", 1200, torus_poly},
      {7, "torus exponential regime", 600, torus_exp},
      {8, "duality", 300, duality},
      {9, "corollary integral", 300, corollary},
      {10, "martingale", 300, martingale},
      {11, "closed-form gaps", 60, gap_formulas},
      {12, "Wasserstein coupling bound", 300, w2_coupling},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << "#" << c.id << " " << c.name << ": " << o.summary << " ["
              << fmt("%.1f", secs) << " s, limit " << c.limit_seconds << " s" << (in_time ? "" : ", TOO SLOW")
              << "]\n";
    for (const auto& line : o.info) std::cout << "         " << line << "\n";
    std::cout.flush();
  }
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << "\n";
  return failures == 0 ? 0 : 1;
}
