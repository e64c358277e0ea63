// Command-line front end: spectrum, simulate, renewal, envelope, duality, verify.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "potlatch/analysis.hpp"
#include "potlatch/error.hpp"
#include "potlatch/harness.hpp"
#include "potlatch/spectral.hpp"

namespace {

using namespace potlatch;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Accepts "torus:D:N", "complete:N", inline JSON, or a path to a JSON file.
GraphSpec parse_graph_arg(const std::string& arg) {
  std::string text;
  if (arg.rfind("torus:", 0) == 0) {
    int d = 0;
    int n = 0;
    if (std::sscanf(arg.c_str(), "torus:%d:%d", &d, &n) != 2)
      throw Error(ErrorCode::ConfigInvalid, "graph: expected torus:D:N");
    text = json{{"kind", "torus"}, {"d", d}, {"n", n}}.dump();
  } else if (arg.rfind("complete:", 0) == 0) {
    text = json{{"kind", "complete"}, {"n", std::stoi(arg.substr(9))}}.dump();
  } else if (!arg.empty() && arg.front() == '{') {
    text = arg;
  } else {
    text = read_file(arg);
  }
  const std::string doc = "{\"graph\": " + text + ", \"horizon\": 0}";
  return parse_experiment_config(doc).graph;
}

ExperimentConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                             const std::optional<std::size_t>& workers) {
  auto cfg = parse_experiment_config(read_file(path));
  if (seed) cfg.seed = *seed;
  if (workers) cfg.workers = *workers;
  return cfg;
}

void write_grid_csv(std::ostream& os, const GridFunction& g, double every) {
  os << "t,value\n" << std::setprecision(17);
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(every / g.h)));
  for (std::size_t i = 0; i < g.values.size(); i += stride) os << g.time(i) << ',' << g.values[i] << '\n';
  if ((g.values.size() - 1) % stride != 0) os << g.end_time() << ',' << g.values.back() << '\n';
}

int finish(const VerdictReport& report) {
  std::cout << report.to_json() << '\n';
  return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Potlatch and smoothing process simulator and verification harness"};
  app.require_subcommand(1);

  std::string graph_arg;
  auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues and gaps of a kernel as JSON");
  spectrum->add_option("--graph", graph_arg, "torus:D:N, complete:N, JSON or JSON file")->required();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out_path;
  std::string summary_prefix;
  auto* simulate = app.add_subcommand("simulate", "Run an experiment config");
  simulate->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Override the config seed");
  simulate->add_option("--workers", workers, "Worker threads (0: all cores)");
  simulate->add_option("--out", out_path, "Per-replica trajectory CSV");
  simulate->add_option("--summary", summary_prefix, "Prefix for per-functional mean CSVs");

  int d = 1;
  int n = 5;
  double horizon = 0.0;
  double step = kDefaultGridStep;
  double every = 0.0;
  auto* renewal = app.add_subcommand("renewal", "Tabulate the renewal solution H as CSV");
  renewal->add_option("--d", d, "Torus dimension")->required();
  renewal->add_option("--n", n, "Torus side (odd)")->required();
  renewal->add_option("--horizon", horizon, "Grid end (0: automatic)");
  renewal->add_option("--step", step, "Grid step");
  renewal->add_option("--every", every, "Output spacing (default: every grid point)");

  std::string which;
  double v0 = -1.0;
  auto* envelope = app.add_subcommand("envelope", "Tabulate an envelope as CSV");
  envelope->add_option("--which", which, "Envelope kind")
      ->required()
      ->check(CLI::IsMember({"global", "energy", "variance", "avg"}));
  envelope->add_option("--graph", graph_arg, "Kernel (global) or torus (others)");
  envelope->add_option("--config", config_path, "avg: experiment config to estimate the statistic");
  envelope->add_option("--v0", v0, "Initial variance for the global envelope (default: delta_0)");
  envelope->add_option("--horizon", horizon, "Grid end")->required();
  envelope->add_option("--step", step, "Grid step");
  envelope->add_option("--seed", seed, "Override the config seed");
  envelope->add_option("--workers", workers, "Worker threads");

  auto* duality = app.add_subcommand("duality", "Compare direct and dual-coupled laws");
  duality->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  duality->add_option("--seed", seed, "Override the config seed");
  duality->add_option("--workers", workers, "Worker threads");

  std::string suite;
  std::optional<std::size_t> replicas;
  std::uint64_t suite_seed = 1;
  std::size_t suite_workers = 0;
  auto* verify = app.add_subcommand("verify", "Run a built-in verification suite");
  std::vector<std::string> suites(known_suites().begin(), known_suites().end());
  verify->add_option("--suite", suite, "Suite name")->required()->check(CLI::IsMember(suites));
  verify->add_option("--replicas", replicas, "Override replica counts");
  verify->add_option("--seed", suite_seed, "Seed");
  verify->add_option("--workers", suite_workers, "Worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*spectrum) {
      const Kernel k = build_kernel(parse_graph_arg(graph_arg));
      const auto dec = decompose(k);
      json out = {{"eigenvalues", dec.eigenvalues},
                  {"gap_abs", dec.gap_abs},
                  {"gap_two_step", dec.gap_two_step}};
      if (k.is_torus()) {
        const auto ts = torus_gaps(k.torus()->d, k.torus()->n);
        out["gamma11"] = ts.gamma11;
        out["gamma2d"] = ts.gamma2d;
      } else {
        out["gamma11"] = nullptr;
        out["gamma2d"] = nullptr;
      }
      std::cout << out.dump(2) << '\n';
      return 0;
    }
    if (*simulate) {
      const auto cfg = load_config(config_path, seed, workers);
      const auto result = run_experiment(cfg, !out_path.empty());
      if (!out_path.empty()) {
        std::ofstream os(out_path);
        write_trajectory_csv(os, result.trajectories);
      }
      if (!summary_prefix.empty()) {
        const auto names = functional_names();
        for (std::size_t f = 0; f < names.size(); ++f) {
          std::ofstream os(summary_prefix + std::string(names[f]) + ".csv");
          write_estimate_csv(os, result.functionals[f]);
        }
      }
      return finish(result.report);
    }
    if (*renewal) {
      const auto g = compute_G(d, n, step, horizon);
      const auto H = renewal_H(g);
      write_grid_csv(std::cout, H, every > 0.0 ? every : step);
      return 0;
    }
    if (*envelope) {
      if (which == "avg" && !config_path.empty()) {
        const auto cfg = load_config(config_path, seed, workers);
        const auto res = avg_mass_experiment(cfg);
        write_estimate_csv(std::cout, res.statistic);
        return 0;
      }
      if (graph_arg.empty()) throw Error(ErrorCode::ConfigInvalid, "graph: required for this envelope");
      const Kernel k = build_kernel(parse_graph_arg(graph_arg));
      GridFunction g;
      if (which == "global") {
        if (v0 < 0.0) {
          MassProfile delta(k.size(), 0.0);
          delta[0] = 1.0;
          v0 = FunctionalEvaluator(k).variance(delta);
        }
        g = envelope_global(k, v0, step, horizon);
      } else {
        if (!k.is_torus()) throw Error(ErrorCode::NotATorus, "torus envelopes need a torus graph");
        const auto kind = which == "energy"     ? EnvelopeKind::Energy
                          : which == "variance" ? EnvelopeKind::Variance
                                                : EnvelopeKind::Average;
        const auto& shape = *k.torus();
        g = envelope_torus(shape.d, shape.n, kind, default_envelope_params(shape.d, shape.n, kind), step,
                           horizon);
      }
      write_grid_csv(std::cout, g, step);
      return 0;
    }
    if (*duality) {
      const auto cfg = load_config(config_path, seed, workers);
      VerdictReport report;
      report.verdicts.push_back(duality_experiment(cfg));
      return finish(report);
    }
    if (*verify) return finish(run_suite(suite, replicas, suite_seed, suite_workers));
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return 0;
}
