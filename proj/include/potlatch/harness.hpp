#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "potlatch/analysis.hpp"
#include "potlatch/engine.hpp"
#include "potlatch/kernel.hpp"

namespace potlatch {

enum class ProcessMode { Smoothing, Potlatch, Dual };

enum class IidDistribution { Exponential, BernoulliScaled, Lognormal };

struct InitSpec {
  enum class Kind { Delta, Constant, Iid, Custom };
  Kind kind = Kind::Delta;
  std::size_t site = 0;
  double value = 1.0;
  double mean = 1.0;
  double second_moment = 2.0;
  IidDistribution distribution = IidDistribution::Exponential;
  std::vector<double> values;
};

struct ExperimentConfig {
  GraphSpec graph = GraphSpec::torus(1, 5);
  ProcessMode process = ProcessMode::Smoothing;
  InitSpec init;
  double horizon = 10.0;
  std::vector<double> sample_times;  // resolved; empty means default schedule
  std::size_t replicas = 1000;
  std::uint64_t seed = 1;
  std::size_t workers = 0;  // 0: hardware concurrency
  std::vector<std::string> checks;
  std::optional<double> t_inf;  // default 20 / gamma2
};

/// Parses the JSON experiment document. Throws ConfigInvalid naming the field.
ExperimentConfig parse_experiment_config(const std::string& text);
/// Field-level validation (also run by the parser). Throws ConfigInvalid.
void validate_config(const ExperimentConfig& cfg);
std::string config_to_json(const ExperimentConfig& cfg);

/// {0} followed by `per_decade` log-spaced points per decade from `start`,
/// ending exactly at `horizon`.
std::vector<double> geometric_schedule(double start, double horizon, int per_decade = 20);
std::vector<double> uniform_schedule(double step, double horizon);

/// Initial profile for one replica (iid draws use `rng`).
MassProfile sample_initial(const InitSpec& init, std::size_t n_sites, std::mt19937_64& rng);

/// Names accepted in ExperimentConfig::checks.
const std::vector<std::string_view>& known_checks();

struct Verdict {
  std::string check;
  bool pass = false;
  double observed = 0.0;
  double bound = 0.0;
  double tolerance = 0.0;
  double runtime_seconds = 0.0;
  std::string detail;
};

struct VerdictReport {
  std::vector<Verdict> verdicts;

  bool all_pass() const;
  std::string to_json() const;
  static VerdictReport from_json(const std::string& text);
};

struct ExperimentResult {
  /// One estimate per functional, in functional_names() order.
  std::vector<McEstimate> functionals;
  VerdictReport report;
  /// Per-replica series, only when requested.
  std::vector<FunctionalSeries> trajectories;
};

std::size_t resolve_workers(std::size_t requested);

/// Runs `fn(replica_id, acc)` for every replica. Replicas are grouped in
/// fixed blocks, each block accumulates into a copy of `prototype`, and the
/// blocks are merged in block order, so the result does not depend on the
/// number of workers.
template <class Acc, class Fn>
Acc run_replicas(std::size_t replicas, std::size_t workers, const Acc& prototype, Fn&& fn,
                 std::size_t block = 256) {
  const std::size_t blocks = (replicas + block - 1) / block;
  std::vector<std::optional<Acc>> partial(blocks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&]() {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        Acc acc = prototype;
        const std::size_t end = std::min(replicas, (b + 1) * block);
        for (std::size_t r = b * block; r < end; ++r) fn(r, acc);
        partial[b].emplace(std::move(acc));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(blocks);
        return;
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(resolve_workers(workers), blocks));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  Acc total = prototype;
  for (auto& p : partial) total.merge(*p);
  return total;
}

/// Simulates all replicas, evaluates the configured checks.
ExperimentResult run_experiment(const ExperimentConfig& cfg, bool keep_trajectories = false);

struct AvgMassResult {
  McEstimate statistic;  // (Ybar(t) - Ybar(t_inf))^2
  double t_inf = 0.0;
  double bias_bound = 0.0;  // sqrt of mean (M - m)^2 at t_inf
  std::optional<RateFit> fit;
  EnvelopeParams envelope;
};
AvgMassResult avg_mass_experiment(const ExperimentConfig& cfg);

/// Direct potlatch replicas against dual-coupled replicas with independent
/// seeds; per site and time, means and variances compared at a Bonferroni
/// corrected 3 sigma level.
Verdict duality_experiment(const ExperimentConfig& cfg);

/// Dual-coupled runs aggregated for the coupling Wasserstein estimator; the
/// summary grid is the config sample times followed by t_inf.
CouplingSummary coupling_experiment(const ExperimentConfig& cfg, double t_inf);
Verdict w2_coupling_verdict(const ExperimentConfig& cfg);

double default_t_inf(const Kernel& k);

/// Built-in verification suites for the `verify` subcommand.
const std::vector<std::string_view>& known_suites();
VerdictReport run_suite(std::string_view suite, std::optional<std::size_t> replicas,
                        std::uint64_t seed, std::size_t workers);

/// CSV with header replica_id,t,V,E,E2,Estar,sum_delta_sq,Ybar,min_mass,max_mass.
void write_trajectory_csv(std::ostream& os, const std::vector<FunctionalSeries>& series);
/// CSV t,value,stderr for one estimate.
void write_estimate_csv(std::ostream& os, const McEstimate& est);

}  // namespace potlatch
