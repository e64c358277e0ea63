#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "potlatch/kernel.hpp"

namespace potlatch {

enum class ProcessKind { Smoothing, Potlatch };
std::string_view to_string(ProcessKind kind);

using MassProfile = std::vector<double>;

/// Generator keyed by (seed, replica_id, stream); distinct keys give
/// independent streams.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t replica_id, std::uint64_t stream = 0);

struct ClockEvent {
  double time;
  std::size_t site;
};

class Clock {
 public:
  virtual ~Clock() = default;
  /// Next ring; time is +inf once the clock is exhausted.
  virtual ClockEvent next() = 0;
};

/// Superposition of n unit-rate Poisson clocks: a rate-n stream with uniform
/// site marks.
class ClockStream final : public Clock {
 public:
  ClockStream(std::uint64_t seed, std::uint64_t replica_id, std::size_t n_sites);
  ClockEvent next() override;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t replica_id() const { return replica_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t replica_id_;
  std::mt19937_64 rng_;
  std::exponential_distribution<double> gap_;
  std::uniform_int_distribution<std::size_t> site_;
  double time_ = 0.0;
};

/// Fixed list of events, for tests and contrived scenarios.
class ScriptedClock final : public Clock {
 public:
  explicit ScriptedClock(std::vector<ClockEvent> events) : events_(std::move(events)) {}
  ClockEvent next() override;

 private:
  std::vector<ClockEvent> events_;
  std::size_t next_ = 0;
};

/// Y_site <- sum_j p_{site,j} Y_j. Returns the increment applied at `site`.
double smoothing_step(MassProfile& y, std::size_t site, const Kernel& k);
/// X_site <- p_{site,site} X_site, X_j += p_{site,j} X_site(old).
/// Returns the change in total mass (rounding only). Throws NegativeMass.
double potlatch_step(MassProfile& x, std::size_t site, const Kernel& k);

struct FunctionalRecord {
  double t = 0.0;
  double V = 0.0;
  double E = 0.0;
  double E2 = 0.0;
  double Estar = 0.0;
  double sum_delta_sq = 0.0;
  double Ybar = 0.0;
  double min_mass = 0.0;
  double max_mass = 0.0;
};

inline constexpr std::size_t kFunctionalCount = 8;
/// Field names in CSV order (excluding t).
std::span<const std::string_view> functional_names();
double functional_value(const FunctionalRecord& r, std::size_t field);

/// Evaluates V, E, E2, E*, sum Delta^2 and the mass summaries. E and
/// sum_delta_sq are NaN in records for non-torus kernels.
class FunctionalEvaluator {
 public:
  explicit FunctionalEvaluator(const Kernel& k);

  const Kernel& kernel() const { return *kernel_; }
  FunctionalRecord evaluate(std::span<const double> y, double t = 0.0) const;
  /// Same as evaluate, but functionals use y - offset implicitly: V, E, E2,
  /// E*, sum Delta^2 from `centered`, mass summaries shifted by `offset`.
  FunctionalRecord evaluate_centered(std::span<const double> centered, double offset,
                                     double t = 0.0) const;

  double variance(std::span<const double> y) const;
  /// Throws NotATorus.
  double energy(std::span<const double> y) const;
  double two_step_energy(std::span<const double> y) const;
  double estar(std::span<const double> y) const;
  /// Throws NotATorus.
  double sum_delta_sq(std::span<const double> y) const;

 private:
  const Kernel* kernel_;
  Kernel two_step_;
};

/// Convenience wrapper building a temporary evaluator.
FunctionalRecord eval_functionals(std::span<const double> y, const Kernel& k);

struct FunctionalSeries {
  ProcessKind kind = ProcessKind::Smoothing;
  std::uint64_t seed = 0;
  std::uint64_t replica_id = 0;
  std::vector<FunctionalRecord> records;
};

/// Called at each sample time. The state is `centered + offset` elementwise;
/// offset is 0 unless smoothing recentering is active.
using SampleObserver = std::function<void(std::size_t sample_index, double t,
                                          std::span<const double> centered, double offset)>;

struct SimulationOptions {
  /// Evaluate functionals at sample times (off for observer-only runs).
  bool record_functionals = true;
  /// Smoothing only: periodically subtract the weighted mean into an offset
  /// so late-time differences keep full relative precision.
  bool recenter = true;
  /// Event budget; 0 picks 10 * n * horizon + 10^6.
  std::size_t max_events = 0;
  /// Smoothing on a torus: compare each event's energy drop with Delta^2 / N.
  bool track_energy_identity = false;
};

struct SimulationResult {
  FunctionalSeries series;
  MassProfile final_state;
  std::size_t events = 0;
  /// Potlatch: max over events of |mass change| / total mass.
  double max_mass_drift = 0.0;
  /// Smoothing on a torus: max over events of |energy drop - Delta^2 / N|,
  /// only filled when `track_energy_identity` is set.
  double max_energy_identity_error = 0.0;
};

/// Runs one trajectory on [0, horizon]; functionals are taken from the state
/// after every event at time <= t. Throws HorizonExceeded, NegativeMass,
/// ConfigInvalid (bad sample times).
SimulationResult simulate(ProcessKind kind, const Kernel& k, const FunctionalEvaluator* evaluator,
                          MassProfile init, double horizon, std::span<const double> sample_times,
                          Clock& clock, const SampleObserver& observer = {},
                          const SimulationOptions& options = {});

inline constexpr std::size_t kDualMemoryCap = 10'000'000;

struct DualSample {
  double t = 0.0;
  MassProfile x;        // potlatch state
  MassProfile x_tilde;  // sum_j x0_j Y^(i)_j
  std::vector<double> y_max;  // M^(i)
  std::vector<double> y_min;  // m^(i)
};

struct DualResult {
  std::vector<DualSample> samples;
  /// Y^(i) profiles at the horizon, row i = Y^(i) (only when requested).
  std::vector<double> final_family;
};

/// Potlatch X and the n smoothing processes Y^(i) (Y^(i)(0) = delta_i) driven
/// by one clock. Throws MemoryCapExceeded when n^2 > cap.
DualResult simulate_dual_coupled(const Kernel& k, std::span<const double> x0, double horizon,
                                 std::span<const double> sample_times, Clock& clock,
                                 bool keep_final_family = false,
                                 std::size_t memory_cap = kDualMemoryCap);

/// f(u - t_k, .) for each sample time, from f0 by the torus heat semigroup;
/// value(k, y) = sum_i f(u - t_k, i) y_i.
class MartingaleFunctional {
 public:
  MartingaleFunctional(double u, std::span<const double> f0, const TorusShape& shape,
                       std::span<const double> sample_times);
  double value(std::size_t sample_index, std::span<const double> y, double offset = 0.0) const;
  std::size_t size() const { return weights_.size(); }

 private:
  std::vector<std::vector<double>> weights_;
  std::vector<double> weight_sums_;
};

/// M_f(t_k) for a recorded list of states (one per sample time).
std::vector<double> martingale_series(double u, std::span<const double> f0,
                                      const TorusShape& shape,
                                      std::span<const double> sample_times,
                                      const std::vector<MassProfile>& states);

}  // namespace potlatch
