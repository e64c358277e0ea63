#include "potlatch/engine.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <numeric>

#include "potlatch/error.hpp"
#include "potlatch/spectral.hpp"

namespace potlatch {

std::string_view to_string(ProcessKind kind) {
  return kind == ProcessKind::Smoothing ? "smoothing" : "potlatch";
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t replica_id, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replica_id),
                    static_cast<std::uint32_t>(replica_id >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

ClockStream::ClockStream(std::uint64_t seed, std::uint64_t replica_id, std::size_t n_sites)
    : seed_(seed),
      replica_id_(replica_id),
      rng_(make_rng(seed, replica_id)),
      gap_(static_cast<double>(n_sites)),
      site_(0, n_sites - 1) {}

ClockEvent ClockStream::next() {
  // Exponential gaps are a.s. positive; guard the measure-zero zero draw so
  // times stay strictly increasing.
  double g = gap_(rng_);
  while (g <= 0.0) g = gap_(rng_);
  time_ += g;
  return {time_, site_(rng_)};
}

ClockEvent ScriptedClock::next() {
  if (next_ >= events_.size()) return {std::numeric_limits<double>::infinity(), 0};
  return events_[next_++];
}

double smoothing_step(MassProfile& y, std::size_t site, const Kernel& k) {
  double acc = 0.0;
  for (const auto& e : k.row(site)) acc += e.p * y[e.col];
  const double delta = acc - y[site];
  y[site] = acc;
  return delta;
}

double potlatch_step(MassProfile& x, std::size_t site, const Kernel& k) {
  const double mass = x[site];
  if (mass < -1e-12) throw Error(ErrorCode::NegativeMass, "negative mass at ringing site");
  if (mass == 0.0) return 0.0;
  double before = mass;
  double after = 0.0;
  double keep = 0.0;
  for (const auto& e : k.row(site)) {
    if (e.col == site) {
      keep = e.p * mass;
      continue;
    }
    before += x[e.col];
    x[e.col] += e.p * mass;
    after += x[e.col];
  }
  x[site] = keep;
  after += keep;
  return after - before;
}

namespace {

constexpr std::array<std::string_view, kFunctionalCount> kNames = {
    "V", "E", "E2", "Estar", "sum_delta_sq", "Ybar", "min_mass", "max_mass"};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::span<const std::string_view> functional_names() { return kNames; }

double functional_value(const FunctionalRecord& r, std::size_t field) {
  switch (field) {
    case 0: return r.V;
    case 1: return r.E;
    case 2: return r.E2;
    case 3: return r.Estar;
    case 4: return r.sum_delta_sq;
    case 5: return r.Ybar;
    case 6: return r.min_mass;
    case 7: return r.max_mass;
    default: throw Error(ErrorCode::DimensionMismatch, "functional index out of range");
  }
}

FunctionalEvaluator::FunctionalEvaluator(const Kernel& k) : kernel_(&k), two_step_(two_step_kernel(k)) {}

double FunctionalEvaluator::variance(std::span<const double> y) const {
  const auto pi = kernel_->pi();
  double mean = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) mean += pi[i] * y[i];
  double v = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double c = y[i] - mean;
    v += pi[i] * c * c;
  }
  return v;
}

double FunctionalEvaluator::energy(std::span<const double> y) const {
  if (!kernel_->is_torus()) throw Error(ErrorCode::NotATorus, "energy needs a torus kernel");
  const auto& shape = *kernel_->torus();
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (const auto& e : kernel_->row(i)) {
      const double diff = y[i] - y[e.col];
      acc += diff * diff;
    }
  return acc / (4.0 * shape.d * static_cast<double>(y.size()));
}

double FunctionalEvaluator::two_step_energy(std::span<const double> y) const {
  const auto pi = kernel_->pi();
  double acc = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    double row = 0.0;
    for (const auto& e : two_step_.row(j)) {
      const double diff = y[j] - y[e.col];
      row += e.p * diff * diff;
    }
    acc += pi[j] * row;
  }
  return 0.5 * acc;
}

double FunctionalEvaluator::estar(std::span<const double> y) const {
  const auto pi = kernel_->pi();
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double lap = -y[i];
    for (const auto& e : kernel_->row(i)) lap += e.p * y[e.col];
    const double w = pi[i] * lap;
    acc += w * w;
  }
  return acc;
}

double FunctionalEvaluator::sum_delta_sq(std::span<const double> y) const {
  if (!kernel_->is_torus()) throw Error(ErrorCode::NotATorus, "Laplacian needs a torus kernel");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double lap = -y[i];
    for (const auto& e : kernel_->row(i)) lap += e.p * y[e.col];
    acc += lap * lap;
  }
  return acc;
}

FunctionalRecord FunctionalEvaluator::evaluate_centered(std::span<const double> y, double offset,
                                                        double t) const {
  if (y.size() != kernel_->size())
    throw Error(ErrorCode::DimensionMismatch, "profile length differs from kernel size");
  FunctionalRecord r;
  r.t = t;
  r.V = variance(y);
  r.E2 = two_step_energy(y);
  r.Estar = estar(y);
  if (kernel_->is_torus()) {
    r.E = energy(y);
    r.sum_delta_sq = sum_delta_sq(y);
  } else {
    r.E = kNaN;
    r.sum_delta_sq = kNaN;
  }
  double sum = 0.0;
  double lo = y[0];
  double hi = y[0];
  for (double v : y) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  r.Ybar = sum / static_cast<double>(y.size()) + offset;
  r.min_mass = lo + offset;
  r.max_mass = hi + offset;
  return r;
}

FunctionalRecord FunctionalEvaluator::evaluate(std::span<const double> y, double t) const {
  return evaluate_centered(y, 0.0, t);
}

FunctionalRecord eval_functionals(std::span<const double> y, const Kernel& k) {
  return FunctionalEvaluator(k).evaluate(y);
}

namespace {

void check_sample_times(std::span<const double> times, double horizon) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon))
    throw Error(ErrorCode::ConfigInvalid, "horizon must be finite and >= 0");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] >= 0.0) || times[k] > horizon)
      throw Error(ErrorCode::ConfigInvalid, "sample times must lie in [0, horizon]");
    if (k > 0 && !(times[k] > times[k - 1]))
      throw Error(ErrorCode::ConfigInvalid, "sample times must be strictly increasing");
  }
}

std::size_t event_budget(std::size_t requested, std::size_t n, double horizon) {
  if (requested != 0) return requested;
  return static_cast<std::size_t>(10.0 * static_cast<double>(n) * horizon) + 1'000'000;
}

// Energy change at `site` when its value moved by `delta`, from the edges
// touching it (ordered pairs count each edge twice).
double local_energy_change(const MassProfile& y_after, std::size_t site, double delta,
                           const Kernel& k) {
  const double old_value = y_after[site] - delta;
  double acc = 0.0;
  for (const auto& e : k.row(site)) {
    const double a = y_after[site] - y_after[e.col];
    const double b = old_value - y_after[e.col];
    acc += a * a - b * b;
  }
  const int d = k.torus()->d;
  return 2.0 * acc / (4.0 * d * static_cast<double>(y_after.size()));
}

}  // namespace

SimulationResult simulate(ProcessKind kind, const Kernel& k, const FunctionalEvaluator* evaluator,
                          MassProfile init, double horizon, std::span<const double> sample_times,
                          Clock& clock, const SampleObserver& observer,
                          const SimulationOptions& options) {
  if (init.size() != k.size())
    throw Error(ErrorCode::DimensionMismatch, "initial profile length differs from kernel size");
  check_sample_times(sample_times, horizon);
  if (options.record_functionals && evaluator == nullptr)
    throw Error(ErrorCode::ConfigInvalid, "functional recording needs an evaluator");
  const bool potlatch = kind == ProcessKind::Potlatch;
  if (potlatch)
    for (double v : init)
      if (v < -1e-12) throw Error(ErrorCode::NegativeMass, "potlatch needs nonnegative masses");
  const bool track_energy =
      options.track_energy_identity && !potlatch && k.is_torus();

  SimulationResult result;
  if (auto* stream = dynamic_cast<ClockStream*>(&clock)) {
    result.series.seed = stream->seed();
    result.series.replica_id = stream->replica_id();
  }
  result.series.kind = kind;
  result.series.records.reserve(sample_times.size());

  MassProfile y = std::move(init);
  const std::size_t n = y.size();
  const auto pi = k.pi();
  const double total_mass = potlatch ? std::accumulate(y.begin(), y.end(), 0.0) : 0.0;
  const double mass_scale = total_mass > 0.0 ? total_mass : 1.0;
  double offset = 0.0;
  const bool recenter = options.recenter && !potlatch;
  std::size_t since_recenter = 0;
  const std::size_t budget = event_budget(options.max_events, n, horizon);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto do_recenter = [&]() {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += pi[i] * y[i];
    for (double& v : y) v -= c;
    offset += c;
    since_recenter = 0;
  };

  auto apply = [&](const ClockEvent& ev) {
    if (++result.events > budget)
      throw Error(ErrorCode::HorizonExceeded, "event budget exhausted before the horizon");
    if (potlatch) {
      const double drift = potlatch_step(y, ev.site, k);
      result.max_mass_drift = std::max(result.max_mass_drift, std::abs(drift) / mass_scale);
      assert(std::abs(drift) <= 1e-12 * mass_scale);
    } else {
      const double delta = smoothing_step(y, ev.site, k);
      if (track_energy) {
        const double change = local_energy_change(y, ev.site, delta, k);
        const double err = std::abs(-change - delta * delta * inv_n);
        result.max_energy_identity_error = std::max(result.max_energy_identity_error, err);
      }
      if (recenter && ++since_recenter >= n) do_recenter();
    }
  };

  auto record = [&](std::size_t idx, double t) {
    if (options.record_functionals)
      result.series.records.push_back(evaluator->evaluate_centered(y, offset, t));
    if (observer) observer(idx, t, y, offset);
  };

  ClockEvent ev = clock.next();
  for (std::size_t s = 0; s < sample_times.size(); ++s) {
    while (ev.time <= sample_times[s]) {
      apply(ev);
      ev = clock.next();
    }
    record(s, sample_times[s]);
  }
  while (ev.time <= horizon) {
    apply(ev);
    ev = clock.next();
  }
  if (offset != 0.0)
    for (double& v : y) v += offset;
  result.final_state = std::move(y);
  return result;
}

DualResult simulate_dual_coupled(const Kernel& k, std::span<const double> x0, double horizon,
                                 std::span<const double> sample_times, Clock& clock,
                                 bool keep_final_family, std::size_t memory_cap) {
  const std::size_t n = k.size();
  if (x0.size() != n) throw Error(ErrorCode::DimensionMismatch, "x0 length differs from kernel size");
  if (n * n > memory_cap)
    throw Error(ErrorCode::MemoryCapExceeded,
                "dual coupling needs n^2 = " + std::to_string(n * n) + " values, cap is " +
                    std::to_string(memory_cap));
  check_sample_times(sample_times, horizon);
  for (double v : x0)
    if (v < -1e-12) throw Error(ErrorCode::NegativeMass, "potlatch needs nonnegative masses");

  MassProfile x(x0.begin(), x0.end());
  std::vector<double> family(n * n, 0.0);  // row i = Y^(i)
  for (std::size_t i = 0; i < n; ++i) family[i * n + i] = 1.0;

  const std::size_t budget = event_budget(0, n, horizon);
  std::size_t events = 0;
  auto apply = [&](const ClockEvent& ev) {
    if (++events > budget)
      throw Error(ErrorCode::HorizonExceeded, "event budget exhausted before the horizon");
    potlatch_step(x, ev.site, k);
    const auto row = k.row(ev.site);
    for (std::size_t i = 0; i < n; ++i) {
      double* yi = family.data() + i * n;
      double acc = 0.0;
      for (const auto& e : row) acc += e.p * yi[e.col];
      yi[ev.site] = acc;
    }
  };

  DualResult out;
  out.samples.reserve(sample_times.size());
  auto record = [&](double t) {
    DualSample s;
    s.t = t;
    s.x = x;
    s.x_tilde.assign(n, 0.0);
    s.y_max.assign(n, 0.0);
    s.y_min.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* yi = family.data() + i * n;
      double acc = 0.0;
      double lo = yi[0];
      double hi = yi[0];
      for (std::size_t j = 0; j < n; ++j) {
        acc += x0[j] * yi[j];
        lo = std::min(lo, yi[j]);
        hi = std::max(hi, yi[j]);
      }
      s.x_tilde[i] = acc;
      s.y_min[i] = lo;
      s.y_max[i] = hi;
    }
    out.samples.push_back(std::move(s));
  };

  ClockEvent ev = clock.next();
  for (double t : sample_times) {
    while (ev.time <= t) {
      apply(ev);
      ev = clock.next();
    }
    record(t);
  }
  while (ev.time <= horizon) {
    apply(ev);
    ev = clock.next();
  }
  if (keep_final_family) out.final_family = std::move(family);
  return out;
}

MartingaleFunctional::MartingaleFunctional(double u, std::span<const double> f0,
                                           const TorusShape& shape,
                                           std::span<const double> sample_times) {
  if (f0.size() != shape.sites()) throw Error(ErrorCode::DimensionMismatch, "f0 size mismatch");
  weights_.reserve(sample_times.size());
  for (double t : sample_times) {
    if (t > u + 1e-12 || t < 0.0)
      throw Error(ErrorCode::ConfigInvalid, "martingale sample times must lie in [0, u]");
    weights_.push_back(heat_evolve(f0, shape.d, shape.n, std::max(0.0, u - t)));
    double sum = 0.0;
    for (double w : weights_.back()) sum += w;
    weight_sums_.push_back(sum);
  }
}

double MartingaleFunctional::value(std::size_t sample_index, std::span<const double> y,
                                   double offset) const {
  const auto& w = weights_.at(sample_index);
  if (y.size() != w.size()) throw Error(ErrorCode::DimensionMismatch, "profile size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * y[i];
  return acc + offset * weight_sums_[sample_index];
}

std::vector<double> martingale_series(double u, std::span<const double> f0,
                                      const TorusShape& shape,
                                      std::span<const double> sample_times,
                                      const std::vector<MassProfile>& states) {
  if (states.size() != sample_times.size())
    throw Error(ErrorCode::DimensionMismatch, "one state per sample time is required");
  const MartingaleFunctional m(u, f0, shape, sample_times);
  std::vector<double> out(states.size());
  for (std::size_t s = 0; s < states.size(); ++s) out[s] = m.value(s, states[s]);
  return out;
}

}  // namespace potlatch
