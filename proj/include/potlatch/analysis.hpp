#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "potlatch/engine.hpp"
#include "potlatch/kernel.hpp"

namespace potlatch {

/// Streaming mean/variance; merge() is Chan's pairwise update, so a fixed
/// merge order gives reproducible results.
struct Welford {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const Welford& other);
  double variance() const;  // unbiased; 0 when count < 2
  double standard_error() const;
};

struct McEstimate {
  std::vector<double> sample_times;
  std::vector<double> mean;
  std::vector<double> standard_error;
  std::size_t replica_count = 0;
};

McEstimate to_estimate(std::span<const double> times, std::span<const Welford> acc);

struct ExponentialTail {
  double rate = 0.0;
  double coefficient = 0.0;  // tail(t) = coefficient * exp(-rate t)
};

/// Samples f(t0 + i h), i = 0..values.size()-1.
struct GridFunction {
  double t0 = 0.0;
  double h = 0.0;
  std::vector<double> values;
  std::optional<ExponentialTail> tail_model;

  double time(std::size_t i) const { return t0 + h * static_cast<double>(i); }
  double end_time() const { return time(values.size() - 1); }
  /// Linear interpolation on the grid; tail model (or last value) beyond it.
  double at(double t) const;
  /// Composite trapezoid over the grid plus the analytic tail, if any.
  double integral() const;
  /// integral over [t, infinity) using the same rule.
  double integral_from(double t) const;
};

/// G(t) = n^{-d} sum_x lambda_hat_x^2 exp(-2 lambda_hat_x t), by 1-d factor sums.
double G_value(int d, int n, double t);
/// Decay rate 2 gamma^(1)_1 / d of G.
double G_tail_rate(int d, int n);
/// Horizon where G has decayed to 1e-9 of its initial value relative to its
/// tail integral.
double G_default_horizon(int d, int n);

inline constexpr double kDefaultGridStep = 5e-4;

/// Tabulates G on [0, horizon] (horizon <= 0 picks G_default_horizon).
/// Throws GridTooCoarse when h > min(0.05, 1 / (4 max lambda_hat)).
GridFunction compute_G(int d, int n, double h = kDefaultGridStep, double horizon = 0.0);
double integral_check_G(const GridFunction& g);

/// Solves H = G + G*H by product-trapezoid forward substitution on g's grid.
/// Throws UnstableStep when 1 - h G(0)/2 <= 0 or the residual check fails.
GridFunction renewal_H(const GridFunction& g);
/// max |H - G - G*H| / max H over a subset of grid points (same quadrature).
double renewal_residual(const GridFunction& g, const GridFunction& H);

/// V0 exp(-gamma2 t).
double global_envelope_value(double V0, double gamma2, double t);
/// Envelope on [0, horizon] with gamma2 from the numeric two-step gap.
GridFunction envelope_global(const Kernel& k, double V0, double h, double horizon);

enum class EnvelopeKind { Energy, Variance, Average };

struct EnvelopeParams {
  double rate = 0.0;
  double poly_exponent = 0.0;
  double crossover = 0.0;  // value of the saturating power term
  double amplitude = 1.0;
};

/// Shape parameters (rate 2 gamma^(1)_1 / d, exponent, n^c crossover), amplitude 1.
EnvelopeParams default_envelope_params(int d, int n, EnvelopeKind which);
/// amplitude * n^{-d} / (max(t,1)^p ^ crossover) * exp(-rate t). For the
/// average kind the n^{-d} factor is omitted (amplitude carries the
/// initial-data scale, see median_l1_scale).
double envelope_torus_value(int d, int n, EnvelopeKind which, const EnvelopeParams& params, double t);
GridFunction envelope_torus(int d, int n, EnvelopeKind which, const EnvelopeParams& params,
                            double h, double horizon);
/// (N^{-1} sum_i |y_i - y*|)^2 with y* a median of y.
double median_l1_scale(std::span<const double> y);

struct RateFit {
  double exp_rate = 0.0;        // decay rate: mean ~ t^p exp(-rate t)
  double poly_exponent = 0.0;   // p
  double log_amplitude = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Weighted least squares of log(mean) on (t, log t) over the window, weights
/// (mean / stderr)^2. With fixed_rate, only (log amplitude, p) are fitted.
/// Throws NonPositiveMean, ConfigInvalid (< 5 points).
RateFit rate_fit(const McEstimate& est, double t_a, double t_b,
                 std::optional<double> fixed_rate = std::nullopt);

/// Quantile-coupled L2 distance between two empirical laws. Throws EmptySample.
double w2_empirical_1d(std::span<const double> a, std::span<const double> b);

/// sqrt(2 pi^max / pi_min * n * E[(sum X(0))^2]) exp(-gamma2 t / 2).
double w2_closed_form_bound(const Kernel& k, double gamma2, double mass_second_moment, double t);

/// Per-replica aggregates of dual-coupled runs for the coupling estimator.
/// The last sample time of every added run must be t_inf.
struct CouplingSummary {
  std::vector<double> sample_times;
  double t_inf = 0.0;
  std::vector<Welford> squared_gap;  // sum_i (Xt_i(t) - Xt_i(t_inf))^2
  Welford pathwise_bias_sq;          // sum_i (sum x0)^2 (M^(i) - m^(i))^2 at t_inf
  Welford mass_sq;                   // (sum x0)^2

  CouplingSummary() = default;
  CouplingSummary(std::vector<double> times, double t_inf);
  void add(const DualResult& run, std::span<const double> x0);
  void merge(const CouplingSummary& other);
};

struct CouplingBound {
  double statistic = 0.0;
  double standard_error = 0.0;
  double bias_bound = 0.0;
  double closed_form = 0.0;
};

/// Coupling upper-bound estimator of d_W^(2) at sample_times[index].
/// Throws HorizonTooShort when the truncation bias exceeds 10% of the
/// statistic at a time before t_inf.
CouplingBound coupling_w2_bound(const CouplingSummary& s, std::size_t index, const Kernel& k,
                                double gamma2);

struct CorollaryResult {
  double integral = 0.0;
  double propagated_se = 0.0;
  double quadrature_error = 0.0;
  double tail_bound = 0.0;
  double V0 = 0.0;
  bool pass() const;
};

/// Trapezoid of the E(E2 + E*) means plus a certified tail E V(T) <=
/// V0 exp(-gamma2 T). Throws TailTooFat when that tail is >= 1% of V0.
CorollaryResult local_corollary_check(std::span<const double> times, std::span<const double> means,
                                      std::span<const double> standard_errors, double V0,
                                      double gamma2);

/// Two-sided z threshold matching a 3-sigma family-wise level over m tests.
double bonferroni_z(std::size_t m, double base_z = 3.0);

}  // namespace potlatch
