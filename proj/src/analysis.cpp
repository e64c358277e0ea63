#include "potlatch/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "potlatch/error.hpp"
#include "potlatch/spectral.hpp"

namespace potlatch {

void Welford::add(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

void Welford::merge(const Welford& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double total = na + nb;
  const double delta = other.mean - mean;
  mean += delta * nb / total;
  m2 += other.m2 + delta * delta * na * nb / total;
  count += other.count;
}

double Welford::variance() const {
  return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1);
}

double Welford::standard_error() const {
  return count < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(count));
}

McEstimate to_estimate(std::span<const double> times, std::span<const Welford> acc) {
  if (times.size() != acc.size())
    throw Error(ErrorCode::DimensionMismatch, "one accumulator per sample time is required");
  McEstimate est;
  est.sample_times.assign(times.begin(), times.end());
  est.mean.resize(acc.size());
  est.standard_error.resize(acc.size());
  est.replica_count = acc.empty() ? 0 : acc.front().count;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    est.mean[i] = acc[i].mean;
    est.standard_error[i] = acc[i].standard_error();
  }
  return est;
}

double GridFunction::at(double t) const {
  if (values.empty()) throw Error(ErrorCode::EmptySample, "empty grid function");
  if (t <= t0) return values.front();
  const double end = end_time();
  if (t >= end) {
    if (tail_model) return tail_model->coefficient * std::exp(-tail_model->rate * t);
    return values.back();
  }
  const double pos = (t - t0) / h;
  const auto i = std::min(static_cast<std::size_t>(pos), values.size() - 2);
  const double frac = pos - static_cast<double>(i);
  return values[i] * (1.0 - frac) + values[i + 1] * frac;
}

double GridFunction::integral_from(double t) const {
  if (values.empty()) throw Error(ErrorCode::EmptySample, "empty grid function");
  const double end = end_time();
  double acc = 0.0;
  if (t < end) {
    const double start = std::max(t, t0);
    const double pos = (start - t0) / h;
    auto i = static_cast<std::size_t>(pos);
    if (i >= values.size() - 1) i = values.size() - 2;
    const double next_t = time(i + 1);
    acc += 0.5 * (at(start) + values[i + 1]) * (next_t - start);
    for (std::size_t j = i + 1; j + 1 < values.size(); ++j)
      acc += 0.5 * h * (values[j] + values[j + 1]);
  }
  if (tail_model) {
    const double from = std::max(t, end);
    acc += tail_model->coefficient * std::exp(-tail_model->rate * from) / tail_model->rate;
  }
  return acc;
}

double GridFunction::integral() const { return integral_from(t0); }

namespace {

// S_m = sum_k a_k^m exp(-2 a_k t / d), m = 0, 1, 2.
std::array<double, 3> factor_sums(int d, int n, double t) {
  std::array<double, 3> s{0.0, 0.0, 0.0};
  for (int k = 0; k < n; ++k) {
    const double a = torus_mode_rate(n, k);
    const double w = std::exp(-2.0 * a * t / d);
    s[0] += w;
    s[1] += a * w;
    s[2] += a * a * w;
  }
  return s;
}

}  // namespace

double G_value(int d, int n, double t) {
  const auto s = factor_sums(d, n, t);
  const double dd = static_cast<double>(d);
  double term = dd * s[2] * std::pow(s[0], d - 1);
  if (d >= 2) term += dd * (dd - 1.0) * s[1] * s[1] * std::pow(s[0], d - 2);
  return term / (std::pow(static_cast<double>(n), d) * dd * dd);
}

double G_tail_rate(int d, int n) { return 2.0 * torus_mode_rate(n, 1) / d; }

double G_default_horizon(int d, int n) {
  const double r = G_tail_rate(d, n);
  return std::log(G_value(d, n, 0.0) / (r * 1e-9)) / r;
}

GridFunction compute_G(int d, int n, double h, double horizon) {
  torus_gaps(1, n);  // validates n
  if (d < 1) throw Error(ErrorCode::InvalidGraph, "dimension must be >= 1");
  const double max_rate = 1.0 + std::cos(std::numbers::pi / n);
  const double limit = std::min(0.05, 1.0 / (4.0 * max_rate));
  if (!(h > 0.0) || h > limit)
    throw Error(ErrorCode::GridTooCoarse,
                "step " + std::to_string(h) + " exceeds " + std::to_string(limit));
  if (horizon <= 0.0) horizon = G_default_horizon(d, n);
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / h));
  GridFunction g;
  g.t0 = 0.0;
  g.h = h;
  g.values.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) g.values[i] = G_value(d, n, g.time(i));
  const double rate = G_tail_rate(d, n);
  g.tail_model = ExponentialTail{rate, g.values.back() * std::exp(rate * g.end_time())};
  return g;
}

double integral_check_G(const GridFunction& g) { return g.integral(); }

double renewal_residual(const GridFunction& g, const GridFunction& H) {
  const std::size_t m_total = g.values.size();
  const double h = g.h;
  double max_h = 0.0;
  for (double v : H.values) max_h = std::max(max_h, std::abs(v));
  const std::size_t stride = std::max<std::size_t>(1, m_total / 64);
  double worst = 0.0;
  for (std::size_t m = 0; m < m_total; m += stride) {
    double conv = 0.0;
    if (m > 0) {
      conv = 0.5 * (g.values[m] * H.values[0] + g.values[0] * H.values[m]);
      for (std::size_t k = 1; k < m; ++k) conv += g.values[m - k] * H.values[k];
      conv *= h;
    }
    worst = std::max(worst, std::abs(H.values[m] - g.values[m] - conv));
  }
  return max_h > 0.0 ? worst / max_h : worst;
}

GridFunction renewal_H(const GridFunction& g) {
  const std::size_t m_total = g.values.size();
  if (m_total < 2) throw Error(ErrorCode::GridTooCoarse, "grid needs at least two points");
  const double h = g.h;
  const double denom = 1.0 - 0.5 * h * g.values[0];
  if (!(denom > 0.0)) throw Error(ErrorCode::UnstableStep, "1 - h G(0) / 2 must be positive");
  GridFunction H;
  H.t0 = g.t0;
  H.h = h;
  H.values.resize(m_total);
  H.values[0] = g.values[0];
  for (std::size_t m = 1; m < m_total; ++m) {
    double conv = 0.5 * g.values[m] * H.values[0];
    for (std::size_t k = 1; k < m; ++k) conv += g.values[m - k] * H.values[k];
    const double v = (g.values[m] + h * conv) / denom;
    if (!std::isfinite(v)) throw Error(ErrorCode::UnstableStep, "non-finite renewal value");
    H.values[m] = v;
  }
  const double residual = renewal_residual(g, H);
  if (residual > 1e-8)
    throw Error(ErrorCode::UnstableStep, "renewal residual " + std::to_string(residual));
  // Tail from the log-slope over the last tenth of the grid.
  const std::size_t back = std::max<std::size_t>(1, m_total / 10);
  const double a = H.values[m_total - 1 - back];
  const double b = H.values[m_total - 1];
  if (a > 0.0 && b > 0.0 && a > b) {
    const double rate = std::log(a / b) / (h * static_cast<double>(back));
    H.tail_model = ExponentialTail{rate, b * std::exp(rate * H.end_time())};
  }
  return H;
}

double global_envelope_value(double V0, double gamma2, double t) {
  return V0 * std::exp(-gamma2 * t);
}

GridFunction envelope_global(const Kernel& k, double V0, double h, double horizon) {
  if (!(h > 0.0)) throw Error(ErrorCode::GridTooCoarse, "step must be positive");
  const double gamma2 = numeric_two_step_gap(k).gap_two_step;
  GridFunction g;
  g.h = h;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / h));
  g.values.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) g.values[i] = global_envelope_value(V0, gamma2, g.time(i));
  g.tail_model = ExponentialTail{gamma2, V0};
  return g;
}

EnvelopeParams default_envelope_params(int d, int n, EnvelopeKind which) {
  EnvelopeParams p;
  p.rate = 2.0 * torus_mode_rate(n, 1) / d;
  const double dd = static_cast<double>(d);
  const double nn = static_cast<double>(n);
  if (which == EnvelopeKind::Variance) {
    p.poly_exponent = dd / 2.0;
    p.crossover = std::pow(nn, dd);
  } else {
    p.poly_exponent = dd / 2.0 + 1.0;
    p.crossover = std::pow(nn, dd + 2.0);
  }
  return p;
}

double envelope_torus_value(int d, int n, EnvelopeKind which, const EnvelopeParams& params,
                            double t) {
  const double power = std::min(std::pow(std::max(t, 1.0), params.poly_exponent), params.crossover);
  double scale = params.amplitude / power * std::exp(-params.rate * t);
  if (which != EnvelopeKind::Average) scale /= std::pow(static_cast<double>(n), d);
  return scale;
}

GridFunction envelope_torus(int d, int n, EnvelopeKind which, const EnvelopeParams& params,
                            double h, double horizon) {
  if (!(h > 0.0)) throw Error(ErrorCode::GridTooCoarse, "step must be positive");
  GridFunction g;
  g.h = h;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / h));
  g.values.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i)
    g.values[i] = envelope_torus_value(d, n, which, params, g.time(i));
  return g;
}

double median_l1_scale(std::span<const double> y) {
  if (y.empty()) throw Error(ErrorCode::EmptySample, "empty profile");
  std::vector<double> sorted(y.begin(), y.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2),
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  double acc = 0.0;
  for (double v : y) acc += std::abs(v - median);
  acc /= static_cast<double>(y.size());
  return acc * acc;
}

namespace {

// Solves the k x k system a x = b (row-major) by Gaussian elimination with
// partial pivoting.
std::vector<double> solve_small(std::vector<double> a, std::vector<double> b) {
  const std::size_t k = b.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::abs(a[r * k + c]) > std::abs(a[piv * k + c])) piv = r;
    if (a[piv * k + c] == 0.0) throw Error(ErrorCode::ConfigInvalid, "degenerate fit window");
    if (piv != c) {
      for (std::size_t j = 0; j < k; ++j) std::swap(a[c * k + j], a[piv * k + j]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < k; ++r) {
      const double f = a[r * k + c] / a[c * k + c];
      for (std::size_t j = c; j < k; ++j) a[r * k + j] -= f * a[c * k + j];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(k);
  for (std::size_t c = k; c-- > 0;) {
    double acc = b[c];
    for (std::size_t j = c + 1; j < k; ++j) acc -= a[c * k + j] * x[j];
    x[c] = acc / a[c * k + c];
  }
  return x;
}

}  // namespace

RateFit rate_fit(const McEstimate& est, double t_a, double t_b, std::optional<double> fixed_rate) {
  std::vector<double> ts;
  std::vector<double> ys;
  std::vector<double> ws;
  bool have_all_se = true;
  for (std::size_t i = 0; i < est.sample_times.size(); ++i) {
    const double t = est.sample_times[i];
    if (t < t_a || t > t_b) continue;
    const double m = est.mean[i];
    if (!(m > 0.0)) throw Error(ErrorCode::NonPositiveMean, "mean must be positive at t = " +
                                                                std::to_string(t));
    ts.push_back(t);
    ys.push_back(std::log(m));
    const double se = i < est.standard_error.size() ? est.standard_error[i] : 0.0;
    if (!(se > 0.0)) have_all_se = false;
    ws.push_back(se > 0.0 ? (m / se) * (m / se) : 1.0);
  }
  if (ts.size() < 5) throw Error(ErrorCode::ConfigInvalid, "rate fit needs >= 5 points in window");
  if (!have_all_se) std::fill(ws.begin(), ws.end(), 1.0);
  if (ts.front() <= 0.0) throw Error(ErrorCode::ConfigInvalid, "rate fit window must have t > 0");

  // Columns: 1, log t, -t (the last dropped under a fixed rate).
  const std::size_t k = fixed_rate ? 2 : 3;
  std::vector<double> ata(k * k, 0.0);
  std::vector<double> atb(k, 0.0);
  std::vector<double> target(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double cols[3] = {1.0, std::log(ts[i]), -ts[i]};
    target[i] = fixed_rate ? ys[i] + *fixed_rate * ts[i] : ys[i];
    for (std::size_t r = 0; r < k; ++r) {
      atb[r] += ws[i] * cols[r] * target[i];
      for (std::size_t c = 0; c < k; ++c) ata[r * k + c] += ws[i] * cols[r] * cols[c];
    }
  }
  const auto coef = solve_small(ata, atb);
  RateFit fit;
  fit.log_amplitude = coef[0];
  fit.poly_exponent = coef[1];
  fit.exp_rate = fixed_rate ? *fixed_rate : coef[2];
  fit.points = ts.size();

  double wsum = 0.0;
  double ymean = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    wsum += ws[i];
    ymean += ws[i] * ys[i];
  }
  ymean /= wsum;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double pred = fit.log_amplitude + fit.poly_exponent * std::log(ts[i]) - fit.exp_rate * ts[i];
    ss_res += ws[i] * (ys[i] - pred) * (ys[i] - pred);
    ss_tot += ws[i] * (ys[i] - ymean) * (ys[i] - ymean);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

namespace {

double empirical_quantile(const std::vector<double>& sorted, double u) {
  const double pos = u * static_cast<double>(sorted.size()) - 0.5;
  if (pos <= 0.0) return sorted.front();
  const double last = static_cast<double>(sorted.size() - 1);
  if (pos >= last) return sorted.back();
  const auto i = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(i);
  return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
}

}  // namespace

double w2_empirical_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "both samples must be nonempty");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const std::size_t m = std::max(sa.size(), sb.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(m);
    const double diff = empirical_quantile(sa, u) - empirical_quantile(sb, u);
    acc += diff * diff;
  }
  return std::sqrt(acc / static_cast<double>(m));
}

double w2_closed_form_bound(const Kernel& k, double gamma2, double mass_second_moment, double t) {
  const double ratio = k.pi_max() / k.pi_min();
  return std::sqrt(2.0 * ratio * static_cast<double>(k.size()) * mass_second_moment) *
         std::exp(-0.5 * gamma2 * t);
}

CouplingSummary::CouplingSummary(std::vector<double> times, double t_inf_)
    : sample_times(std::move(times)), t_inf(t_inf_), squared_gap(sample_times.size()) {
  if (sample_times.empty() || sample_times.back() != t_inf)
    throw Error(ErrorCode::ConfigInvalid, "the last coupling sample time must equal t_inf");
}

void CouplingSummary::add(const DualResult& run, std::span<const double> x0) {
  if (run.samples.size() != sample_times.size())
    throw Error(ErrorCode::DimensionMismatch, "run sample count differs from summary");
  const auto& limit = run.samples.back();
  double mass = 0.0;
  for (double v : x0) mass += v;
  for (std::size_t s = 0; s < run.samples.size(); ++s) {
    double acc = 0.0;
    const auto& xt = run.samples[s].x_tilde;
    for (std::size_t i = 0; i < xt.size(); ++i) {
      const double diff = xt[i] - limit.x_tilde[i];
      acc += diff * diff;
    }
    squared_gap[s].add(acc);
  }
  double bias = 0.0;
  for (std::size_t i = 0; i < limit.y_max.size(); ++i) {
    const double spread = mass * (limit.y_max[i] - limit.y_min[i]);
    bias += spread * spread;
  }
  pathwise_bias_sq.add(bias);
  mass_sq.add(mass * mass);
}

void CouplingSummary::merge(const CouplingSummary& other) {
  if (other.squared_gap.size() != squared_gap.size())
    throw Error(ErrorCode::DimensionMismatch, "cannot merge summaries of different grids");
  for (std::size_t s = 0; s < squared_gap.size(); ++s) squared_gap[s].merge(other.squared_gap[s]);
  pathwise_bias_sq.merge(other.pathwise_bias_sq);
  mass_sq.merge(other.mass_sq);
}

CouplingBound coupling_w2_bound(const CouplingSummary& s, std::size_t index, const Kernel& k,
                                double gamma2) {
  const double t = s.sample_times.at(index);
  CouplingBound out;
  out.closed_form = w2_closed_form_bound(k, gamma2, s.mass_sq.mean, t);
  if (t >= s.t_inf) return out;
  const auto& acc = s.squared_gap[index];
  out.statistic = std::sqrt(std::max(0.0, acc.mean));
  out.standard_error = out.statistic > 0.0 ? acc.standard_error() / (2.0 * out.statistic) : 0.0;
  const double envelope_bias = w2_closed_form_bound(k, gamma2, s.mass_sq.mean, s.t_inf);
  const double pathwise_bias = std::sqrt(std::max(0.0, s.pathwise_bias_sq.mean));
  out.bias_bound = std::min(envelope_bias, pathwise_bias);
  if (out.bias_bound > 0.1 * out.statistic)
    throw Error(ErrorCode::HorizonTooShort,
                "truncation bias " + std::to_string(out.bias_bound) + " exceeds 10% of statistic " +
                    std::to_string(out.statistic) + " at t = " + std::to_string(t));
  return out;
}

bool CorollaryResult::pass() const {
  return std::abs(integral - V0) <= 3.0 * propagated_se + tail_bound + quadrature_error + 1e-15;
}

CorollaryResult local_corollary_check(std::span<const double> times, std::span<const double> means,
                                      std::span<const double> standard_errors, double V0,
                                      double gamma2) {
  if (times.size() != means.size() || times.size() != standard_errors.size())
    throw Error(ErrorCode::DimensionMismatch, "times, means and errors must align");
  if (times.size() < 3) throw Error(ErrorCode::EmptySample, "need at least three sample times");
  CorollaryResult r;
  r.V0 = V0;
  const double T = times.back();
  r.tail_bound = V0 * std::exp(-gamma2 * T);
  if (V0 > 0.0 && r.tail_bound >= 0.01 * V0)
    throw Error(ErrorCode::TailTooFat, "certified tail is >= 1% of V0; extend the horizon");
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double w = 0.5 * (times[i + 1] - times[i]);
    r.integral += w * (means[i] + means[i + 1]);
    r.propagated_se += w * (standard_errors[i] + standard_errors[i + 1]);
  }
  double coarse = 0.0;
  std::size_t prev = 0;
  for (std::size_t i = 2;; i += 2) {
    const std::size_t j = std::min(i, times.size() - 1);
    coarse += 0.5 * (times[j] - times[prev]) * (means[prev] + means[j]);
    prev = j;
    if (j == times.size() - 1) break;
  }
  r.quadrature_error = std::abs(r.integral - coarse) / 3.0;
  return r;
}

double bonferroni_z(std::size_t m, double base_z) {
  if (m == 0) m = 1;
  const double alpha = std::erfc(base_z / std::numbers::sqrt2);
  const double target = alpha / static_cast<double>(m);
  double lo = 0.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::numbers::sqrt2) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace potlatch
