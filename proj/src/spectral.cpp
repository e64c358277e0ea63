#include "potlatch/spectral.hpp"

#include <cmath>
#include <numbers>

#include "potlatch/error.hpp"

namespace potlatch {

namespace {

constexpr double kUnitEigenTol = 1e-9;

void require_odd_side(int d, int n) {
  if (d < 1) throw Error(ErrorCode::InvalidGraph, "torus dimension must be >= 1");
  if (n < 3) throw Error(ErrorCode::InvalidGraph, "torus side must be >= 3");
  if (n % 2 == 0) throw Error(ErrorCode::EvenTorusSide, "torus side must be odd");
}

std::size_t ipow(int n, int d) {
  std::size_t out = 1;
  for (int k = 0; k < d; ++k) out *= static_cast<std::size_t>(n);
  return out;
}

// Applies the n*n matrix m (row-major, out_k = sum_i m[k][i] in_i) along one
// axis of a d-dimensional array with side n.
std::vector<double> apply_along_axis(std::span<const double> in, std::span<const double> m, int n,
                                     int d, int axis) {
  const std::size_t total = ipow(n, d);
  const std::size_t stride = ipow(n, axis);
  const auto nn = static_cast<std::size_t>(n);
  std::vector<double> out(total, 0.0);
  std::vector<double> line(nn);
  for (std::size_t base = 0; base < total; ++base) {
    if ((base / stride) % nn != 0) continue;
    for (std::size_t i = 0; i < nn; ++i) line[i] = in[base + i * stride];
    for (std::size_t k = 0; k < nn; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < nn; ++i) acc += m[k * nn + i] * line[i];
      out[base + k * stride] = acc;
    }
  }
  return out;
}

std::vector<double> basis_matrix(int n, bool transpose) {
  const auto nn = static_cast<std::size_t>(n);
  std::vector<double> b(nn * nn);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      const double v = torus_basis_1d(n, k, i);
      if (transpose)
        b[static_cast<std::size_t>(i) * nn + static_cast<std::size_t>(k)] = v;
      else
        b[static_cast<std::size_t>(k) * nn + static_cast<std::size_t>(i)] = v;
    }
  return b;
}

}  // namespace

SpectralDecomposition decompose(const Kernel& k) {
  const std::size_t n = k.size();
  const auto pi = k.pi();
  std::vector<double> s(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : k.row(i)) s[i * n + e.col] = std::sqrt(pi[i] / pi[e.col]) * e.p;
  // Symmetrize away rounding so the solver sees an exactly symmetric matrix.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (s[i * n + j] + s[j * n + i]);
      s[i * n + j] = s[j * n + i] = avg;
    }
  auto eig = linalg::symmetric_eigen(s, n, true);

  SpectralDecomposition out;
  out.n = n;
  out.eigenvalues = std::move(eig.values);
  out.eigenvectors = std::move(eig.vectors);
  if (n > 1 && std::abs(out.eigenvalues[1] - 1.0) <= kUnitEigenTol)
    throw Error(ErrorCode::DisconnectedGraph, "eigenvalue 1 is not simple");
  double star = 0.0;
  for (std::size_t i = 1; i < n; ++i) star = std::max(star, std::abs(out.eigenvalues[i]));
  out.lambda_star = star;
  out.gap_abs = 1.0 - star;
  out.gap_two_step = 1.0 - star * star;
  return out;
}

double torus_mode_rate(int n, int k) {
  return 1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
}

double torus_gamma2(int d, int n) {
  require_odd_side(d, n);
  const double g = torus_mode_rate(n, 1);
  if (d <= 3) {
    const double c = std::cos(std::numbers::pi / static_cast<double>(n));
    return 1.0 - c * c;
  }
  const double dd = static_cast<double>(d);
  return 2.0 * g / dd - g * g / (dd * dd);
}

TorusSpectrum torus_gaps(int d, int n) {
  require_odd_side(d, n);
  TorusSpectrum ts;
  ts.d = d;
  ts.n = n;
  ts.gamma11 = torus_mode_rate(n, 1);
  ts.gamma1d = ts.gamma11 / d;
  ts.gamma2d = torus_gamma2(d, n);
  const TorusShape shape{d, n};
  const std::size_t total = shape.sites();
  std::vector<double> rate1(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) rate1[static_cast<std::size_t>(k)] = torus_mode_rate(n, k);
  ts.lambda_hat.resize(total);
  for (std::size_t x = 0; x < total; ++x) {
    std::size_t rest = x;
    double acc = 0.0;
    for (int a = 0; a < d; ++a) {
      acc += rate1[rest % static_cast<std::size_t>(n)];
      rest /= static_cast<std::size_t>(n);
    }
    ts.lambda_hat[x] = acc / d;
  }
  return ts;
}

NumericGap numeric_two_step_gap(const Kernel& k) {
  const Kernel k2 = two_step_kernel(k);
  const std::size_t n = k2.size();
  const auto pi = k2.pi();
  linalg::SparseSymmetric s;
  s.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.rows[i].reserve(k2.row(i).size());
    for (const auto& e : k2.row(i)) {
      // pi_i p_ij = pi_j p_ji, so the symmetric entry is p_ij sqrt(pi_i / pi_j);
      // average both triangles to remove rounding asymmetry.
      const double a = e.p * std::sqrt(pi[i] / pi[e.col]);
      const double b = k2.p(e.col, i) * std::sqrt(pi[e.col] / pi[i]);
      s.rows[i].push_back({e.col, 0.5 * (a + b)});
    }
  }
  std::vector<double> top(n);
  for (std::size_t i = 0; i < n; ++i) top[i] = std::sqrt(pi[i]);
  const auto second = linalg::second_largest_eigenvalue(s, top);
  return {1.0 - second.value, second.route};
}

std::vector<double> heat_kernel_1d(int n, double s) {
  const auto nn = static_cast<std::size_t>(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  if (s == 0.0) {
    std::vector<double> delta(nn, 0.0);
    delta[0] = 1.0;
    return delta;
  }
  std::vector<double> p(nn, inv_n);
  const int half = (n - 1) / 2;
  for (int j = 1; j <= half; ++j) {
    const double w = 2.0 * inv_n * std::exp(-torus_mode_rate(n, j) * s);
    if (w == 0.0) break;
    for (int i = 0; i < n; ++i) {
      const long long phase = (static_cast<long long>(j) * i) % n;
      p[static_cast<std::size_t>(i)] +=
          w * std::cos(2.0 * std::numbers::pi * static_cast<double>(phase) * inv_n);
    }
  }
  return p;
}

std::vector<double> heat_kernel(int d, int n, double t) {
  require_odd_side(d, n);
  const auto p1 = heat_kernel_1d(n, t / d);
  const TorusShape shape{d, n};
  const std::size_t total = shape.sites();
  std::vector<double> out(total);
  for (std::size_t x = 0; x < total; ++x) {
    std::size_t rest = x;
    double acc = 1.0;
    for (int a = 0; a < d; ++a) {
      acc *= p1[rest % static_cast<std::size_t>(n)];
      rest /= static_cast<std::size_t>(n);
    }
    out[x] = acc;
  }
  return out;
}

std::vector<double> heat_evolve(std::span<const double> f, int d, int n, double t) {
  require_odd_side(d, n);
  if (f.size() != ipow(n, d)) throw Error(ErrorCode::DimensionMismatch, "profile size mismatch");
  if (t == 0.0) return {f.begin(), f.end()};
  const auto p1 = heat_kernel_1d(n, t / d);
  const auto nn = static_cast<std::size_t>(n);
  std::vector<double> conv(nn * nn);
  for (std::size_t k = 0; k < nn; ++k)
    for (std::size_t i = 0; i < nn; ++i) conv[k * nn + i] = p1[(k + nn - i) % nn];
  std::vector<double> cur(f.begin(), f.end());
  for (int axis = 0; axis < d; ++axis) cur = apply_along_axis(cur, conv, n, d, axis);
  return cur;
}

std::vector<double> laplacian_of(std::span<const double> f, int d, int n) {
  require_odd_side(d, n);
  const TorusShape shape{d, n};
  const std::size_t total = shape.sites();
  if (f.size() != total) throw Error(ErrorCode::DimensionMismatch, "profile size mismatch");
  std::vector<double> out(total);
  const double w = 1.0 / (2.0 * d);
  for (std::size_t i = 0; i < total; ++i) {
    double acc = 0.0;
    for (int a = 0; a < d; ++a) acc += f[shape.shift(i, a, 1)] + f[shape.shift(i, a, -1)];
    out[i] = w * acc - f[i];
  }
  return out;
}

double torus_basis_1d(int n, int k, int i) {
  const double nn = static_cast<double>(n);
  if (k == 0) return 1.0 / std::sqrt(nn);
  const int half = (n - 1) / 2;
  const int freq = k <= half ? k : n - k;
  const long long phase = (static_cast<long long>(freq) * i) % n;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(phase) / nn;
  return std::sqrt(2.0 / nn) * (k <= half ? std::cos(angle) : std::sin(angle));
}

std::vector<double> spectral_coords(std::span<const double> profile, const TorusShape& shape) {
  const std::size_t total = shape.sites();
  if (profile.size() != total) throw Error(ErrorCode::DimensionMismatch, "profile size mismatch");
  const auto b = basis_matrix(shape.n, false);
  std::vector<double> cur(profile.begin(), profile.end());
  for (int axis = 0; axis < shape.d; ++axis) cur = apply_along_axis(cur, b, shape.n, shape.d, axis);
  const double scale = 1.0 / std::sqrt(static_cast<double>(total));
  for (double& v : cur) v *= scale;
  return cur;
}

std::vector<double> from_spectral_coords(std::span<const double> coords, const TorusShape& shape) {
  const std::size_t total = shape.sites();
  if (coords.size() != total) throw Error(ErrorCode::DimensionMismatch, "coefficient size mismatch");
  const auto bt = basis_matrix(shape.n, true);
  std::vector<double> cur(coords.begin(), coords.end());
  for (int axis = 0; axis < shape.d; ++axis) cur = apply_along_axis(cur, bt, shape.n, shape.d, axis);
  const double scale = std::sqrt(static_cast<double>(total));
  for (double& v : cur) v *= scale;
  return cur;
}

std::vector<double> spectral_coords(std::span<const double> profile,
                                    const SpectralDecomposition& sd) {
  if (profile.size() != sd.n) throw Error(ErrorCode::DimensionMismatch, "profile size mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(sd.n));
  std::vector<double> out(sd.n, 0.0);
  for (std::size_t k = 0; k < sd.n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < sd.n; ++i) acc += sd.psi(k, i) * profile[i];
    out[k] = scale * acc;
  }
  return out;
}

}  // namespace potlatch
