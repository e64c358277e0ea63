#include "potlatch/linalg.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

#include "potlatch/error.hpp"

namespace potlatch::linalg {

namespace {

// Householder reduction of the symmetric matrix `a` (row-major, overwritten)
// to tridiagonal form. On return d holds the diagonal, e[1..n-1] the
// sub-diagonal (e[0] = 0) and, if want_vectors, `a` holds the orthogonal
// transform.
void householder_tridiagonalize(std::vector<double>& a, std::size_t n, std::vector<double>& d,
                                std::vector<double>& e, bool want_vectors) {
  auto A = [&a, n](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scale = 0.0;
      for (std::size_t k = 0; k <= l; ++k) scale += std::abs(A(i, k));
      if (scale == 0.0) {
        e[i] = A(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          A(i, k) /= scale;
          h += A(i, k) * A(i, k);
        }
        double f = A(i, l);
        double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        A(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          if (want_vectors) A(j, i) = A(i, j) / h;
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += A(j, k) * A(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += A(k, j) * A(i, k);
          e[j] = g / h;
          f += e[j] * A(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = A(i, j);
          g = e[j] - hh * f;
          e[j] = g;
          for (std::size_t k = 0; k <= j; ++k) A(j, k) -= (f * e[k] + g * A(i, k));
        }
      }
    } else {
      e[i] = A(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (want_vectors) {
      if (d[i] != 0.0) {
        for (std::size_t j = 0; j < i; ++j) {
          double g = 0.0;
          for (std::size_t k = 0; k < i; ++k) g += A(i, k) * A(k, j);
          for (std::size_t k = 0; k < i; ++k) A(k, j) -= g * A(k, i);
        }
      }
      d[i] = A(i, i);
      A(i, i) = 1.0;
      for (std::size_t j = 0; j < i; ++j) A(j, i) = A(i, j) = 0.0;
    } else {
      d[i] = A(i, i);
    }
  }
}

// Implicit QL on a symmetric tridiagonal matrix. e[k] couples k and k+1 after
// the initial shift. z (row-major n*n) accumulates rotations when non-null.
void implicit_ql(std::vector<double>& d, std::vector<double>& e, std::size_t n, double* z,
                 int max_sweeps) {
  if (n == 0) return;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m = l;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= DBL_EPSILON * dd) break;
      }
      if (m != l) {
        if (iter++ == max_sweeps)
          throw Error(ErrorCode::EigenSolverFailure, "QL iteration did not converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0;
        double c = 1.0;
        double p = 0.0;
        bool early = false;
        std::size_t i = m;
        while (i-- > l) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            early = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          if (z != nullptr) {
            for (std::size_t k = 0; k < n; ++k) {
              f = z[k * n + i + 1];
              z[k * n + i + 1] = s * z[k * n + i] + c * f;
              z[k * n + i] = c * z[k * n + i] - s * f;
            }
          }
        }
        if (early) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace

SymmetricEigen symmetric_eigen(std::span<const double> a, std::size_t n, bool want_vectors,
                               int max_sweeps) {
  if (a.size() != n * n) throw Error(ErrorCode::DimensionMismatch, "matrix must be n x n");
  SymmetricEigen out;
  out.n = n;
  if (n == 0) return out;
  std::vector<double> work(a.begin(), a.end());
  std::vector<double> d;
  std::vector<double> e;
  householder_tridiagonalize(work, n, d, e, want_vectors);
  implicit_ql(d, e, n, want_vectors ? work.data() : nullptr, max_sweeps);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&d](std::size_t x, std::size_t y) { return d[x] > d[y]; });
  out.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.values[k] = d[order[k]];
  if (want_vectors) {
    out.vectors.resize(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) out.vectors[i * n + k] = work[i * n + order[k]];
  }
  return out;
}

std::vector<double> tridiagonal_eigenvalues(std::vector<double> diag, std::vector<double> off,
                                            int max_sweeps) {
  const std::size_t n = diag.size();
  std::vector<double> e(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) e[i] = off[i - 1];
  implicit_ql(diag, e, n, nullptr, max_sweeps);
  std::sort(diag.begin(), diag.end(), std::greater<>());
  return diag;
}

void SparseSymmetric::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double acc = 0.0;
    for (const auto& e : rows[i]) acc += e.value * x[e.col];
    y[i] = acc;
  }
}

std::vector<double> SparseSymmetric::to_dense() const {
  const std::size_t n = rows.size();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : rows[i]) out[i * n + e.col] += e.value;
  return out;
}

std::vector<std::size_t> reverse_cuthill_mckee(const SparseSymmetric& a) {
  const std::size_t n = a.size();
  std::vector<std::size_t> degree(n);
  for (std::size_t i = 0; i < n; ++i) degree[i] = a.rows[i].size();
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<std::size_t> by_degree(n);
  std::iota(by_degree.begin(), by_degree.end(), 0);
  std::stable_sort(by_degree.begin(), by_degree.end(),
                   [&](std::size_t x, std::size_t y) { return degree[x] < degree[y]; });
  std::vector<std::size_t> nbrs;
  for (std::size_t start : by_degree) {
    if (seen[start]) continue;
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      order.push_back(u);
      nbrs.clear();
      for (const auto& e : a.rows[u])
        if (!seen[e.col]) {
          seen[e.col] = 1;
          nbrs.push_back(e.col);
        }
      std::stable_sort(nbrs.begin(), nbrs.end(),
                       [&](std::size_t x, std::size_t y) { return degree[x] < degree[y]; });
      for (std::size_t v : nbrs) queue.push_back(v);
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

std::size_t bandwidth(const SparseSymmetric& a, std::span<const std::size_t> order) {
  const std::size_t n = a.size();
  std::vector<std::size_t> position(n);
  for (std::size_t k = 0; k < n; ++k) position[order[k]] = k;
  std::size_t band = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : a.rows[i]) {
      const std::size_t pi = position[i];
      const std::size_t pj = position[e.col];
      band = std::max(band, pi > pj ? pi - pj : pj - pi);
    }
  return band;
}

std::size_t count_eigenvalues_above(const SparseSymmetric& a, std::span<const std::size_t> order,
                                    std::size_t band, double shift) {
  const std::size_t n = a.size();
  const std::size_t w = band + 1;
  std::vector<std::size_t> position(n);
  for (std::size_t k = 0; k < n; ++k) position[order[k]] = k;

  // m[i*w + (j - i + band)] holds M_ij for i - band <= j <= i, M = shift I - A.
  std::vector<double> m(n * w, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = position[r];
    for (const auto& e : a.rows[r]) {
      const std::size_t j = position[e.col];
      if (j <= i) m[i * w + (j + band - i)] -= e.value;
    }
    m[i * w + band] += shift;
  }

  // Row-oriented LDL^T: u[i*w + slot] = L_ij * D_j for j < i, dval = D.
  std::vector<double> u(n * w, 0.0);
  std::vector<double> dval(n, 0.0);
  std::size_t negatives = 0;
  const double tiny = 1e-300;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j0 = i > band ? i - band : 0;
    for (std::size_t j = j0; j < i; ++j) {
      double acc = m[i * w + (j + band - i)];
      const std::size_t k0 = std::max(j0, j > band ? j - band : 0);
      for (std::size_t k = k0; k < j; ++k) {
        const double l_ik_d = u[i * w + (k + band - i)];
        const double l_jk = u[j * w + (k + band - j)] / dval[k];
        acc -= l_ik_d * l_jk;
      }
      u[i * w + (j + band - i)] = acc;  // = L_ij * D_j
    }
    double di = m[i * w + band];
    for (std::size_t k = j0; k < i; ++k) {
      const double v = u[i * w + (k + band - i)];
      di -= v * v / dval[k];
    }
    if (di == 0.0) di = -tiny;
    dval[i] = di;
    if (di < 0.0) ++negatives;
  }
  return negatives;
}

LanczosResult lanczos_largest(
    const std::function<void(std::span<const double>, std::span<double>)>& op, std::size_t n,
    const std::vector<std::vector<double>>& deflate, double tol, int max_iterations,
    unsigned long long seed) {
  auto dot = [n](std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
  };
  auto project_out = [&](std::vector<double>& v) {
    for (const auto& q : deflate) {
      const double c = dot(q, v);
      for (std::size_t i = 0; i < n; ++i) v[i] -= c * q[i];
    }
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> q(n);
  for (auto& v : q) v = unif(rng);
  project_out(q);
  project_out(q);
  double norm = std::sqrt(dot(q, q));
  for (auto& v : q) v /= norm;

  std::vector<std::vector<double>> basis;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> w(n);
  LanczosResult result;
  const auto limit = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(max_iterations),
                                                            n - deflate.size()));

  auto top_ritz = [&](double& residual) {
    const std::size_t k = alpha.size();
    std::vector<double> off(beta.begin(), beta.begin() + static_cast<long>(k - 1));
    const auto ritz = tridiagonal_eigenvalues(alpha, off);
    const double theta = ritz.front();
    // Last component of the Ritz vector by the three-term recurrence of the
    // tridiagonal eigenvector (x_0 = 1), normalized at the end.
    std::vector<double> x(k, 0.0);
    x[0] = 1.0;
    bool stable = true;
    if (k > 1) {
      for (std::size_t i = 0; i + 1 < k; ++i) {
        const double prev = i > 0 ? beta[i - 1] * x[i - 1] : 0.0;
        if (beta[i] == 0.0) {
          stable = false;
          break;
        }
        x[i + 1] = ((theta - alpha[i]) * x[i] - prev) / beta[i];
        if (!std::isfinite(x[i + 1]) || std::abs(x[i + 1]) > 1e150) {
          stable = false;
          break;
        }
      }
    }
    if (stable) {
      double nx = 0.0;
      for (double v : x) nx += v * v;
      residual = std::abs(beta[k - 1] * x[k - 1]) / std::sqrt(nx);
    } else {
      // Fall back to inverse iteration on T - theta I.
      std::vector<double> y(k, 1.0);
      for (int sweep = 0; sweep < 3; ++sweep) {
        std::vector<double> dd(k);
        std::vector<double> rhs = y;
        const double shift = theta + 1e-13 * (1.0 + std::abs(theta));
        for (std::size_t i = 0; i < k; ++i) dd[i] = alpha[i] - shift;
        for (std::size_t i = 1; i < k; ++i) {
          const double f = beta[i - 1] / dd[i - 1];
          dd[i] -= f * beta[i - 1];
          rhs[i] -= f * rhs[i - 1];
        }
        y[k - 1] = rhs[k - 1] / dd[k - 1];
        for (std::size_t i = k - 1; i-- > 0;) y[i] = (rhs[i] - beta[i] * y[i + 1]) / dd[i];
        double ny = 0.0;
        for (double v : y) ny += v * v;
        ny = std::sqrt(ny);
        for (double& v : y) v /= ny;
      }
      residual = std::abs(beta[k - 1] * y[k - 1]);
    }
    return theta;
  };

  for (int it = 0; it < limit; ++it) {
    basis.push_back(q);
    op(q, w);
    project_out(w);
    const double a = dot(q, w);
    alpha.push_back(a);
    for (std::size_t i = 0; i < n; ++i) w[i] -= a * q[i];
    if (basis.size() > 1) {
      const auto& prev = basis[basis.size() - 2];
      for (std::size_t i = 0; i < n; ++i) w[i] -= beta.back() * prev[i];
    }
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        const double c = dot(b, w);
        for (std::size_t i = 0; i < n; ++i) w[i] -= c * b[i];
      }
      project_out(w);
    }
    const double b = std::sqrt(dot(w, w));
    beta.push_back(b);
    result.iterations = it + 1;

    const bool exhausted = (b < 1e-14) || (it + 1 == limit);
    if (exhausted || (it + 1) % 10 == 0) {
      double residual = 0.0;
      const double theta = top_ritz(residual);
      result.value = theta;
      result.residual = residual;
      if (residual <= tol || exhausted) return result;
    }
    for (std::size_t i = 0; i < n; ++i) q[i] = w[i] / b;
  }
  throw Error(ErrorCode::EigenSolverFailure, "Lanczos did not converge");
}

SecondEigenvalue second_largest_eigenvalue(const SparseSymmetric& a,
                                           std::span<const double> top_vector,
                                           std::size_t dense_limit) {
  const std::size_t n = a.size();
  if (n < 2) throw Error(ErrorCode::DimensionMismatch, "need at least two states");
  if (n <= dense_limit) {
    const auto eig = symmetric_eigen(a.to_dense(), n, false);
    return {eig.values[1], EigenRoute::Dense};
  }
  const auto order = reverse_cuthill_mckee(a);
  const std::size_t band = bandwidth(a, order);
  constexpr int kBisectionSteps = 48;
  const double banded_cost =
      static_cast<double>(n) * static_cast<double>(band) * static_cast<double>(band) * kBisectionSteps;
  if (banded_cost <= 4e8) {
    // Gershgorin bracket.
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double centre = 0.0;
      double radius = 0.0;
      for (const auto& e : a.rows[i]) {
        if (e.col == i)
          centre += e.value;
        else
          radius += std::abs(e.value);
      }
      lo = std::min(lo, centre - radius);
      hi = std::max(hi, centre + radius);
    }
    lo -= 1e-9;
    hi += 1e-9;
    for (int step = 0; step < kBisectionSteps * 2 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi));
         ++step) {
      const double mid = 0.5 * (lo + hi);
      if (count_eigenvalues_above(a, order, band, mid) >= 2)
        lo = mid;
      else
        hi = mid;
    }
    return {0.5 * (lo + hi), EigenRoute::BandedInertia};
  }
  std::vector<double> top(top_vector.begin(), top_vector.end());
  const auto res = lanczos_largest([&a](std::span<const double> x,
                                        std::span<double> y) { a.multiply(x, y); },
                                   n, {top}, 1e-12);
  return {res.value, EigenRoute::Lanczos};
}

}  // namespace potlatch::linalg
