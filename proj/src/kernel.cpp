#include "potlatch/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "potlatch/error.hpp"

namespace potlatch {

std::size_t TorusShape::sites() const {
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::size_t>(n);
  return total;
}

std::vector<int> TorusShape::coords(std::size_t site) const {
  std::vector<int> x(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    x[static_cast<std::size_t>(k)] = static_cast<int>(site % static_cast<std::size_t>(n));
    site /= static_cast<std::size_t>(n);
  }
  return x;
}

std::size_t TorusShape::index(std::span<const int> x) const {
  std::size_t site = 0;
  for (int k = d - 1; k >= 0; --k) {
    int c = x[static_cast<std::size_t>(k)] % n;
    if (c < 0) c += n;
    site = site * static_cast<std::size_t>(n) + static_cast<std::size_t>(c);
  }
  return site;
}

std::size_t TorusShape::shift(std::size_t site, int axis, int delta) const {
  std::size_t stride = 1;
  for (int k = 0; k < axis; ++k) stride *= static_cast<std::size_t>(n);
  const int c = static_cast<int>((site / stride) % static_cast<std::size_t>(n));
  int moved = (c + delta) % n;
  if (moved < 0) moved += n;
  return site + (static_cast<std::size_t>(moved) - static_cast<std::size_t>(c)) * stride;
}

void GraphSpec::validate() const {
  std::visit(
      [this](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, TorusGraph>) {
          if (g.d < 1) throw Error(ErrorCode::InvalidGraph, "torus dimension must be >= 1");
          if (g.n < 3) throw Error(ErrorCode::InvalidGraph, "torus side must be >= 3");
          if (g.n % 2 == 0)
            throw Error(ErrorCode::EvenTorusSide,
                        "torus side " + std::to_string(g.n) + " is even; the walk is periodic");
          double total = std::pow(static_cast<double>(g.n), g.d);
          if (total > static_cast<double>(site_cap))
            throw Error(ErrorCode::InvalidGraph, "torus has more sites than the cap " +
                                                     std::to_string(site_cap));
        } else if constexpr (std::is_same_v<G, CompleteGraph>) {
          if (g.n < 2) throw Error(ErrorCode::InvalidGraph, "complete graph needs n >= 2");
          if (static_cast<std::size_t>(g.n) > site_cap)
            throw Error(ErrorCode::InvalidGraph, "complete graph exceeds the site cap");
        } else {
          if (g.n < 2) throw Error(ErrorCode::InvalidGraph, "custom kernel needs n >= 2");
          if (static_cast<std::size_t>(g.n) > site_cap)
            throw Error(ErrorCode::InvalidGraph, "custom kernel exceeds the site cap");
          const auto nn = static_cast<std::size_t>(g.n);
          if (g.P.size() != nn * nn)
            throw Error(ErrorCode::DimensionMismatch, "P must be n x n");
          if (g.pi && g.pi->size() != nn)
            throw Error(ErrorCode::DimensionMismatch, "pi must have n entries");
        }
      },
      kind);
}

std::string GraphSpec::describe() const {
  std::ostringstream os;
  std::visit(
      [&os](const auto& g) {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, TorusGraph>)
          os << "torus(d=" << g.d << ",n=" << g.n << ")";
        else if constexpr (std::is_same_v<G, CompleteGraph>)
          os << "complete(" << g.n << ")";
        else
          os << "custom(" << g.n << ")";
      },
      kind);
  return os.str();
}

bool strongly_connected(const std::vector<std::vector<KernelEntry>>& rows) {
  const std::size_t n = rows.size();
  if (n == 0) return false;
  std::vector<std::vector<std::size_t>> reverse(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : rows[i]) reverse[e.col].push_back(i);

  auto reaches_all = [n](auto&& neighbours) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      neighbours(u, [&](std::size_t v) {
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      });
    }
    return count == n;
  };
  const bool forward = reaches_all([&](std::size_t u, auto&& visit) {
    for (const auto& e : rows[u]) visit(e.col);
  });
  const bool backward = reaches_all([&](std::size_t u, auto&& visit) {
    for (std::size_t v : reverse[u]) visit(v);
  });
  return forward && backward;
}

std::size_t chain_period(const std::vector<std::vector<KernelEntry>>& rows) {
  const std::size_t n = rows.size();
  constexpr auto kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> level(n, kUnset);
  std::deque<std::size_t> queue{0};
  level[0] = 0;
  std::size_t g = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (const auto& e : rows[u]) {
      if (level[e.col] == kUnset) {
        level[e.col] = level[u] + 1;
        queue.push_back(e.col);
      } else {
        const auto a = static_cast<long long>(level[u]) + 1;
        const auto b = static_cast<long long>(level[e.col]);
        g = std::gcd(g, static_cast<std::size_t>(std::llabs(a - b)));
      }
    }
  }
  return g;
}

Kernel::Kernel(std::vector<std::vector<KernelEntry>> rows, std::vector<double> pi,
               std::optional<TorusShape> torus)
    : pi_(std::move(pi)), torus_(torus) {
  const std::size_t n = rows.size();
  if (n == 0) throw Error(ErrorCode::InvalidGraph, "kernel has no sites");
  if (pi_.size() != n) throw Error(ErrorCode::DimensionMismatch, "pi length differs from P");

  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end(),
              [](const KernelEntry& a, const KernelEntry& b) { return a.col < b.col; });
    // merge duplicates, drop zeros
    std::vector<KernelEntry> merged;
    merged.reserve(r.size());
    double sum = 0.0;
    for (const auto& e : r) {
      if (e.col >= n) throw Error(ErrorCode::DimensionMismatch, "column index out of range");
      if (!std::isfinite(e.p) || e.p < 0.0)
        throw Error(ErrorCode::NonStochasticRow,
                    "row " + std::to_string(i) + " has a negative or non-finite entry");
      sum += e.p;
      if (e.p == 0.0) continue;
      if (!merged.empty() && merged.back().col == e.col)
        merged.back().p += e.p;
      else
        merged.push_back(e);
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      throw Error(ErrorCode::NonStochasticRow,
                  "row " + std::to_string(i) + " sums to " + std::to_string(sum));
    r = std::move(merged);
  }

  if (!strongly_connected(rows))
    throw Error(ErrorCode::DisconnectedGraph, "positive-entry digraph is not strongly connected");
  if (const auto period = chain_period(rows); period != 1)
    throw Error(ErrorCode::PeriodicChain, "chain has period " + std::to_string(period));

  double total = 0.0;
  for (double v : pi_) {
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidGraph, "stationary vector must be positive");
    total += v;
  }
  if (std::abs(total - 1.0) > kRowSumTol)
    throw Error(ErrorCode::InvalidGraph, "stationary vector does not sum to 1");
  pi_min_ = *std::min_element(pi_.begin(), pi_.end());
  pi_max_ = *std::max_element(pi_.begin(), pi_.end());

  row_ptr_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) row_ptr_[i + 1] = row_ptr_[i] + rows[i].size();
  entries_.reserve(row_ptr_[n]);
  for (auto& r : rows) entries_.insert(entries_.end(), r.begin(), r.end());

  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : row(i)) {
      const double flow_ij = pi_[i] * e.p;
      const double flow_ji = pi_[e.col] * p(e.col, i);
      if (std::abs(flow_ij - flow_ji) > kReversibilityTol)
        throw Error(ErrorCode::NonReversible,
                    "detailed balance fails for (" + std::to_string(i) + "," +
                        std::to_string(e.col) + ")");
    }
  }
}

double Kernel::p(std::size_t i, std::size_t j) const {
  const auto r = row(i);
  const auto it = std::lower_bound(r.begin(), r.end(), j,
                                   [](const KernelEntry& e, std::size_t c) { return e.col < c; });
  return (it != r.end() && it->col == j) ? it->p : 0.0;
}

std::vector<double> Kernel::dense() const {
  const std::size_t n = size();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& e : row(i)) out[i * n + e.col] = e.p;
  return out;
}

void Kernel::apply(std::span<const double> f, std::span<double> out) const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const auto& e : row(i)) acc += e.p * f[e.col];
    out[i] = acc;
  }
}

namespace {

std::vector<std::vector<KernelEntry>> dense_to_rows(std::span<const double> P, std::size_t n) {
  std::vector<std::vector<KernelEntry>> rows(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (P[i * n + j] != 0.0) rows[i].push_back({j, P[i * n + j]});
  return rows;
}

// LU with partial pivoting on a dense square matrix, in place.
struct DenseLu {
  std::size_t n;
  std::vector<double> a;
  std::vector<std::size_t> perm;

  DenseLu(std::vector<double> m, std::size_t size) : n(size), a(std::move(m)), perm(size) {
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(a[i * n + k]) > std::abs(a[piv * n + k])) piv = i;
      if (std::abs(a[piv * n + k]) < 1e-300)
        throw Error(ErrorCode::DisconnectedGraph, "stationary system is singular");
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
        std::swap(perm[k], perm[piv]);
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = a[i * n + k] / a[k * n + k];
        a[i * n + k] = f;
        for (std::size_t j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
      }
    }
  }

  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= a[i * n + j] * x[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= a[i * n + j] * x[j];
      x[i] /= a[i * n + i];
    }
    return x;
  }
};

}  // namespace

std::vector<double> stationary_measure(std::span<const double> P, std::size_t n,
                                       int max_refinements) {
  if (P.size() != n * n) throw Error(ErrorCode::DimensionMismatch, "P must be n x n");
  // Rows 0..n-2 of (P^T - I) pi = 0, last row replaced by sum(pi) = 1.
  std::vector<double> A(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      A[i * n + j] = (i + 1 == n) ? 1.0 : P[j * n + i] - (i == j ? 1.0 : 0.0);
  std::vector<double> b(n, 0.0);
  b[n - 1] = 1.0;
  const DenseLu lu(A, n);
  std::vector<double> pi = lu.solve(b);

  auto balance_residual = [&] {
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += pi[i] * P[i * n + j];
      worst = std::max(worst, std::abs(acc - pi[j]));
    }
    return worst;
  };

  for (int it = 0; it <= max_refinements; ++it) {
    if (balance_residual() <= 1e-12) {
      const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
      for (double& v : pi) v /= total;
      return pi;
    }
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += A[i * n + j] * pi[j];
      r[i] = b[i] - acc;
    }
    const auto delta = lu.solve(r);
    for (std::size_t i = 0; i < n; ++i) pi[i] += delta[i];
  }
  throw Error(ErrorCode::NoConvergence, "stationary vector residual stayed above 1e-12");
}

Kernel build_kernel(const GraphSpec& spec) {
  spec.validate();
  return std::visit(
      [](const auto& g) -> Kernel {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, TorusGraph>) {
          const TorusShape shape{g.d, g.n};
          const std::size_t sites = shape.sites();
          const double w = 1.0 / (2.0 * g.d);
          std::vector<std::vector<KernelEntry>> rows(sites);
          for (std::size_t s = 0; s < sites; ++s) {
            rows[s].reserve(static_cast<std::size_t>(2 * g.d));
            for (int axis = 0; axis < g.d; ++axis) {
              rows[s].push_back({shape.shift(s, axis, +1), w});
              rows[s].push_back({shape.shift(s, axis, -1), w});
            }
          }
          return Kernel(std::move(rows), std::vector<double>(sites, 1.0 / static_cast<double>(sites)),
                        shape);
        } else if constexpr (std::is_same_v<G, CompleteGraph>) {
          const auto n = static_cast<std::size_t>(g.n);
          const double w = 1.0 / static_cast<double>(n);
          std::vector<std::vector<KernelEntry>> rows(n);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) rows[i].push_back({j, w});
          return Kernel(std::move(rows), std::vector<double>(n, w));
        } else {
          const auto n = static_cast<std::size_t>(g.n);
          auto rows = dense_to_rows(g.P, n);
          for (double v : g.P)
            if (!std::isfinite(v) || v < 0.0)
              throw Error(ErrorCode::NonStochasticRow, "P has a negative or non-finite entry");
          for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) sum += g.P[i * n + j];
            if (std::abs(sum - 1.0) > kRowSumTol)
              throw Error(ErrorCode::NonStochasticRow,
                          "row " + std::to_string(i) + " sums to " + std::to_string(sum));
          }
          if (!strongly_connected(rows))
            throw Error(ErrorCode::DisconnectedGraph,
                        "positive-entry digraph is not strongly connected");
          std::vector<double> pi = g.pi ? *g.pi : stationary_measure(g.P, n);
          return Kernel(std::move(rows), std::move(pi));
        }
      },
      spec.kind);
}

Kernel two_step_kernel(const Kernel& k) {
  const std::size_t n = k.size();
  std::vector<std::vector<KernelEntry>> rows(n);
  std::vector<double> acc(n, 0.0);
  std::vector<std::size_t> touched;
  std::vector<char> mark(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    touched.clear();
    for (const auto& a : k.row(i)) {
      for (const auto& b : k.row(a.col)) {
        if (!mark[b.col]) {
          mark[b.col] = 1;
          touched.push_back(b.col);
        }
        acc[b.col] += a.p * b.p;
      }
    }
    std::sort(touched.begin(), touched.end());
    rows[i].reserve(touched.size());
    for (std::size_t j : touched) {
      rows[i].push_back({j, acc[j]});
      acc[j] = 0.0;
      mark[j] = 0;
    }
  }
  return Kernel(std::move(rows), std::vector<double>(k.pi().begin(), k.pi().end()));
}

GraphSpec parse_custom_kernel_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("kernel JSON: ") + e.what());
  }
  if (!doc.contains("n") || !doc.contains("P"))
    throw Error(ErrorCode::ConfigInvalid, "kernel JSON requires fields \"n\" and \"P\"");
  const int n = doc.at("n").get<int>();
  const auto& rows = doc.at("P");
  if (!rows.is_array() || rows.size() != static_cast<std::size_t>(n))
    throw Error(ErrorCode::DimensionMismatch, "\"P\" must have n rows");
  std::vector<double> P;
  P.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (const auto& r : rows) {
    if (!r.is_array() || r.size() != static_cast<std::size_t>(n))
      throw Error(ErrorCode::DimensionMismatch, "each row of \"P\" must have n entries");
    for (const auto& v : r) P.push_back(v.get<double>());
  }
  std::optional<std::vector<double>> pi;
  if (doc.contains("pi") && !doc.at("pi").is_null()) pi = doc.at("pi").get<std::vector<double>>();
  return GraphSpec::custom(n, std::move(P), std::move(pi));
}

}  // namespace potlatch
