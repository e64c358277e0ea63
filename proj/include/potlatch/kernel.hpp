#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace potlatch {

inline constexpr double kRowSumTol = 1e-12;
inline constexpr double kReversibilityTol = 1e-12;
inline constexpr std::size_t kDefaultSiteCap = 1'000'000;

/// Discrete torus (Z/nZ)^d. Site index is sum_k x_k n^k, coordinate 0 fastest.
struct TorusShape {
  int d = 1;
  int n = 3;

  std::size_t sites() const;
  std::vector<int> coords(std::size_t site) const;
  std::size_t index(std::span<const int> coords) const;
  /// Site reached from `site` by adding `delta` (mod n) to coordinate `axis`.
  std::size_t shift(std::size_t site, int axis, int delta) const;

  bool operator==(const TorusShape&) const = default;
};

struct TorusGraph {
  int d = 1;
  int n = 3;
};

struct CompleteGraph {
  int n = 2;
};

struct CustomGraph {
  int n = 0;
  std::vector<double> P;  // row-major n*n
  std::optional<std::vector<double>> pi;
};

struct GraphSpec {
  std::variant<TorusGraph, CompleteGraph, CustomGraph> kind;
  std::size_t site_cap = kDefaultSiteCap;

  static GraphSpec torus(int d, int n) { return {TorusGraph{d, n}}; }
  static GraphSpec complete(int n) { return {CompleteGraph{n}}; }
  static GraphSpec custom(int n, std::vector<double> P,
                          std::optional<std::vector<double>> pi = std::nullopt) {
    return {CustomGraph{n, std::move(P), std::move(pi)}};
  }

  /// Throws Error(EvenTorusSide / InvalidGraph) when the spec is malformed.
  void validate() const;
  std::string describe() const;
};

struct KernelEntry {
  std::size_t col;
  double p;
};

/// Immutable finite reversible transition kernel. Rows are stored sparsely;
/// `dense()` materializes the full matrix for small chains.
class Kernel {
 public:
  /// Validates stochasticity, irreducibility, aperiodicity and reversibility.
  /// `rows[i]` may list columns in any order; zero entries are dropped.
  Kernel(std::vector<std::vector<KernelEntry>> rows, std::vector<double> pi,
         std::optional<TorusShape> torus = std::nullopt);

  std::size_t size() const { return pi_.size(); }
  std::span<const KernelEntry> row(std::size_t i) const {
    return {entries_.data() + row_ptr_[i], entries_.data() + row_ptr_[i + 1]};
  }
  /// O(log deg) lookup of p_ij.
  double p(std::size_t i, std::size_t j) const;
  std::span<const double> pi() const { return pi_; }
  double pi_min() const { return pi_min_; }
  double pi_max() const { return pi_max_; }
  std::size_t nnz() const { return entries_.size(); }

  bool is_torus() const { return torus_.has_value(); }
  const std::optional<TorusShape>& torus() const { return torus_; }

  /// Row-major n*n copy of P.
  std::vector<double> dense() const;
  /// (P f)_i for a site vector f.
  void apply(std::span<const double> f, std::span<double> out) const;

 private:
  std::vector<std::size_t> row_ptr_;
  std::vector<KernelEntry> entries_;
  std::vector<double> pi_;
  double pi_min_ = 0.0;
  double pi_max_ = 0.0;
  std::optional<TorusShape> torus_;
};

Kernel build_kernel(const GraphSpec& spec);

/// Stationary vector of a row-stochastic n*n matrix (row-major): direct solve
/// followed by iterative refinement until ||pi P - pi||_inf <= 1e-12.
std::vector<double> stationary_measure(std::span<const double> P, std::size_t n,
                                       int max_refinements = 50);

/// Kernel of the two-step chain P^2 with the same stationary vector.
Kernel two_step_kernel(const Kernel& k);

/// Parses {"n": int, "P": [[...]], "pi": optional [...]}.
GraphSpec parse_custom_kernel_json(const std::string& text);

/// Greatest common divisor of cycle lengths in the positive-entry digraph
/// (assumes strong connectivity).
std::size_t chain_period(const std::vector<std::vector<KernelEntry>>& rows);
bool strongly_connected(const std::vector<std::vector<KernelEntry>>& rows);

}  // namespace potlatch
