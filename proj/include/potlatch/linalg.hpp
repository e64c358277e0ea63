#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace potlatch::linalg {

/// Eigenpairs of a dense real symmetric matrix, eigenvalues sorted descending.
/// `vectors` is row-major n*n with eigenvector k stored in column k.
struct SymmetricEigen {
  std::size_t n = 0;
  std::vector<double> values;
  std::vector<double> vectors;

  double vector_entry(std::size_t site, std::size_t k) const { return vectors[site * n + k]; }
};

/// Householder tridiagonalization followed by implicit QL with Wilkinson-type
/// shifts. Throws Error(EigenSolverFailure) if an eigenvalue fails to converge
/// within `max_sweeps` QL iterations.
SymmetricEigen symmetric_eigen(std::span<const double> a, std::size_t n, bool want_vectors = true,
                               int max_sweeps = 60);

/// Eigenvalues (descending) of the symmetric tridiagonal matrix with diagonal
/// `diag` and sub-diagonal `off` (off.size() == diag.size() - 1).
std::vector<double> tridiagonal_eigenvalues(std::vector<double> diag, std::vector<double> off,
                                            int max_sweeps = 60);

/// Symmetric matrix held as sparse rows; both triangles are stored.
struct SparseSymmetric {
  struct Entry {
    std::size_t col;
    double value;
  };
  std::vector<std::vector<Entry>> rows;

  std::size_t size() const { return rows.size(); }
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> to_dense() const;
};

/// Reverse Cuthill-McKee ordering: order[new] = old.
std::vector<std::size_t> reverse_cuthill_mckee(const SparseSymmetric& a);
std::size_t bandwidth(const SparseSymmetric& a, std::span<const std::size_t> order);

/// Number of eigenvalues strictly greater than `shift`, from the inertia of
/// the banded LDL^T factorization of (shift I - A) (Sylvester's law).
std::size_t count_eigenvalues_above(const SparseSymmetric& a, std::span<const std::size_t> order,
                                    std::size_t band, double shift);

struct LanczosResult {
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Largest eigenvalue of a symmetric operator restricted to the orthogonal
/// complement of `deflate` (unit vectors), by Lanczos with full
/// reorthogonalization. Stops once the Ritz residual is below `tol`.
LanczosResult lanczos_largest(const std::function<void(std::span<const double>, std::span<double>)>& op,
                              std::size_t n, const std::vector<std::vector<double>>& deflate,
                              double tol = 1e-12, int max_iterations = 2000,
                              unsigned long long seed = 0x5eedULL);

/// Which numerical route `second_largest_eigenvalue` took.
enum class EigenRoute { Dense, BandedInertia, Lanczos };

struct SecondEigenvalue {
  double value = 0.0;
  EigenRoute route = EigenRoute::Dense;
};

/// Second-largest eigenvalue (with multiplicity) of a symmetric matrix whose
/// top eigenvalue is simple with unit eigenvector `top_vector`. Picks a dense,
/// banded-inertia or Lanczos route from the size and RCM bandwidth.
SecondEigenvalue second_largest_eigenvalue(const SparseSymmetric& a,
                                           std::span<const double> top_vector,
                                           std::size_t dense_limit = 256);

}  // namespace potlatch::linalg
