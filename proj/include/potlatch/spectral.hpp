#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "potlatch/kernel.hpp"
#include "potlatch/linalg.hpp"

namespace potlatch {

/// Eigen-decomposition of S = D^{1/2} P D^{-1/2}, D = diag(pi).
/// Eigenvector k is column k of `eigenvectors` (row-major n*n), unit norm
/// in the counting inner product.
struct SpectralDecomposition {
  std::size_t n = 0;
  std::vector<double> eigenvalues;  // descending, eigenvalues[0] == 1
  std::vector<double> eigenvectors;
  double lambda_star = 0.0;
  double gap_abs = 0.0;       // 1 - lambda_star
  double gap_two_step = 0.0;  // 1 - lambda_star^2

  double psi(std::size_t k, std::size_t site) const { return eigenvectors[site * n + k]; }
};

/// Dense symmetric eigensolve. Throws EigenSolverFailure, or DisconnectedGraph
/// when the eigenvalue 1 is repeated.
SpectralDecomposition decompose(const Kernel& k);

/// 1 - cos(2 pi k / n): eigenvalue of the 1-d continuous-time walk generator.
double torus_mode_rate(int n, int k);

struct TorusSpectrum {
  int d = 1;
  int n = 3;
  std::vector<double> lambda_hat;  // indexed like torus sites
  double gamma11 = 0.0;
  double gamma1d = 0.0;
  double gamma2d = 0.0;
};

/// Closed-form torus eigenvalues and gaps. Throws EvenTorusSide.
TorusSpectrum torus_gaps(int d, int n);
/// gamma^(2)_d alone, without tabulating lambda_hat.
double torus_gamma2(int d, int n);

/// Two-step gap 1 - lambda_2(P^2) computed numerically from the sparse
/// symmetrized two-step matrix.
struct NumericGap {
  double gap_two_step = 0.0;
  linalg::EigenRoute route = linalg::EigenRoute::Dense;
};
NumericGap numeric_two_step_gap(const Kernel& k);

/// Heat kernel of the rate-1 continuous-time walk on the n-cycle at time s,
/// as a vector over sites 0..n-1.
std::vector<double> heat_kernel_1d(int n, double s);
/// p(t, .) on T_n^d by the product of 1-d kernels at time t/d.
std::vector<double> heat_kernel(int d, int n, double t);
/// (e^{t Delta} f): convolution of f with the heat kernel, axis by axis.
std::vector<double> heat_evolve(std::span<const double> f, int d, int n, double t);

/// Discrete Laplacian (P - I) f on T_n^d. Throws DimensionMismatch.
std::vector<double> laplacian_of(std::span<const double> f, int d, int n);

/// Real orthonormal eigenbasis of the n-cycle walk: index 0 is constant,
/// 1..(n-1)/2 cosine modes, (n+1)/2..n-1 sine modes (frequency n - k).
double torus_basis_1d(int n, int k, int i);

/// V_x = n^{-d/2} <psi_x, y> in the product Fourier basis, indexed like sites.
std::vector<double> spectral_coords(std::span<const double> profile, const TorusShape& shape);
/// Inverse of the above: y = sum_x n^{d/2} V_x psi_x.
std::vector<double> from_spectral_coords(std::span<const double> coords, const TorusShape& shape);
/// V_k = n^{-1/2} <psi_k, y> for a general decomposition.
std::vector<double> spectral_coords(std::span<const double> profile,
                                    const SpectralDecomposition& sd);

}  // namespace potlatch
