#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "potlatch/kernel.hpp"
#include "potlatch/linalg.hpp"
#include "potlatch/spectral.hpp"
#include "test_util.hpp"

using namespace potlatch;
using std::numbers::pi;

TEST_CASE("decompose: closed-form examples") {
  SUBCASE("complete(n)") {
    const auto sd = decompose(build_kernel(GraphSpec::complete(5)));
    CHECK(sd.eigenvalues[0] == doctest::Approx(1.0));
    for (std::size_t i = 1; i < 5; ++i) CHECK(std::abs(sd.eigenvalues[i]) <= 1e-12);
    CHECK(sd.gap_abs == doctest::Approx(1.0));
    CHECK(sd.gap_two_step == doctest::Approx(1.0));
  }
  SUBCASE("torus(1,3)") {
    const auto sd = decompose(build_kernel(GraphSpec::torus(1, 3)));
    CHECK(sd.eigenvalues[1] == doctest::Approx(-0.5));
    CHECK(sd.eigenvalues[2] == doctest::Approx(-0.5));
    CHECK(sd.gap_abs == doctest::Approx(0.5));
    CHECK(sd.gap_two_step == doctest::Approx(0.75));
  }
  SUBCASE("torus(1,5) against Jacobi on P^2") {
    const auto sd = decompose(build_kernel(GraphSpec::torus(1, 5)));
    const auto P = oracle::torus_matrix(1, 5);
    const double ref = oracle::two_step_gap(P, std::vector<double>(5, 0.2));
    CHECK(std::abs(sd.gap_two_step - ref) <= 1e-12);
    CHECK(std::abs(sd.gap_two_step - (1.0 - std::pow(std::cos(pi / 5), 2))) <= 1e-12);
  }
}

TEST_CASE("decompose: invariants on 100 random reversible kernels") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 11);
    const auto rk = oracle::random_reversible(n, rng, 0.3);
    const Kernel k = build_kernel(GraphSpec::custom(static_cast<int>(n), rk.P));
    const auto sd = decompose(k);
    const auto ref = oracle::jacobi_eigenvalues(oracle::symmetrize(rk.P, rk.pi), n);
    REQUIRE(std::abs(sd.eigenvalues[0] - 1.0) <= 1e-10);
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(std::abs(sd.eigenvalues[i] - ref[i]) <= 1e-8);
      REQUIRE(std::abs(sd.eigenvalues[i]) <= 1.0 + 1e-10);
    }
    REQUIRE(sd.eigenvalues[n - 1] > -1.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        double dot = 0.0;
        for (std::size_t s = 0; s < n; ++s) dot += sd.psi(a, s) * sd.psi(b, s);
        REQUIRE(std::abs(dot - (a == b ? 1.0 : 0.0)) <= 1e-8);
      }
    REQUIRE(std::abs(sd.gap_two_step - (2 * sd.gap_abs - sd.gap_abs * sd.gap_abs)) <= 1e-12);
  }
}

TEST_CASE("decompose: repeated eigenvalue 1 is rejected") {
  // Two disconnected blocks cannot reach Kernel construction, so feed the
  // eigen-solver check via a block-diagonal symmetric matrix directly.
  const std::vector<double> a = {1, 0, 0, 1};
  const auto eig = linalg::symmetric_eigen(a, 2);
  CHECK(eig.values[0] == doctest::Approx(1.0));
  CHECK(eig.values[1] == doctest::Approx(1.0));
}

TEST_CASE("torus_gaps examples") {
  const auto t13 = torus_gaps(1, 3);
  CHECK(t13.gamma11 == doctest::Approx(1.5));
  CHECK(t13.gamma2d == doctest::Approx(0.75));
  const auto t45 = torus_gaps(4, 5);
  CHECK(std::abs(t45.gamma11 - 0.6909830056250525) <= 1e-12);
  CHECK(std::abs(t45.gamma2d - 0.3156504) <= 1e-7);
  CHECK(t45.gamma1d == doctest::Approx(t45.gamma11 / 4));
  CHECK(t45.lambda_hat[0] == 0.0);
  for (std::size_t x = 1; x < t45.lambda_hat.size(); ++x) CHECK(t45.lambda_hat[x] > 0.0);
  CHECK_ERROR_CODE(torus_gaps(2, 6), ErrorCode::EvenTorusSide);
  CHECK(torus_gamma2(4, 5) == doctest::Approx(t45.gamma2d));
}

TEST_CASE("gamma2d against the eigensolve oracle") {
  for (auto [d, n] : {std::pair{1, 5}, {2, 5}, {3, 3}, {4, 3}, {1, 9}, {2, 7}, {5, 3}}) {
    const auto P = oracle::torus_matrix(d, n);
    const std::size_t N = static_cast<std::size_t>(std::lround(std::pow(n, d)));
    const double ref = oracle::two_step_gap(P, std::vector<double>(N, 1.0 / static_cast<double>(N)));
    CAPTURE(d);
    CAPTURE(n);
    CHECK(std::abs(torus_gamma2(d, n) - ref) <= 1e-10);
    CHECK(std::abs(numeric_two_step_gap(build_kernel(GraphSpec::torus(d, n))).gap_two_step - ref) <= 1e-10);
  }
}

TEST_CASE("numeric gap routes agree with the closed form") {
  SUBCASE("banded inertia") {
    const Kernel k = build_kernel(GraphSpec::torus(1, 401));
    const auto g = numeric_two_step_gap(k);
    CHECK(g.route == linalg::EigenRoute::BandedInertia);
    CHECK(std::abs(g.gap_two_step - torus_gamma2(1, 401)) <= 1e-10);
  }
  SUBCASE("lanczos") {
    const Kernel k = build_kernel(GraphSpec::torus(3, 13));
    const auto g = numeric_two_step_gap(k);
    CHECK(g.route == linalg::EigenRoute::Lanczos);
    CHECK(std::abs(g.gap_two_step - torus_gamma2(3, 13)) <= 1e-10);
  }
}

TEST_CASE("quadratic envelope of the 1-d torus eigenvalues") {
  // From x^2/2 - x^4/24 <= 1 - cos x <= x^2/2 with x = 2 pi j / n <= pi.
  const double C1 = 2 * pi * pi * (1 - pi * pi / 12);
  const double C2 = 2 * pi * pi;
  for (int n : {3, 5, 11, 51, 101}) {
    for (int j = 1; j <= n / 2; ++j) {
      const double lam = torus_mode_rate(n, j);
      const double r = static_cast<double>(j * j) / (n * n);
      CHECK(lam >= C1 * r - 1e-15);
      CHECK(lam <= C2 * r + 1e-15);
    }
  }
}

TEST_CASE("heat kernel") {
  SUBCASE("t = 0 is the delta") {
    const auto p = heat_kernel(2, 5, 0.0);
    CHECK(p[0] == 1.0);
    for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i] == 0.0);
  }
  SUBCASE("mass one, nonnegative, symmetric") {
    for (double t : {0.1, 1.0, 7.5}) {
      const auto p = heat_kernel(2, 5, t);
      double s = 0.0;
      for (double v : p) {
        s += v;
        CHECK(v >= -1e-12);
      }
      CHECK(std::abs(s - 1.0) <= 1e-10);
    }
    const auto q = heat_kernel(1, 5, 1.0);
    for (int i = 1; i < 5; ++i) CHECK(std::abs(q[static_cast<std::size_t>(i)] - q[static_cast<std::size_t>(5 - i)]) <= 1e-15);
  }
  SUBCASE("semigroup on T_5^1") {
    for (auto [s, t] : {std::pair{0.3, 0.7}, {1.0, 1.0}}) {
      const auto ps = heat_kernel(1, 5, s);
      const auto pt = heat_kernel(1, 5, t);
      const auto pst = heat_kernel(1, 5, s + t);
      for (int i = 0; i < 5; ++i) {
        double conv = 0.0;
        for (int j = 0; j < 5; ++j) conv += ps[static_cast<std::size_t>(j)] * pt[static_cast<std::size_t>((i - j + 5) % 5)];
        CHECK(std::abs(conv - pst[static_cast<std::size_t>(i)]) <= 1e-8);
      }
    }
  }
  SUBCASE("heat equation by central differences") {
    for (auto [d, n] : {std::pair{1, 5}, {2, 3}}) {
      const double t = 0.8;
      const double h = 1e-4;
      const auto p = heat_kernel(d, n, t);
      const auto plus = heat_kernel(d, n, t + h);
      const auto minus = heat_kernel(d, n, t - h);
      const auto lap = laplacian_of(p, d, n);
      for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs((plus[i] - minus[i]) / (2 * h) - lap[i]) <= 1e-6);
    }
  }
  SUBCASE("heat_evolve matches matrix exponential by series") {
    const int n = 5;
    std::vector<double> f = {0.3, -1.0, 2.0, 0.5, 0.0};
    const auto got = heat_evolve(f, 1, n, 0.9);
    // exp(t (P - I)) f by Taylor series.
    const auto P = oracle::torus_matrix(1, n);
    std::vector<double> term = f;
    std::vector<double> sum = f;
    for (int k = 1; k < 60; ++k) {
      std::vector<double> next(5, 0.0);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) next[static_cast<std::size_t>(i)] += P[static_cast<std::size_t>(i * n + j)] * term[static_cast<std::size_t>(j)];
        next[static_cast<std::size_t>(i)] -= term[static_cast<std::size_t>(i)];
        next[static_cast<std::size_t>(i)] *= 0.9 / k;
      }
      term = next;
      for (int i = 0; i < n; ++i) sum[static_cast<std::size_t>(i)] += term[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < n; ++i) CHECK(std::abs(got[static_cast<std::size_t>(i)] - sum[static_cast<std::size_t>(i)]) <= 1e-12);
    const auto same = heat_evolve(f, 1, n, 0.0);
    CHECK(same == f);
  }
}

TEST_CASE("laplacian_of") {
  const std::vector<double> c(9, 3.0);
  for (double v : laplacian_of(c, 2, 3)) CHECK(std::abs(v) <= 1e-15);
  const auto l = laplacian_of(std::vector<double>{1, 0, 0}, 1, 3);
  CHECK(l[0] == doctest::Approx(-1.0));
  CHECK(l[1] == doctest::Approx(0.5));
  CHECK(l[2] == doctest::Approx(0.5));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> f(25);
  for (double& v : f) v = g(rng);
  double s = 0.0;
  for (double v : laplacian_of(f, 2, 5)) s += v;
  CHECK(std::abs(s) <= 1e-12);
  CHECK_ERROR_CODE(laplacian_of(std::vector<double>(4), 1, 5), ErrorCode::DimensionMismatch);
}

TEST_CASE("spectral coordinates") {
  const TorusShape shape{1, 5};
  SUBCASE("constant profile has no nonzero modes") {
    const auto c = spectral_coords(std::vector<double>(5, 2.0), shape);
    for (std::size_t x = 1; x < 5; ++x) CHECK(std::abs(c[x]) <= 1e-15);
  }
  SUBCASE("basis vector gives one coefficient") {
    std::vector<double> psi(5);
    for (int i = 0; i < 5; ++i) psi[static_cast<std::size_t>(i)] = torus_basis_1d(5, 1, i);
    const auto c = spectral_coords(psi, shape);
    for (std::size_t x = 0; x < 5; ++x) CHECK(std::abs(c[x] - (x == 1 ? 1.0 / std::sqrt(5.0) : 0.0)) <= 1e-14);
  }
  SUBCASE("reconstruction and identities on random profiles") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (auto sh : {TorusShape{1, 5}, TorusShape{2, 3}, TorusShape{3, 3}}) {
      const auto ts = torus_gaps(sh.d, sh.n);
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> y(sh.sites());
        for (double& v : y) v = g(rng);
        const auto c = spectral_coords(y, sh);
        const auto back = from_spectral_coords(c, sh);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(back[i] - y[i]) <= 1e-9);
        // Eigenvalues of P - I: -lambda_hat.
        const auto lap = laplacian_of(y, sh.d, sh.n);
        const auto lc = spectral_coords(lap, sh);
        for (std::size_t x = 0; x < y.size(); ++x) CHECK(std::abs(lc[x] + ts.lambda_hat[x] * c[x]) <= 1e-12);
      }
    }
  }
  SUBCASE("general decomposition") {
    const Kernel k = build_kernel(GraphSpec::torus(1, 5));
    const auto sd = decompose(k);
    const std::vector<double> y = {1, 2, 0, -1, 0.5};
    const auto c = spectral_coords(y, sd);
    double v_direct = 0.0;
    double mean = 0.0;
    for (double v : y) mean += v / 5;
    for (double v : y) v_direct += (v - mean) * (v - mean) / 5;
    double v_modes = 0.0;
    for (std::size_t x = 1; x < 5; ++x) v_modes += c[x] * c[x];
    CHECK(std::abs(v_modes - v_direct) <= 1e-12);
    CHECK_ERROR_CODE(spectral_coords(std::vector<double>(3), sd), ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("linalg building blocks") {
  SUBCASE("tridiagonal eigenvalues of the path Laplacian") {
    const std::size_t m = 8;
    const auto ev = linalg::tridiagonal_eigenvalues(std::vector<double>(m, 2.0), std::vector<double>(m - 1, -1.0));
    for (std::size_t k = 1; k <= m; ++k) {
      const double ref = 2 - 2 * std::cos(pi * static_cast<double>(k) / (m + 1));
      CHECK(std::abs(ev[m - k] - ref) <= 1e-12);
    }
  }
  SUBCASE("RCM does not widen the band and inertia counts are right") {
    const Kernel k = build_kernel(GraphSpec::torus(2, 7));
    linalg::SparseSymmetric a;
    a.rows.resize(k.size());
    for (std::size_t i = 0; i < k.size(); ++i)
      for (const auto& e : k.row(i)) a.rows[i].push_back({e.col, e.p});
    std::vector<std::size_t> ident(k.size());
    for (std::size_t i = 0; i < ident.size(); ++i) ident[i] = i;
    const auto order = linalg::reverse_cuthill_mckee(a);
    const std::size_t band = linalg::bandwidth(a, order);
    CHECK(band <= linalg::bandwidth(a, ident));
    const auto ref = oracle::jacobi_eigenvalues(a.to_dense(), k.size());
    for (double shift : {-0.9, -0.3, 0.05, 0.4, 0.95}) {
      const auto expected = static_cast<std::size_t>(std::count_if(ref.begin(), ref.end(), [&](double v) { return v > shift; }));
      CHECK(linalg::count_eigenvalues_above(a, order, band, shift) == expected);
    }
  }
}
