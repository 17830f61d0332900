#include "driftrec/spectral.hpp"

#include "driftrec/hypergraph.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace driftrec;
namespace oracle = driftrec::testing;

namespace {

Eigen::SparseMatrix<double> sparse_diag(std::initializer_list<double> values) {
  const auto n = static_cast<Eigen::Index>(values.size());
  Eigen::SparseMatrix<double> m(n, n);
  Eigen::Index i = 0;
  for (double v : values) {
    if (v != 0) m.insert(i, i) = v;
    ++i;
  }
  m.makeCompressed();
  return m;
}

Eigen::SparseMatrix<double> path3_laplacian() {
  // unweighted path graph on 3 nodes
  Eigen::SparseMatrix<double> m(3, 3);
  m.insert(0, 0) = 1;
  m.insert(0, 1) = -1;
  m.insert(1, 0) = -1;
  m.insert(1, 1) = 2;
  m.insert(1, 2) = -1;
  m.insert(2, 1) = -1;
  m.insert(2, 2) = 1;
  m.makeCompressed();
  return m;
}

}  // namespace

TEST_CASE("spectrum_bound") {
  SUBCASE("zero matrix falls back to 1") {
    Eigen::SparseMatrix<double> zero(4, 4);
    CHECK(spectrum_bound(zero) == doctest::Approx(1.0));
  }

  SUBCASE("diag(0,2) gives about 2.02") {
    CHECK(spectrum_bound(sparse_diag({0.0, 2.0})) == doctest::Approx(2.02).epsilon(1e-6));
  }

  SUBCASE("random PSD within 1% of the dense eigensolver") {
    RngStream rng(31);
    for (int trial = 0; trial < 5; ++trial) {
      const Hypergraph g = oracle::random_hypergraph(rng, 12, 20);
      const auto lap = laplacian(g).matrix;
      const double bound = spectrum_bound(lap, 100);
      const Eigen::VectorXd evals = exact_spectrum(lap).eigenvalues;
      const double exact = evals.maxCoeff();
      CHECK(bound >= exact * 0.99);
      CHECK(bound <= exact * 1.03);
    }
  }
}

TEST_CASE("chebyshev coefficients: identity filter at scale zero") {
  const Eigen::VectorXd c = kernel_filter_coeffs(heat_kernel, 0.0, 5, 50, 2.0);
  CHECK(c(0) == doctest::Approx(1.0).epsilon(1e-14));
  for (int j = 1; j <= 5; ++j) CHECK(std::abs(c(j)) < 1e-14);
}

TEST_CASE("chebyshev coefficients of exp(-x) match the Bessel series") {
  // c_0 = I_0(1), c_j = 2 (-1)^j I_j(1)
  const Eigen::VectorXd c =
      chebyshev_interp_coeffs([](double x) { return std::exp(-x); }, 6, 50);
  CHECK(c(0) == doctest::Approx(oracle::bessel_i(0, 1.0)).epsilon(1e-12));
  CHECK(c(0) == doctest::Approx(1.266066).epsilon(1e-6));
  for (int j = 1; j <= 6; ++j) {
    const double expected = 2.0 * ((j % 2 == 0) ? 1.0 : -1.0) * oracle::bessel_i(j, 1.0);
    CHECK(c(j) == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK(c(1) == doctest::Approx(-1.130318).epsilon(1e-6));
  CHECK(c(2) == doctest::Approx(0.271495).epsilon(1e-5));
  CHECK(c(3) == doctest::Approx(-0.044337).epsilon(1e-4));
}

TEST_CASE("FFT path equals direct summation to 1e-12") {
  RngStream rng(8);
  for (int trial = 0; trial < 6; ++trial) {
    const double scale = rng.uniform(0.1, 3.0);
    const double g_max = rng.uniform(0.5, 4.0);
    auto f = [&](double x) { return heat_kernel(scale * g_max * (x + 1.0) * 0.5); };
    const int degree = 50;
    const int order = 12;
    const Eigen::VectorXd fft_path = chebyshev_interp_coeffs(f, order, degree);
    const Eigen::VectorXd direct = oracle::chebyshev_coeffs_direct(f, order, degree);
    CHECK((fft_path - direct).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("apply_poly_filter") {
  const auto lap = path3_laplacian();
  const double g_max = spectrum_bound(lap);
  Eigen::MatrixXd x(3, 2);
  x << 1, 0, 0, 1, 2, -1;

  SUBCASE("coefficients [1] give the identity") {
    Eigen::VectorXd c(1);
    c << 1.0;
    CHECK((apply_poly_filter(lap, g_max, c, x) - x).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("coefficients [0,1] give the scaled operator") {
    Eigen::VectorXd c(2);
    c << 0.0, 1.0;
    const Eigen::MatrixXd expected =
        (2.0 / g_max) * (Eigen::MatrixXd(lap) * x) - x;
    CHECK((apply_poly_filter(lap, g_max, c, x) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("dimension mismatch is an error") {
    Eigen::VectorXd c(1);
    c << 1.0;
    Eigen::MatrixXd wrong(2, 1);
    wrong << 1, 1;
    CHECK_THROWS_AS(apply_poly_filter(lap, g_max, c, wrong), std::invalid_argument);
  }

  SUBCASE("linearity") {
    RngStream rng(55);
    Eigen::VectorXd c = kernel_filter_coeffs(heat_kernel, 0.7, 8, 50, g_max);
    Eigen::MatrixXd a(3, 1), b(3, 1);
    for (int i = 0; i < 3; ++i) {
      a(i, 0) = rng.uniform(-1, 1);
      b(i, 0) = rng.uniform(-1, 1);
    }
    const Eigen::MatrixXd lhs = apply_poly_filter(lap, g_max, c, 2.0 * a + 3.0 * b);
    const Eigen::MatrixXd rhs =
        2.0 * apply_poly_filter(lap, g_max, c, a) + 3.0 * apply_poly_filter(lap, g_max, c, b);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("chebyshev filter approximates the exact wavelet") {
  RngStream rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 8 + static_cast<int>(rng.uniform_index(25));
    const Hypergraph g = oracle::random_hypergraph(rng, n, 2 * n);
    const auto lap = laplacian(g).matrix;
    const double g_max = spectrum_bound(lap);
    const ExactSpectrum spectrum = exact_spectrum(lap);
    const double scale = 2.0 / g_max;  // scale*g_max = 2, inside the stable range

    const Eigen::MatrixXd exact = exact_wavelet(spectrum, heat_kernel, scale);
    const Eigen::VectorXd coeffs = kernel_filter_coeffs(heat_kernel, scale, 20, 50, g_max);
    const Eigen::MatrixXd approx =
        apply_poly_filter(lap, g_max, coeffs, Eigen::MatrixXd::Identity(n, n));
    const double rel = (approx - exact).norm() / exact.norm();
    CHECK(rel < 1e-6);
  }
}

TEST_CASE("filtering the constant vector reproduces it") {
  // L 1 = 0, so the heat wavelet fixes the constant vector.
  RngStream rng(23);
  const Hypergraph g = oracle::random_hypergraph(rng, 12, 18);
  const auto lap = laplacian(g).matrix;
  const double g_max = spectrum_bound(lap);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(12);
  const Eigen::VectorXd coeffs = kernel_filter_coeffs(heat_kernel, 1.5 / g_max, 10, 50, g_max);
  const Eigen::MatrixXd filtered = apply_poly_filter(lap, g_max, coeffs, ones);
  CHECK((filtered - ones).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("approximation error decreases with the order") {
  RngStream rng(29);
  const Hypergraph g = oracle::random_hypergraph(rng, 16, 28);
  const auto lap = laplacian(g).matrix;
  const double g_max = spectrum_bound(lap);
  const ExactSpectrum spectrum = exact_spectrum(lap);
  const double scale = 3.0 / g_max;
  const Eigen::MatrixXd exact = exact_wavelet(spectrum, heat_kernel, scale);

  double prev = std::numeric_limits<double>::infinity();
  for (int order = 1; order <= 12; ++order) {
    const Eigen::VectorXd coeffs = kernel_filter_coeffs(heat_kernel, scale, order, 50, g_max);
    const Eigen::MatrixXd approx =
        apply_poly_filter(lap, g_max, coeffs, Eigen::MatrixXd::Identity(16, 16));
    const double rel = (approx - exact).norm() / exact.norm();
    CHECK(rel <= prev);
    prev = rel;
  }
}

TEST_CASE("exact wavelet basics") {
  const auto lap = path3_laplacian();
  const ExactSpectrum spectrum = exact_spectrum(lap);

  SUBCASE("orthonormal eigenvectors reconstruct the operator") {
    const Eigen::MatrixXd u = spectrum.eigenvectors;
    CHECK((u * u.transpose() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
    const Eigen::MatrixXd rebuilt =
        u * spectrum.eigenvalues.asDiagonal() * u.transpose();
    CHECK((rebuilt - Eigen::MatrixXd(lap)).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("scale zero is the identity") {
    const Eigen::MatrixXd psi = exact_wavelet(spectrum, heat_kernel, 0.0);
    CHECK((psi - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("forward times inverse is the identity") {
    const Eigen::MatrixXd fwd = exact_wavelet(spectrum, heat_kernel, 1.0);
    const Eigen::MatrixXd inv = exact_wavelet(spectrum, heat_kernel_inverse, 1.0);
    CHECK((fwd * inv - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("matches hand-assembled diagonal kernel") {
    Eigen::VectorXd diag(3);
    for (int i = 0; i < 3; ++i) diag(i) = std::exp(-spectrum.eigenvalues(i));
    const Eigen::MatrixXd expected =
        spectrum.eigenvectors * diag.asDiagonal() * spectrum.eigenvectors.transpose();
    CHECK((exact_wavelet(spectrum, heat_kernel, 1.0) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("oracle cap is enforced") {
    Eigen::SparseMatrix<double> big(300, 300);
    CHECK_THROWS_AS(exact_spectrum(big, 256), std::invalid_argument);
  }
}

TEST_CASE("filter bank") {
  const auto lap = path3_laplacian();

  SUBCASE("single scale grid degenerates to 1/g_max") {
    const WaveletFilterBank bank = build_filter_bank(lap, 1, 3, 50);
    REQUIRE(bank.scales.size() == 1);
    CHECK(bank.scales[0] == doctest::Approx(1.0 / bank.g_max));
  }

  SUBCASE("grid is strictly increasing") {
    const WaveletFilterBank bank = build_filter_bank(lap, 4, 3, 50);
    REQUIRE(bank.scales.size() == 4);
    for (std::size_t s = 1; s < bank.scales.size(); ++s) {
      CHECK(bank.scales[s] > bank.scales[s - 1]);
    }
    CHECK(bank.scales.front() == doctest::Approx(1.0 / bank.g_max));
  }

  SUBCASE("forward/inverse composition stays accurate at order 20") {
    RngStream rng(41);
    for (int trial = 0; trial < 4; ++trial) {
      const int n = 6 + static_cast<int>(rng.uniform_index(20));
      const Hypergraph g = oracle::random_hypergraph(rng, n, 2 * n);
      const auto glap = laplacian(g).matrix;
      const WaveletFilterBank bank = build_filter_bank(glap, 4, 20, 50);
      Eigen::MatrixXd x(n, 1);
      for (int i = 0; i < n; ++i) x(i, 0) = rng.uniform(-1, 1);
      for (int s = 0; s < bank.n_scales(); ++s) {
        const Eigen::MatrixXd roundtrip = apply_poly_filter(
            glap, bank.g_max, bank.forward_coeffs[static_cast<std::size_t>(s)],
            apply_poly_filter(glap, bank.g_max, bank.inverse_coeffs[static_cast<std::size_t>(s)],
                              x));
        CHECK((roundtrip - x).norm() / x.norm() < 1e-3);
      }
    }
  }
}
