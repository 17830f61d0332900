#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <vector>

namespace driftrec {

// Heat kernel g(x) = exp(-x); its inverse under pointwise product is g(-x).
inline double heat_kernel(double x) { return std::exp(-x); }
inline double heat_kernel_inverse(double x) { return std::exp(x); }

struct ExactSpectrum {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns
};

// Dense eigendecomposition, test/oracle path only: refuses n above the cap.
ExactSpectrum exact_spectrum(const Eigen::SparseMatrix<double>& laplacian, int oracle_cap = 256);

// U diag(kernel(scale * lambda_i)) U^T.
Eigen::MatrixXd exact_wavelet(const ExactSpectrum& spectrum,
                              const std::function<double(double)>& kernel, double scale);

// Power-iteration estimate of lambda_max times a 1.01 safety factor.
// A zero operator yields 1.0 so downstream spectrum mappings stay defined.
double spectrum_bound(const Eigen::SparseMatrix<double>& laplacian, int iters = 100);

// Coefficients of the degree-n Chebyshev interpolant of f on [-1, 1] through
// the Chebyshev points of the first kind, computed with a type-II DCT.
// The constant term comes back already halved (primed-sum convention), so
// evaluation is a plain sum over c[j] * T_j. Returns c[0..order].
Eigen::VectorXd chebyshev_interp_coeffs(const std::function<double(double)>& f, int order,
                                        int degree);

// Same, for a kernel on the spectral interval [0, g_max] at a given scale:
// the interpolated function is x -> kernel(scale * g_max * (x+1)/2).
Eigen::VectorXd kernel_filter_coeffs(const std::function<double(double)>& kernel, double scale,
                                     int order, int degree, double g_max);

// y = sum_j c[j] T_j(Lt) x with Lt = (2/g_max) L - I, via the three-term
// recurrence; cost O(order * nnz(L) * cols(x)).
Eigen::MatrixXd apply_poly_filter(const Eigen::SparseMatrix<double>& laplacian, double g_max,
                                  const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& x);

struct WaveletFilterBank {
  double g_max = 1.0;  // spectral upper bound used for the [-1,1] pullback
  int cheb_order = 3;
  int interp_degree = 50;
  std::vector<double> scales;  // strictly increasing
  std::vector<Eigen::VectorXd> forward_coeffs;
  std::vector<Eigen::VectorXd> inverse_coeffs;

  int n_scales() const { return static_cast<int>(scales.size()); }
};

// Heat-kernel bank on a geometric scale grid. The grid starts at 1/g_max and
// ends at min(2/lambda_min_pos, 10/g_max); the second term keeps the inverse
// kernel exp(+scale*lambda) polynomially approximable. lambda_min_pos is read
// off a dense eigendecomposition when the graph is small enough, otherwise
// only the stability cap applies.
WaveletFilterBank build_filter_bank(const Eigen::SparseMatrix<double>& laplacian,
                                    int scales_count, int cheb_order, int interp_degree,
                                    int oracle_cap = 256);

}  // namespace driftrec
