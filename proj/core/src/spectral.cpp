#include "driftrec/spectral.hpp"

#include "driftrec/rng.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace driftrec {

ExactSpectrum exact_spectrum(const Eigen::SparseMatrix<double>& laplacian, int oracle_cap) {
  if (laplacian.rows() != laplacian.cols()) {
    throw std::invalid_argument("exact_spectrum: matrix not square");
  }
  if (laplacian.rows() > oracle_cap) {
    throw std::invalid_argument("exact_spectrum: size exceeds oracle cap");
  }
  Eigen::MatrixXd dense(laplacian);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("exact_spectrum: eigendecomposition failed");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Eigen::MatrixXd exact_wavelet(const ExactSpectrum& spectrum,
                              const std::function<double(double)>& kernel, double scale) {
  Eigen::VectorXd diag(spectrum.eigenvalues.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    diag(i) = kernel(scale * spectrum.eigenvalues(i));
  }
  return spectrum.eigenvectors * diag.asDiagonal() * spectrum.eigenvectors.transpose();
}

double spectrum_bound(const Eigen::SparseMatrix<double>& laplacian, int iters) {
  const Eigen::Index n = laplacian.rows();
  if (n == 0) return 1.0;
  // Fixed pseudo-random start: the all-ones vector sits in the nullspace of a
  // Laplacian, so it must not be the seed direction.
  RngStream rng(0x5eedULL);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
  double norm = v.norm();
  if (norm == 0) return 1.0;
  v /= norm;

  double lambda = 0;
  for (int i = 0; i < iters; ++i) {
    Eigen::VectorXd w = laplacian * v;
    const double wnorm = w.norm();
    if (wnorm < 1e-300) return 1.0;  // (numerically) zero operator
    lambda = v.dot(w);
    v = w / wnorm;
  }
  if (lambda <= 0) return 1.0;
  return lambda * 1.01;
}

namespace {

// One cached DCT-II plan per transform size. FFTW plan creation is not
// re-entrant, and executing through cached aligned buffers keeps the repeated
// small transforms used by the filter bank cheap.
class DctPlanCache {
 public:
  static DctPlanCache& instance() {
    static DctPlanCache cache;
    return cache;
  }

  // out[j] = 2 sum_k in[k] cos(pi (k + 1/2) j / n)
  void execute(std::vector<double>& data) {
    std::lock_guard<std::mutex> lock(mutex_);
    const int n = static_cast<int>(data.size());
    auto& entry = plans_[n];
    if (entry.plan == nullptr) {
      entry.in = fftw_alloc_real(static_cast<std::size_t>(n));
      entry.out = fftw_alloc_real(static_cast<std::size_t>(n));
      entry.plan = fftw_plan_r2r_1d(n, entry.in, entry.out, FFTW_REDFT10, FFTW_ESTIMATE);
      if (entry.plan == nullptr) throw std::runtime_error("fftw: failed to plan DCT-II");
    }
    std::copy(data.begin(), data.end(), entry.in);
    fftw_execute(entry.plan);
    std::copy(entry.out, entry.out + n, data.begin());
  }

 private:
  struct Entry {
    fftw_plan plan = nullptr;
    double* in = nullptr;
    double* out = nullptr;
  };
  std::mutex mutex_;
  std::map<int, Entry> plans_;
};

}  // namespace

Eigen::VectorXd chebyshev_interp_coeffs(const std::function<double(double)>& f, int order,
                                        int degree) {
  if (order < 0) throw std::invalid_argument("chebyshev_interp_coeffs: order must be >= 0");
  if (order > degree) {
    throw std::invalid_argument("chebyshev_interp_coeffs: order exceeds interpolation degree");
  }
  const int n_points = degree + 1;
  std::vector<double> samples(static_cast<std::size_t>(n_points));
  for (int k = 0; k < n_points; ++k) {
    const double y = std::cos((2.0 * k + 1.0) * M_PI / (2.0 * n_points));
    samples[static_cast<std::size_t>(k)] = f(y);
  }
  // The DCT-II of the samples is exactly sum_k f(y_k) T_j(y_k), times 2.
  DctPlanCache::instance().execute(samples);
  Eigen::VectorXd coeffs(order + 1);
  for (int j = 0; j <= order; ++j) {
    coeffs(j) = samples[static_cast<std::size_t>(j)] / n_points;
  }
  coeffs(0) *= 0.5;  // primed sum: first term halved
  return coeffs;
}

Eigen::VectorXd kernel_filter_coeffs(const std::function<double(double)>& kernel, double scale,
                                     int order, int degree, double g_max) {
  return chebyshev_interp_coeffs(
      [&](double x) { return kernel(scale * g_max * (x + 1.0) * 0.5); }, order, degree);
}

Eigen::MatrixXd apply_poly_filter(const Eigen::SparseMatrix<double>& laplacian, double g_max,
                                  const Eigen::VectorXd& coeffs, const Eigen::MatrixXd& x) {
  if (laplacian.rows() != x.rows()) {
    throw std::invalid_argument("apply_poly_filter: dimension mismatch");
  }
  if (coeffs.size() == 0) throw std::invalid_argument("apply_poly_filter: empty coefficients");
  if (!coeffs.allFinite()) throw std::invalid_argument("apply_poly_filter: non-finite coefficients");

  const double alpha = 2.0 / g_max;
  auto scaled_apply = [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
    return alpha * (laplacian * v) - v;
  };

  Eigen::MatrixXd t_prev = x;  // T_0 x
  Eigen::MatrixXd y = coeffs(0) * t_prev;
  if (coeffs.size() == 1) return y;

  Eigen::MatrixXd t_cur = scaled_apply(x);  // T_1 x
  y.noalias() += coeffs(1) * t_cur;
  for (Eigen::Index j = 2; j < coeffs.size(); ++j) {
    Eigen::MatrixXd t_next = 2.0 * scaled_apply(t_cur) - t_prev;
    y.noalias() += coeffs(j) * t_next;
    t_prev = std::move(t_cur);
    t_cur = std::move(t_next);
  }
  return y;
}

WaveletFilterBank build_filter_bank(const Eigen::SparseMatrix<double>& laplacian,
                                    int scales_count, int cheb_order, int interp_degree,
                                    int oracle_cap) {
  if (scales_count < 1) throw std::invalid_argument("build_filter_bank: scales_count must be >= 1");
  if (cheb_order < 1) throw std::invalid_argument("build_filter_bank: order must be >= 1");

  WaveletFilterBank bank;
  bank.g_max = spectrum_bound(laplacian);
  bank.cheb_order = cheb_order;
  bank.interp_degree = interp_degree;

  const double scale_min = 1.0 / bank.g_max;
  // Stability cap: beyond scale*g_max ~ 10 the inverse kernel exp(+scale*x)
  // stops being approximable at the orders used here.
  double scale_max = 10.0 / bank.g_max;
  if (laplacian.rows() > 0 && laplacian.rows() <= oracle_cap) {
    const ExactSpectrum spectrum = exact_spectrum(laplacian, oracle_cap);
    const double tol = 1e-8 * std::max(1.0, bank.g_max);
    for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i) {
      if (spectrum.eigenvalues(i) > tol) {
        scale_max = std::min(scale_max, 2.0 / spectrum.eigenvalues(i));
        break;
      }
    }
  }
  scale_max = std::max(scale_max, scale_min);

  for (int s = 0; s < scales_count; ++s) {
    const double t = scales_count == 1 ? 0.0 : static_cast<double>(s) / (scales_count - 1);
    bank.scales.push_back(scale_min * std::pow(scale_max / scale_min, t));
  }
  for (double scale : bank.scales) {
    bank.forward_coeffs.push_back(
        kernel_filter_coeffs(heat_kernel, scale, cheb_order, interp_degree, bank.g_max));
    bank.inverse_coeffs.push_back(
        kernel_filter_coeffs(heat_kernel_inverse, scale, cheb_order, interp_degree, bank.g_max));
  }
  return bank;
}

}  // namespace driftrec
