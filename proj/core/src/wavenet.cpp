#include "driftrec/wavenet.hpp"

#include "driftrec/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace driftrec {

GraphWaveletOperator GraphWaveletOperator::chebyshev(const Eigen::SparseMatrix<double>* laplacian,
                                                     const WaveletFilterBank* bank) {
  GraphWaveletOperator op;
  op.laplacian_ = laplacian;
  op.bank_ = bank;
  return op;
}

GraphWaveletOperator GraphWaveletOperator::exact(const ExactSpectrum& spectrum,
                                                 const std::vector<double>& scales) {
  GraphWaveletOperator op;
  for (double scale : scales) {
    op.exact_forward_.push_back(exact_wavelet(spectrum, heat_kernel, scale));
    op.exact_inverse_.push_back(exact_wavelet(spectrum, heat_kernel_inverse, scale));
  }
  return op;
}

int GraphWaveletOperator::n_scales() const {
  if (bank_) return bank_->n_scales();
  return static_cast<int>(exact_forward_.size());
}

Eigen::MatrixXd GraphWaveletOperator::apply_forward(int scale_index,
                                                    const Eigen::MatrixXd& x) const {
  if (bank_) {
    return apply_poly_filter(*laplacian_, bank_->g_max, bank_->forward_coeffs[scale_index], x);
  }
  return exact_forward_[scale_index] * x;
}

Eigen::MatrixXd GraphWaveletOperator::apply_inverse(int scale_index,
                                                    const Eigen::MatrixXd& x) const {
  if (bank_) {
    return apply_poly_filter(*laplacian_, bank_->g_max, bank_->inverse_coeffs[scale_index], x);
  }
  return exact_inverse_[scale_index] * x;
}

WaveConvParams waveconv_init(int n_nodes, int n_scales, int d_in, int d_out, std::uint64_t seed) {
  RngStream rng(seed);
  WaveConvParams params;
  // Spectral diagonals start near 1 so the layer opens as (approximately) the
  // identity transport followed by the channel mixer.
  params.spectral_diag.resize(n_nodes, n_scales);
  for (int s = 0; s < n_scales; ++s) {
    for (int i = 0; i < n_nodes; ++i) params.spectral_diag(i, s) = 1.0 + rng.normal(0.0, 0.01);
  }
  const double bound = std::sqrt(6.0 / (d_in + d_out));
  params.channel_mix.resize(d_in, d_out);
  for (int i = 0; i < d_in; ++i) {
    for (int j = 0; j < d_out; ++j) params.channel_mix(i, j) = rng.uniform(-bound, bound);
  }
  return params;
}

namespace {

void check_finite(const WaveConvParams& params) {
  if (!params.channel_mix.allFinite()) {
    throw std::invalid_argument("waveconv: non-finite channel mixer");
  }
  if (!params.spectral_diag.allFinite()) {
    throw std::invalid_argument("waveconv: non-finite spectral diagonal");
  }
}

}  // namespace

Eigen::MatrixXd waveconv_forward(const GraphWaveletOperator& op, const WaveConvParams& params,
                                 const Eigen::MatrixXd& x, Activation act, WaveConvCache* cache) {
  check_finite(params);
  const int n_scales = op.n_scales();
  if (params.spectral_diag.cols() != n_scales) {
    throw std::invalid_argument("waveconv_forward: scale count mismatch");
  }

  Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  std::vector<Eigen::MatrixXd> transformed, gated;
  for (int s = 0; s < n_scales; ++s) {
    Eigen::MatrixXd a = op.apply_inverse(s, x);
    Eigen::MatrixXd b = params.spectral_diag.col(s).asDiagonal() * a;
    mixed += op.apply_forward(s, b);
    if (cache) {
      transformed.push_back(std::move(a));
      gated.push_back(std::move(b));
    }
  }
  mixed /= static_cast<double>(n_scales);

  Eigen::MatrixXd pre = mixed * params.channel_mix;
  Eigen::MatrixXd out = act == Activation::relu ? pre.cwiseMax(0.0).eval() : pre;
  if (cache) {
    cache->input = x;
    cache->transformed = std::move(transformed);
    cache->gated = std::move(gated);
    cache->mixed = std::move(mixed);
    cache->preactivation = std::move(pre);
  }
  return out;
}

WaveConvGrads waveconv_backward(const GraphWaveletOperator& op, const WaveConvParams& params,
                                const WaveConvCache& cache, Activation act,
                                const Eigen::MatrixXd& grad_out) {
  const int n_scales = op.n_scales();
  if (cache.transformed.size() != static_cast<std::size_t>(n_scales)) {
    throw std::invalid_argument("waveconv_backward: cache does not match operator");
  }
  if (grad_out.rows() != cache.preactivation.rows() ||
      grad_out.cols() != cache.preactivation.cols()) {
    throw std::invalid_argument("waveconv_backward: gradient shape mismatch");
  }

  Eigen::MatrixXd grad_pre = grad_out;
  if (act == Activation::relu) {
    grad_pre = (cache.preactivation.array() > 0.0).select(grad_out, 0.0);
  }

  WaveConvGrads grads;
  grads.channel_mix = cache.mixed.transpose() * grad_pre;
  Eigen::MatrixXd grad_mixed = grad_pre * params.channel_mix.transpose();
  grad_mixed /= static_cast<double>(n_scales);

  grads.input = Eigen::MatrixXd::Zero(cache.input.rows(), cache.input.cols());
  grads.spectral_diag = Eigen::MatrixXd::Zero(params.spectral_diag.rows(), n_scales);
  for (int s = 0; s < n_scales; ++s) {
    // adjoint of the forward filter is the filter itself (symmetric operator)
    Eigen::MatrixXd grad_gated = op.apply_forward(s, grad_mixed);
    grads.spectral_diag.col(s) =
        (grad_gated.array() * cache.transformed[s].array()).rowwise().sum();
    Eigen::MatrixXd grad_transformed = params.spectral_diag.col(s).asDiagonal() * grad_gated;
    grads.input += op.apply_inverse(s, grad_transformed);
  }
  return grads;
}

}  // namespace driftrec
