#pragma once

#include "driftrec/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <vector>

namespace driftrec {

enum class Activation { relu, identity };

// Applies the per-scale forward/inverse wavelet filters to node-feature
// matrices. Chebyshev mode runs the sparse polynomial recurrence; exact mode
// uses dense kernel matrices from the eigendecomposition oracle and exists
// for tests and small-graph verification.
class GraphWaveletOperator {
 public:
  static GraphWaveletOperator chebyshev(const Eigen::SparseMatrix<double>* laplacian,
                                        const WaveletFilterBank* bank);
  static GraphWaveletOperator exact(const ExactSpectrum& spectrum,
                                    const std::vector<double>& scales);

  int n_scales() const;
  Eigen::MatrixXd apply_forward(int scale_index, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd apply_inverse(int scale_index, const Eigen::MatrixXd& x) const;

 private:
  const Eigen::SparseMatrix<double>* laplacian_ = nullptr;
  const WaveletFilterBank* bank_ = nullptr;
  std::vector<Eigen::MatrixXd> exact_forward_;
  std::vector<Eigen::MatrixXd> exact_inverse_;
};

// Learnable pieces of one wavelet convolution layer: a spectral diagonal per
// scale (shared across channel pairs) and a dense channel mixer.
struct WaveConvParams {
  Eigen::MatrixXd channel_mix;    // [d_in x d_out]
  Eigen::MatrixXd spectral_diag;  // [n_nodes x n_scales], column s gates scale s
};

WaveConvParams waveconv_init(int n_nodes, int n_scales, int d_in, int d_out, std::uint64_t seed);

struct WaveConvCache {
  Eigen::MatrixXd input;                      // X
  std::vector<Eigen::MatrixXd> transformed;   // A_s = P(psi_s^-1) X
  std::vector<Eigen::MatrixXd> gated;         // B_s = diag(g_s) A_s
  Eigen::MatrixXd mixed;                      // (1/S) sum_s P(psi_s) B_s
  Eigen::MatrixXd preactivation;              // mixed * channel_mix
};

// X_out = act( (1/S) sum_s P(psi_s) diag(g_s) P(psi_s^-1) X  *  W ).
Eigen::MatrixXd waveconv_forward(const GraphWaveletOperator& op, const WaveConvParams& params,
                                 const Eigen::MatrixXd& x, Activation act,
                                 WaveConvCache* cache = nullptr);

struct WaveConvGrads {
  Eigen::MatrixXd channel_mix;
  Eigen::MatrixXd spectral_diag;  // [n_nodes x n_scales]
  Eigen::MatrixXd input;
};

// Exact reverse-mode gradients. The filters are symmetric polynomials in the
// Laplacian, so the adjoint of each filter application is itself.
WaveConvGrads waveconv_backward(const GraphWaveletOperator& op, const WaveConvParams& params,
                                const WaveConvCache& cache, Activation act,
                                const Eigen::MatrixXd& grad_out);

}  // namespace driftrec
