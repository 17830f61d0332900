#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace driftrec {

// Session RNN with tanh recurrence:
//   O_t = tanh(W_in Emb_t + W_rec O_{t-1}),  O_0 = 0
//   Y_t = tanh(W_out O_t)
// Only the final Y_T is consumed downstream.
struct RnnParams {
  Eigen::MatrixXd w_out;  // [d x d]
  Eigen::MatrixXd w_in;   // [d x d_emb]
  Eigen::MatrixXd w_rec;  // [d x d]
};

RnnParams rnn_init(int dim, int emb_dim, std::uint64_t seed);

struct RnnCache {
  std::vector<Eigen::MatrixXd> inputs;   // per step [B x d_emb]
  std::vector<Eigen::MatrixXd> hidden;   // O_t per step [B x d]
  Eigen::MatrixXd y_last;                // [B x d]
};

// Batched over B sequences of equal length; step matrices are [B x d_emb].
Eigen::MatrixXd rnn_forward(const RnnParams& params,
                            const std::vector<Eigen::MatrixXd>& emb_steps,
                            RnnCache* cache = nullptr);

struct RnnGrads {
  Eigen::MatrixXd w_out, w_in, w_rec;
  std::vector<Eigen::MatrixXd> inputs;  // gradient wrt each Emb_t
};

RnnGrads rnn_backward(const RnnParams& params, const RnnCache& cache,
                      const Eigen::MatrixXd& grad_y_last);

// Position-class head: sigmoid(W [Y_T ; X_sel] + b), one row per sample.
struct FusionHead {
  Eigen::MatrixXd weight;  // [M x 2d]
  Eigen::VectorXd bias;    // [M]
};

FusionHead fusion_init(int n_labels, int dim, std::uint64_t seed);

Eigen::MatrixXd fuse(const FusionHead& head, const Eigen::MatrixXd& y_t,
                     const Eigen::MatrixXd& x_rows);

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& scores);

// Mean negative log-likelihood of one-hot targets under row distributions;
// probabilities are floored at 1e-12 inside the log.
double nll_loss(const Eigen::MatrixXd& probs, const std::vector<int>& targets);

// --- Adam ---

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step = 0;
  std::map<std::string, Eigen::ArrayXXd> m;
  std::map<std::string, Eigen::ArrayXXd> v;
};

// Named view over the model's parameter tensors so the optimizer, the
// checkpoint writer and the gradient checker all traverse the same registry.
// Tensors are viewed in place; the registry must be rebuilt if any tensor is
// reallocated.
struct ParamRegistry {
  using TensorView = Eigen::Map<Eigen::MatrixXd>;
  std::vector<std::pair<std::string, TensorView>> entries;

  void add(const std::string& name, Eigen::MatrixXd& tensor) {
    entries.emplace_back(name, TensorView(tensor.data(), tensor.rows(), tensor.cols()));
  }
  void add(const std::string& name, Eigen::VectorXd& tensor) {
    entries.emplace_back(name, TensorView(tensor.data(), tensor.size(), 1));
  }
  TensorView* find(const std::string& name);
};

// Bias-corrected Adam over every registered tensor. A non-finite gradient is
// an error naming the offending tensor. Gradients may omit tensors; omitted
// ones are treated as zero-gradient.
void adam_step(ParamRegistry& params,
               const std::map<std::string, Eigen::MatrixXd>& grads, AdamState& state);

}  // namespace driftrec
