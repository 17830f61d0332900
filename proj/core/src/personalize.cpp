#include "driftrec/personalize.hpp"

#include "driftrec/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace driftrec {

namespace {

Eigen::MatrixXd glorot(int rows, int cols, RngStream& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

RnnParams rnn_init(int dim, int emb_dim, std::uint64_t seed) {
  RngStream rng(seed);
  RnnParams p;
  p.w_out = glorot(dim, dim, rng);
  p.w_in = glorot(dim, emb_dim, rng);
  p.w_rec = glorot(dim, dim, rng);
  return p;
}

Eigen::MatrixXd rnn_forward(const RnnParams& params, const std::vector<Eigen::MatrixXd>& emb_steps,
                            RnnCache* cache) {
  if (emb_steps.empty()) throw std::invalid_argument("rnn_forward: need at least one step");
  const Eigen::Index batch = emb_steps.front().rows();
  const Eigen::Index dim = params.w_rec.rows();

  Eigen::MatrixXd o = Eigen::MatrixXd::Zero(batch, dim);
  if (cache) {
    cache->inputs.clear();
    cache->hidden.clear();
  }
  for (const auto& emb : emb_steps) {
    // row-major batch: O_t = tanh(Emb W_in^T + O_{t-1} W_rec^T)
    o = (emb * params.w_in.transpose() + o * params.w_rec.transpose()).array().tanh();
    if (cache) {
      cache->inputs.push_back(emb);
      cache->hidden.push_back(o);
    }
  }
  Eigen::MatrixXd y = (o * params.w_out.transpose()).array().tanh();
  if (cache) cache->y_last = y;
  return y;
}

RnnGrads rnn_backward(const RnnParams& params, const RnnCache& cache,
                      const Eigen::MatrixXd& grad_y_last) {
  const auto steps = cache.hidden.size();
  if (steps == 0) throw std::invalid_argument("rnn_backward: empty cache");

  RnnGrads grads;
  grads.w_out = Eigen::MatrixXd::Zero(params.w_out.rows(), params.w_out.cols());
  grads.w_in = Eigen::MatrixXd::Zero(params.w_in.rows(), params.w_in.cols());
  grads.w_rec = Eigen::MatrixXd::Zero(params.w_rec.rows(), params.w_rec.cols());
  grads.inputs.resize(steps);

  // y = tanh(O_T W_out^T)
  Eigen::MatrixXd delta_y = grad_y_last.array() * (1.0 - cache.y_last.array().square());
  grads.w_out = delta_y.transpose() * cache.hidden.back();
  Eigen::MatrixXd grad_o = delta_y * params.w_out;

  for (std::size_t t = steps; t-- > 0;) {
    const Eigen::MatrixXd delta =
        (grad_o.array() * (1.0 - cache.hidden[t].array().square())).matrix();
    grads.w_in.noalias() += delta.transpose() * cache.inputs[t];
    if (t > 0) {
      grads.w_rec.noalias() += delta.transpose() * cache.hidden[t - 1];
      grad_o = delta * params.w_rec;
    }
    grads.inputs[t] = delta * params.w_in;
  }
  return grads;
}

FusionHead fusion_init(int n_labels, int dim, std::uint64_t seed) {
  RngStream rng(seed);
  FusionHead head;
  head.weight = glorot(n_labels, 2 * dim, rng);
  head.bias = Eigen::VectorXd::Zero(n_labels);
  return head;
}

Eigen::MatrixXd fuse(const FusionHead& head, const Eigen::MatrixXd& y_t,
                     const Eigen::MatrixXd& x_rows) {
  if (y_t.rows() != x_rows.rows()) throw std::invalid_argument("fuse: batch size mismatch");
  if (y_t.cols() + x_rows.cols() != head.weight.cols()) {
    throw std::invalid_argument("fuse: concat dimension mismatch");
  }
  Eigen::MatrixXd concat(y_t.rows(), y_t.cols() + x_rows.cols());
  concat << y_t, x_rows;
  Eigen::MatrixXd z = concat * head.weight.transpose();
  z.rowwise() += head.bias.transpose();
  return ((-z.array()).exp() + 1.0).inverse();
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double mx = scores.row(r).maxCoeff();
    Eigen::ArrayXd e = (scores.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

double nll_loss(const Eigen::MatrixXd& probs, const std::vector<int>& targets) {
  if (probs.rows() != static_cast<Eigen::Index>(targets.size())) {
    throw std::invalid_argument("nll_loss: target count mismatch");
  }
  if (probs.rows() == 0) throw std::invalid_argument("nll_loss: empty batch");
  double loss = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= probs.cols()) throw std::invalid_argument("nll_loss: target out of range");
    loss -= std::log(std::max(probs(r, t), 1e-12));
  }
  return loss / static_cast<double>(probs.rows());
}

ParamRegistry::TensorView* ParamRegistry::find(const std::string& name) {
  for (auto& [n, t] : entries) {
    if (n == name) return &t;
  }
  return nullptr;
}

void adam_step(ParamRegistry& params, const std::map<std::string, Eigen::MatrixXd>& grads,
               AdamState& state) {
  ++state.step;
  const auto& cfg = state.config;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (auto& [name, tensor] : params.entries) {
    Eigen::ArrayXXd grad = Eigen::ArrayXXd::Zero(tensor.rows(), tensor.cols());
    auto found = grads.find(name);
    if (found != grads.end()) {
      if (!found->second.allFinite()) {
        throw std::runtime_error("adam_step: non-finite gradient for tensor " + name);
      }
      if (found->second.size() != tensor.size()) {
        throw std::invalid_argument("adam_step: gradient shape mismatch for tensor " + name);
      }
      grad = Eigen::Map<const Eigen::ArrayXXd>(found->second.data(), tensor.rows(), tensor.cols());
    }
    auto m_it = state.m.find(name);
    if (m_it == state.m.end()) {
      m_it = state.m.emplace(name, Eigen::ArrayXXd::Zero(tensor.rows(), tensor.cols())).first;
      state.v.emplace(name, Eigen::ArrayXXd::Zero(tensor.rows(), tensor.cols()));
    }
    auto& m = m_it->second;
    auto& v = state.v.at(name);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.square();
    const Eigen::ArrayXXd m_hat = m / bc1;
    const Eigen::ArrayXXd v_hat = v / bc2;
    tensor.array() -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
  }
}

}  // namespace driftrec
