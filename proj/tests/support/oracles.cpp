#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace driftrec::testing {

double bessel_i(int order, double x) {
  const double half = x / 2.0;
  double term = 1.0;
  for (int i = 1; i <= order; ++i) term *= half / i;  // (x/2)^order / order!
  double sum = term;
  const double quarter_sq = half * half;
  for (int m = 1; m < 200; ++m) {
    term *= quarter_sq / (m * (m + order));
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

Eigen::VectorXd chebyshev_coeffs_direct(const std::function<double(double)>& f, int order,
                                        int degree) {
  const int n_points = degree + 1;
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(order + 1);
  for (int j = 0; j <= order; ++j) {
    double sum = 0;
    for (int k = 0; k < n_points; ++k) {
      const double theta = (2.0 * k + 1.0) * M_PI / (2.0 * n_points);
      sum += f(std::cos(theta)) * std::cos(j * theta);  // T_j(cos t) = cos(j t)
    }
    coeffs(j) = 2.0 * sum / n_points;
  }
  coeffs(0) *= 0.5;
  return coeffs;
}

DensePlsa plsa_reference_cycle(const DensePlsa& model, const Eigen::MatrixXd& counts) {
  const auto D = counts.rows();
  const auto V = counts.cols();
  const auto K = model.word_given_topic.rows();
  constexpr double floor = 1e-12;

  DensePlsa next;
  next.word_given_topic = Eigen::MatrixXd::Zero(K, V);
  next.topic_given_doc = Eigen::MatrixXd::Zero(D, K);
  for (Eigen::Index d = 0; d < D; ++d) {
    for (Eigen::Index w = 0; w < V; ++w) {
      if (counts(d, w) <= 0) continue;
      Eigen::VectorXd post(K);
      for (Eigen::Index z = 0; z < K; ++z) {
        post(z) = model.word_given_topic(z, w) * model.topic_given_doc(d, z);
      }
      const double denom = post.sum();
      if (denom < floor) {
        post.setConstant(1.0 / static_cast<double>(K));
      } else {
        post /= denom;
      }
      for (Eigen::Index z = 0; z < K; ++z) {
        next.word_given_topic(z, w) += counts(d, w) * post(z);
        next.topic_given_doc(d, z) += counts(d, w) * post(z);
      }
    }
  }
  for (Eigen::Index z = 0; z < K; ++z) {
    const double s = next.word_given_topic.row(z).sum();
    if (s < floor) {
      next.word_given_topic.row(z).setConstant(1.0 / static_cast<double>(V));
    } else {
      next.word_given_topic.row(z) /= s;
    }
  }
  for (Eigen::Index d = 0; d < D; ++d) {
    const double s = next.topic_given_doc.row(d).sum();
    if (s < floor) {
      next.topic_given_doc.row(d).setConstant(1.0 / static_cast<double>(K));
    } else {
      next.topic_given_doc.row(d) /= s;
    }
  }
  return next;
}

double plsa_reference_log_likelihood(const DensePlsa& model, const Eigen::MatrixXd& counts) {
  const double total = counts.sum();
  double ll = 0;
  for (Eigen::Index d = 0; d < counts.rows(); ++d) {
    const double p_doc = total > 0 ? counts.row(d).sum() / total : 1.0;
    for (Eigen::Index w = 0; w < counts.cols(); ++w) {
      if (counts(d, w) <= 0) continue;
      double mix = 0;
      for (Eigen::Index z = 0; z < model.word_given_topic.rows(); ++z) {
        mix += model.word_given_topic(z, w) * model.topic_given_doc(d, z);
      }
      ll += counts(d, w) * std::log(std::max(p_doc * mix, 1e-12));
    }
  }
  return ll;
}

Hypergraph random_hypergraph(RngStream& rng, int n_nodes, int n_edges, int max_edge_size) {
  Hypergraph g;
  g.n_nodes = n_nodes;
  for (int e = 0; e < n_edges; ++e) {
    const int size = 2 + static_cast<int>(rng.uniform_index(
                             static_cast<std::size_t>(std::max(1, max_edge_size - 1))));
    std::vector<int> nodes;
    for (int i = 0; i < size; ++i) {
      nodes.push_back(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_nodes))));
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    if (nodes.size() < 2) {
      --e;
      continue;
    }
    g.add_edge(std::move(nodes), e % 2 == 0 ? HyperedgeKind::session : HyperedgeKind::transition);
  }
  return g;
}

Blobs gaussian_blobs(RngStream& rng, int per_cluster,
                     const std::vector<Eigen::Vector2d>& centers, double stddev) {
  Blobs blobs;
  const auto total = static_cast<Eigen::Index>(per_cluster * centers.size());
  blobs.points.resize(total, 2);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (int i = 0; i < per_cluster; ++i) {
      blobs.points(row, 0) = centers[c].x() + rng.normal(0, stddev);
      blobs.points(row, 1) = centers[c].y() + rng.normal(0, stddev);
      blobs.labels.push_back(static_cast<int>(c));
      ++row;
    }
  }
  return blobs;
}

double best_label_agreement(const std::vector<int>& got, const std::vector<int>& truth, int k) {
  if (got.size() != truth.size()) throw std::invalid_argument("label size mismatch");
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0;
  do {
    std::size_t agree = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (perm[static_cast<std::size_t>(got[i])] == truth[i]) ++agree;
    }
    best = std::max(best, static_cast<double>(agree) / static_cast<double>(got.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace driftrec::testing
