#pragma once

// Independent reference implementations used only by tests. Everything here
// is a straight transcription of the defining formulas, kept deliberately
// separate from the library's optimized paths.

#include "driftrec/hypergraph.hpp"
#include "driftrec/personalize.hpp"
#include "driftrec/rng.hpp"
#include "driftrec/topics.hpp"

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace driftrec::testing {

// Modified Bessel function of the first kind, by series summation.
double bessel_i(int order, double x);

// Boyd interpolation coefficients by direct O(n*p) summation; constant term
// halved, matching the library's primed-sum convention.
Eigen::VectorXd chebyshev_coeffs_direct(const std::function<double(double)>& f, int order,
                                        int degree);

// Dense transcription of one pLSA E step / M step / log-likelihood.
struct DensePlsa {
  Eigen::MatrixXd word_given_topic;  // [K x V]
  Eigen::MatrixXd topic_given_doc;   // [D x K]
};

DensePlsa plsa_reference_cycle(const DensePlsa& model, const Eigen::MatrixXd& counts);
double plsa_reference_log_likelihood(const DensePlsa& model, const Eigen::MatrixXd& counts);

// Random hypergraph with edges of size 2..max_edge_size.
Hypergraph random_hypergraph(RngStream& rng, int n_nodes, int n_edges, int max_edge_size = 5);

// Seeded 2-D Gaussian blobs; returns points and generating labels.
struct Blobs {
  Eigen::MatrixXd points;
  std::vector<int> labels;
};
Blobs gaussian_blobs(RngStream& rng, int per_cluster, const std::vector<Eigen::Vector2d>& centers,
                     double stddev);

// Best label agreement over all permutations of cluster ids (small k only).
double best_label_agreement(const std::vector<int>& got, const std::vector<int>& truth, int k);

// Central finite differences of `loss` with respect to every entry of every
// registered tensor (the tensors are perturbed in place and restored).
std::map<std::string, Eigen::MatrixXd> finite_difference_grads(
    ParamRegistry& registry, const std::function<double()>& loss, double step = 1e-5);

// ||a - b|| / max(||a|| + ||b||, floor), the per-tensor relative error used
// by the gradient checks.
double relative_tensor_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             double floor = 1e-10);

}  // namespace driftrec::testing
