#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <filesystem>
#include <vector>

namespace driftrec {

enum class HyperedgeKind { session, transition };

// Node-edge incidence with unit edge weights by default. Nodes are dense
// indices [0, n); isolated nodes are retained so signal rows stay aligned
// with the group roster.
struct Hypergraph {
  int n_nodes = 0;
  std::vector<std::vector<int>> edges;  // sorted distinct node lists, non-empty
  std::vector<double> edge_weights;
  std::vector<HyperedgeKind> edge_kinds;

  void add_edge(std::vector<int> nodes, HyperedgeKind kind, double weight = 1.0);
  Eigen::SparseMatrix<double> incidence() const;  // [n x m]
};

struct HyperLaplacian {
  Eigen::SparseMatrix<double> matrix;  // Dv - H W De^-1 H^T, symmetric PSD
  Eigen::VectorXd node_degree;         // Dv
  Eigen::VectorXd edge_degree;         // De
};

// One hyperedge per session covering the distinct node indices it touches.
std::vector<std::vector<int>> build_session_hyperedges(
    const std::vector<std::vector<int>>& sessions);

// For each node, one hyperedge over everything that immediately follows it in
// any session. Nodes without successors contribute no edge.
std::vector<std::vector<int>> build_transition_hyperedges(
    const std::vector<std::vector<int>>& sessions);

HyperLaplacian laplacian(const Hypergraph& graph);

// Density of the simple graph obtained by expanding each hyperedge into a
// clique, duplicate pairs counted once. Requires n >= 2.
double clique_expansion_density(const Hypergraph& graph);

// Node features: mean topic vector of the node's member jobs, with
// log(1 + interaction count) appended. Returns [n x (K+1)].
Eigen::MatrixXd build_group_signal(const std::vector<Eigen::VectorXd>& node_topic_means,
                                   const std::vector<double>& node_interaction_counts);

// Sparse triplet text (node edge weight) plus an edge-kind sidecar line set.
void save_hypergraph(const Hypergraph& graph, const std::filesystem::path& triplet_file,
                     const std::filesystem::path& kind_file);
Hypergraph load_hypergraph(const std::filesystem::path& triplet_file,
                           const std::filesystem::path& kind_file);

}  // namespace driftrec
