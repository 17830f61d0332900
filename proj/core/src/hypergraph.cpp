#include "driftrec/hypergraph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace driftrec {

void Hypergraph::add_edge(std::vector<int> nodes, HyperedgeKind kind, double weight) {
  if (nodes.empty()) throw std::invalid_argument("Hypergraph: empty hyperedge");
  if (weight <= 0) throw std::invalid_argument("Hypergraph: edge weight must be positive");
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  for (int v : nodes) {
    if (v < 0 || v >= n_nodes) throw std::invalid_argument("Hypergraph: node out of range");
  }
  edges.push_back(std::move(nodes));
  edge_weights.push_back(weight);
  edge_kinds.push_back(kind);
}

Eigen::SparseMatrix<double> Hypergraph::incidence() const {
  Eigen::SparseMatrix<double> h(n_nodes, static_cast<Eigen::Index>(edges.size()));
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    for (int v : edges[e]) {
      triplets.emplace_back(v, static_cast<Eigen::Index>(e), 1.0);
    }
  }
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

std::vector<std::vector<int>> build_session_hyperedges(
    const std::vector<std::vector<int>>& sessions) {
  std::vector<std::vector<int>> edges;
  for (const auto& session : sessions) {
    if (session.empty()) continue;
    std::vector<int> edge = session;
    std::sort(edge.begin(), edge.end());
    edge.erase(std::unique(edge.begin(), edge.end()), edge.end());
    edges.push_back(std::move(edge));
  }
  return edges;
}

std::vector<std::vector<int>> build_transition_hyperedges(
    const std::vector<std::vector<int>>& sessions) {
  std::map<int, std::set<int>> successors;
  for (const auto& session : sessions) {
    for (std::size_t t = 0; t + 1 < session.size(); ++t) {
      successors[session[t]].insert(session[t + 1]);
    }
  }
  std::vector<std::vector<int>> edges;
  for (const auto& [node, succ] : successors) {
    (void)node;
    edges.emplace_back(succ.begin(), succ.end());
  }
  return edges;
}

HyperLaplacian laplacian(const Hypergraph& graph) {
  const int n = graph.n_nodes;
  HyperLaplacian out;
  out.node_degree = Eigen::VectorXd::Zero(n);
  out.edge_degree = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(graph.edges.size()));

  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    if (graph.edges[e].empty()) throw std::invalid_argument("laplacian: empty hyperedge");
    out.edge_degree(static_cast<Eigen::Index>(e)) = static_cast<double>(graph.edges[e].size());
    for (int v : graph.edges[e]) out.node_degree(v) += graph.edge_weights[e];
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (int v = 0; v < n; ++v) {
    if (out.node_degree(v) != 0) triplets.emplace_back(v, v, out.node_degree(v));
  }
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const double coeff = graph.edge_weights[e] / out.edge_degree(static_cast<Eigen::Index>(e));
    for (int a : graph.edges[e]) {
      for (int b : graph.edges[e]) {
        triplets.emplace_back(a, b, -coeff);
      }
    }
  }
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

double clique_expansion_density(const Hypergraph& graph) {
  const int n = graph.n_nodes;
  if (n < 2) throw std::invalid_argument("clique_expansion_density: need at least 2 nodes");
  std::set<std::pair<int, int>> pairs;
  for (const auto& edge : graph.edges) {
    for (std::size_t i = 0; i < edge.size(); ++i) {
      for (std::size_t j = i + 1; j < edge.size(); ++j) {
        pairs.emplace(edge[i], edge[j]);  // edges are sorted, so (i,j) is canonical
      }
    }
  }
  return 2.0 * static_cast<double>(pairs.size()) /
         (static_cast<double>(n) * static_cast<double>(n - 1));
}

Eigen::MatrixXd build_group_signal(const std::vector<Eigen::VectorXd>& node_topic_means,
                                   const std::vector<double>& node_interaction_counts) {
  if (node_topic_means.size() != node_interaction_counts.size()) {
    throw std::invalid_argument("build_group_signal: size mismatch");
  }
  if (node_topic_means.empty()) return {};
  const auto n = static_cast<Eigen::Index>(node_topic_means.size());
  const Eigen::Index k = node_topic_means.front().size();
  Eigen::MatrixXd x(n, k + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (node_topic_means[static_cast<std::size_t>(i)].size() != k) {
      throw std::invalid_argument("build_group_signal: ragged topic vectors");
    }
    x.row(i).head(k) = node_topic_means[static_cast<std::size_t>(i)].transpose();
    x(i, k) = std::log1p(node_interaction_counts[static_cast<std::size_t>(i)]);
  }
  return x;
}

void save_hypergraph(const Hypergraph& graph, const std::filesystem::path& triplet_file,
                     const std::filesystem::path& kind_file) {
  std::ofstream t(triplet_file);
  if (!t) throw std::runtime_error(triplet_file.string() + ": cannot open for writing");
  t << graph.n_nodes << " " << graph.edges.size() << "\n";
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    for (int v : graph.edges[e]) {
      t << v << " " << e << " " << graph.edge_weights[e] << "\n";
    }
  }
  std::ofstream k(kind_file);
  if (!k) throw std::runtime_error(kind_file.string() + ": cannot open for writing");
  for (auto kind : graph.edge_kinds) {
    k << (kind == HyperedgeKind::session ? "session" : "transition") << "\n";
  }
}

Hypergraph load_hypergraph(const std::filesystem::path& triplet_file,
                           const std::filesystem::path& kind_file) {
  std::ifstream t(triplet_file);
  if (!t) throw std::runtime_error(triplet_file.string() + ": cannot open");
  Hypergraph g;
  std::size_t n_edges = 0;
  t >> g.n_nodes >> n_edges;
  std::vector<std::vector<int>> edges(n_edges);
  std::vector<double> weights(n_edges, 1.0);
  int v = 0;
  std::size_t e = 0;
  double w = 0;
  while (t >> v >> e >> w) {
    if (e >= n_edges) throw std::runtime_error(triplet_file.string() + ": edge index out of range");
    edges[e].push_back(v);
    weights[e] = w;
  }
  std::ifstream k(kind_file);
  if (!k) throw std::runtime_error(kind_file.string() + ": cannot open");
  std::vector<HyperedgeKind> kinds;
  std::string kind;
  while (k >> kind) {
    kinds.push_back(kind == "transition" ? HyperedgeKind::transition : HyperedgeKind::session);
  }
  if (kinds.size() != n_edges) {
    throw std::runtime_error(kind_file.string() + ": edge-kind count mismatch");
  }
  for (std::size_t i = 0; i < n_edges; ++i) {
    g.add_edge(std::move(edges[i]), kinds[i], weights[i]);
  }
  return g;
}

}  // namespace driftrec
