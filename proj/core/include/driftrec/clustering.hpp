#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace driftrec {

// Feature = concat(topic vector, normalized attributes). No rescaling beyond
// what ingest already applied.
Eigen::VectorXd build_feature(const Eigen::VectorXd& topic_vector,
                              const std::vector<double>& attributes);

struct Clustering {
  int k = 0;
  Eigen::MatrixXd centroids;       // [k x dim]
  std::vector<int> assignment;     // point -> cluster
  double inertia = 0;              // sum of squared distances to assigned centroid
  std::vector<double> inertia_trace;
};

// Lloyd iterations with k-means++ seeding, until the assignment reaches a
// fixpoint or max_iters. Empty clusters are reseeded at the point farthest
// from its assigned centroid.
Clustering kmeans_fit(const Eigen::MatrixXd& points, int k, int max_iters, std::uint64_t seed);

// argmin squared Euclidean distance; ties break to the lowest index.
int assign_group(const Eigen::VectorXd& feature, const Clustering& clustering);

// K = max(1, round(n_entities / ratio)).
int choose_k(std::size_t n_entities, double ratio);

void save_clustering(const Clustering& c, const std::filesystem::path& path);
Clustering load_clustering(const std::filesystem::path& path);

}  // namespace driftrec
