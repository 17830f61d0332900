#include "driftrec/clustering.hpp"

#include "driftrec/rng.hpp"
#include "driftrec/tensor_io.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace driftrec {

namespace {

constexpr char kClusterMagic[8] = {'D', 'R', 'C', 'L', 'U', 'S', 'T', '1'};

double sq_dist(const Eigen::MatrixXd& points, Eigen::Index p, const Eigen::MatrixXd& centroids,
               Eigen::Index c) {
  return (points.row(p) - centroids.row(c)).squaredNorm();
}

}  // namespace

Eigen::VectorXd build_feature(const Eigen::VectorXd& topic_vector,
                              const std::vector<double>& attributes) {
  Eigen::VectorXd out(topic_vector.size() + static_cast<Eigen::Index>(attributes.size()));
  for (Eigen::Index i = 0; i < topic_vector.size(); ++i) {
    if (!std::isfinite(topic_vector(i))) throw std::invalid_argument("build_feature: non-finite topic value");
    out(i) = topic_vector(i);
  }
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (!std::isfinite(attributes[i])) throw std::invalid_argument("build_feature: non-finite attribute");
    out(topic_vector.size() + static_cast<Eigen::Index>(i)) = attributes[i];
  }
  return out;
}

Clustering kmeans_fit(const Eigen::MatrixXd& points, int k, int max_iters, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (k < 1) throw std::invalid_argument("kmeans_fit: k must be >= 1");
  if (static_cast<Eigen::Index>(k) > n) {
    throw std::invalid_argument("kmeans_fit: k exceeds number of points");
  }

  RngStream rng(seed);
  Clustering result;
  result.k = k;
  result.centroids.resize(k, points.cols());

  // k-means++ seeding
  std::vector<double> min_d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  const Eigen::Index first = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n)));
  result.centroids.row(0) = points.row(first);
  for (int c = 1; c < k; ++c) {
    double total = 0;
    for (Eigen::Index p = 0; p < n; ++p) {
      const double d2 = sq_dist(points, p, result.centroids, c - 1);
      if (d2 < min_d2[static_cast<std::size_t>(p)]) min_d2[static_cast<std::size_t>(p)] = d2;
      total += min_d2[static_cast<std::size_t>(p)];
    }
    Eigen::Index pick = 0;
    if (total > 0) {
      double target = rng.uniform() * total;
      for (Eigen::Index p = 0; p < n; ++p) {
        target -= min_d2[static_cast<std::size_t>(p)];
        if (target <= 0) {
          pick = p;
          break;
        }
        pick = p;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n)));
    }
    result.centroids.row(c) = points.row(pick);
  }

  result.assignment.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    // assignment step
    bool changed = false;
    double inertia = 0;
    std::fill(counts.begin(), counts.end(), 0);
    for (Eigen::Index p = 0; p < n; ++p) {
      int best = 0;
      double best_d2 = sq_dist(points, p, result.centroids, 0);
      for (int c = 1; c < k; ++c) {
        const double d2 = sq_dist(points, p, result.centroids, c);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      inertia += best_d2;
      if (result.assignment[static_cast<std::size_t>(p)] != best) {
        result.assignment[static_cast<std::size_t>(p)] = best;
        changed = true;
      }
      ++counts[static_cast<std::size_t>(best)];
    }
    result.inertia = inertia;
    result.inertia_trace.push_back(inertia);
    if (!changed) break;

    // update step
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    for (Eigen::Index p = 0; p < n; ++p) {
      sums.row(result.assignment[static_cast<std::size_t>(p)]) += points.row(p);
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        result.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      } else {
        // Reseed an empty cluster at the point farthest from its centroid.
        Eigen::Index far = 0;
        double far_d2 = -1;
        for (Eigen::Index p = 0; p < n; ++p) {
          const double d2 = sq_dist(points, p, result.centroids,
                                    result.assignment[static_cast<std::size_t>(p)]);
          if (d2 > far_d2) {
            far_d2 = d2;
            far = p;
          }
        }
        result.centroids.row(c) = points.row(far);
      }
    }
  }
  return result;
}

int assign_group(const Eigen::VectorXd& feature, const Clustering& clustering) {
  if (feature.size() != clustering.centroids.cols()) {
    throw std::invalid_argument("assign_group: dimension mismatch");
  }
  int best = 0;
  double best_d2 = (clustering.centroids.row(0).transpose() - feature).squaredNorm();
  for (int c = 1; c < clustering.k; ++c) {
    const double d2 = (clustering.centroids.row(c).transpose() - feature).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

int choose_k(std::size_t n_entities, double ratio) {
  if (ratio <= 0) throw std::invalid_argument("choose_k: ratio must be positive");
  const long k = std::lround(static_cast<double>(n_entities) / ratio);
  return static_cast<int>(std::max(1L, k));
}

void save_clustering(const Clustering& c, const std::filesystem::path& path) {
  BinaryWriter w(path, kClusterMagic, 1);
  w.write_u32(static_cast<std::uint32_t>(c.k));
  w.write_matrix(c.centroids);
  w.write_u64(c.assignment.size());
  for (int a : c.assignment) w.write_u32(static_cast<std::uint32_t>(a));
  w.write_f64(c.inertia);
  w.close();
}

Clustering load_clustering(const std::filesystem::path& path) {
  BinaryReader r(path, kClusterMagic, 1);
  Clustering c;
  c.k = static_cast<int>(r.read_u32());
  c.centroids = r.read_matrix();
  const std::uint64_t n = r.read_u64();
  for (std::uint64_t i = 0; i < n; ++i) c.assignment.push_back(static_cast<int>(r.read_u32()));
  c.inertia = r.read_f64();
  return c;
}

}  // namespace driftrec
