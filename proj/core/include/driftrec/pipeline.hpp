#pragma once

#include "driftrec/clustering.hpp"
#include "driftrec/config.hpp"
#include "driftrec/data_model.hpp"
#include "driftrec/hypergraph.hpp"
#include "driftrec/personalize.hpp"
#include "driftrec/recsys.hpp"
#include "driftrec/spectral.hpp"
#include "driftrec/topics.hpp"
#include "driftrec/wavenet.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace driftrec {

// --- upstream artifacts -----------------------------------------------------

// Topic model fitted on resume documents; job documents are folded in.
TopicModel fit_topics(const Dataset& dataset, const RunConfig& config, EmTrace* trace = nullptr);

struct GroupAssignments {
  Clustering user_clusters;  // over per-(user,version) features
  Clustering job_clusters;
  int n_user_groups = 0;
  int n_job_groups = 0;
  std::vector<std::vector<int>> user_version_group;  // [user][version] -> user group
  std::vector<int> job_group;                        // [job] -> job group
  Eigen::MatrixXd job_topics;                        // [J x K] fold-in topic vectors
};

GroupAssignments assign_groups(const Dataset& dataset, const TopicModel& topics,
                               const RunConfig& config);

// One interaction hypergraph per user group over job-group nodes.
struct GroupGraph {
  std::vector<int> node_job_groups;        // node -> job group id, ascending
  std::map<int, int> node_of_job_group;    // inverse
  Hypergraph graph;
  HyperLaplacian lap;
  WaveletFilterBank bank;                  // empty when the graph has no nodes
  Eigen::MatrixXd raw_signal;              // [n x (K+1)]
};

// session_mask selects which dataset sessions contribute edges and counts
// (training code passes train+val so test interactions never leak into the
// graphs); empty mask means all sessions.
std::vector<GroupGraph> build_group_graphs(const Dataset& dataset, const TopicModel& topics,
                                           const GroupAssignments& groups,
                                           const RunConfig& config,
                                           const std::vector<bool>& session_mask = {});

// --- splits ------------------------------------------------------------------

struct SessionSplit {
  std::vector<std::size_t> train, val, test;
  std::vector<bool> train_val_mask;  // per dataset session
};

// 20% of sessions held out for test, remaining 4:1 train:val.
SessionSplit split_sessions(const Dataset& dataset, std::uint64_t seed);

// --- the model ---------------------------------------------------------------

struct Model {
  int dim = 0;
  int k_topics = 0;
  int n_labels = 0;
  int layers = 1;
  int scales = 1;
  bool wavelet = true;
  Activation activation = Activation::relu;

  Eigen::MatrixXd input_proj;               // [(K+1) x d]
  Eigen::MatrixXd emb_proj;                 // [K x d]
  std::vector<Eigen::MatrixXd> layer_mix;   // per layer [d x d]
  // spectral diagonals per (group, layer): [n_g x scales]
  std::vector<std::vector<Eigen::MatrixXd>> spectral_diag;
  RnnParams rnn;
  FusionHead fusion;

  ParamRegistry registry();  // names are stable across runs
};

Model init_model(const RunConfig& config, int n_labels,
                 const std::vector<GroupGraph>& graphs, std::uint64_t seed);

// --- training / evaluation ----------------------------------------------------

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_hit = 0;
  double val_mrr = 0;
};

struct TrainResult {
  Model model;
  AdamState adam;
  std::vector<EpochStats> trace;
  int best_epoch = 0;
  double best_val_hit = 0;
};

struct Bundle {
  const Dataset* dataset = nullptr;
  const TopicModel* topics = nullptr;
  const GroupAssignments* groups = nullptr;
  const std::vector<GroupGraph>* graphs = nullptr;
};

TrainResult train_model(const Bundle& bundle, const SessionSplit& split, const RunConfig& config);

struct EvalReport {
  double hit = 0;
  double mrr = 0;
  std::size_t n_points = 0;
  int k = 0;
  std::map<std::string, double> per_user_rr;  // mean reciprocal rank per user
};

EvalReport evaluate_model(const Bundle& bundle, const Model& model,
                          const std::vector<std::size_t>& session_indices,
                          const RunConfig& config, int k, int max_points = 0);

// Top-k for 1 user/session prefix; prefix must be non-empty.
Recommendation recommend_topk(const Bundle& bundle, const Model& model, std::size_t session_index,
                              std::size_t prefix_len, const RunConfig& config, int k);

std::string eval_report_json(const EvalReport& report, const RunConfig& config);

// --- checkpoint ----------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, Model& model, const AdamState& adam,
                     const RunConfig& config);
// Shapes come from the freshly initialized model for the same config+graphs.
void load_checkpoint(const std::filesystem::path& path, Model& model, AdamState& adam,
                     std::uint64_t expect_config_hash, bool* config_mismatch = nullptr);

void write_metric_trace(const std::vector<EpochStats>& trace, const std::filesystem::path& path);

}  // namespace driftrec
