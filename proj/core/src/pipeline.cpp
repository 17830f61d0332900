#include "driftrec/pipeline.hpp"

#include "driftrec/rng.hpp"
#include "driftrec/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace driftrec {

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'R', 'C', 'K', 'P', 'T', '0', '1'};

Activation activation_of(const RunConfig& config) {
  return config.activation == "identity" ? Activation::identity : Activation::relu;
}

// Per-session view resolved to indices once, reused everywhere.
struct SessionView {
  std::size_t user = 0;
  int user_group = -1;
  std::vector<std::size_t> jobs;  // job indices in session order
};

std::vector<SessionView> make_session_views(const Dataset& dataset,
                                            const GroupAssignments& groups) {
  std::vector<SessionView> views;
  views.reserve(dataset.sessions.size());
  for (const auto& session : dataset.sessions) {
    SessionView view;
    view.user = dataset.user_index.at(session.user_id);
    const auto v = static_cast<std::size_t>(session.resume_version_index);
    view.user_group = groups.user_version_group[view.user][v];
    view.jobs.reserve(session.interactions.size());
    for (const auto& it : session.interactions) {
      view.jobs.push_back(dataset.job_index.at(it.job_id));
    }
    views.push_back(std::move(view));
  }
  return views;
}

}  // namespace

TopicModel fit_topics(const Dataset& dataset, const RunConfig& config, EmTrace* trace) {
  std::vector<Document> resume_docs;
  for (const auto& doc : dataset.documents) {
    if (doc.id.rfind("u/", 0) == 0) resume_docs.push_back(doc);
  }
  if (resume_docs.empty()) throw std::runtime_error("fit_topics: no resume documents");
  const Corpus corpus = Corpus::from_documents(resume_docs);
  return em_fit(corpus, config.k_topics, config.em_max_iters, config.em_tol,
                RngStream(config.seed).fork("topics").next_u64(), trace);
}

GroupAssignments assign_groups(const Dataset& dataset, const TopicModel& topics,
                               const RunConfig& config) {
  GroupAssignments out;
  const int K = topics.n_topics;

  // user features: one point per (user, resume version)
  std::vector<std::pair<std::size_t, std::size_t>> version_points;  // (user, version)
  for (std::size_t u = 0; u < dataset.users.size(); ++u) {
    for (std::size_t v = 0; v < dataset.users[u].resume_versions.size(); ++v) {
      version_points.emplace_back(u, v);
    }
  }
  const auto n_attr_u =
      dataset.users.empty() ? 0 : static_cast<Eigen::Index>(dataset.users[0].attributes.size());
  Eigen::MatrixXd user_points(static_cast<Eigen::Index>(version_points.size()), K + n_attr_u);
  for (std::size_t i = 0; i < version_points.size(); ++i) {
    const auto [u, v] = version_points[i];
    const auto& doc_id = dataset.users[u].resume_versions[v].document_id;
    const int row = topics.doc_index.at(doc_id);
    const Eigen::VectorXd feature = build_feature(topics.topic_given_doc.row(row).transpose(),
                                                  dataset.users[u].attributes);
    user_points.row(static_cast<Eigen::Index>(i)) = feature.transpose();
  }
  out.n_user_groups = choose_k(dataset.users.size(), config.user_group_ratio);
  out.user_clusters = kmeans_fit(user_points, out.n_user_groups, config.kmeans_max_iters,
                                 RngStream(config.seed).fork("kmeans-users").next_u64());
  out.user_version_group.resize(dataset.users.size());
  for (std::size_t i = 0; i < version_points.size(); ++i) {
    const auto [u, v] = version_points[i];
    (void)v;
    out.user_version_group[u].push_back(out.user_clusters.assignment[i]);
  }

  // job features: fold-in topic vector + attributes
  out.job_topics.resize(static_cast<Eigen::Index>(dataset.jobs.size()), K);
  const auto n_attr_j =
      dataset.jobs.empty() ? 0 : static_cast<Eigen::Index>(dataset.jobs[0].attributes.size());
  Eigen::MatrixXd job_points(static_cast<Eigen::Index>(dataset.jobs.size()), K + n_attr_j);
  for (std::size_t j = 0; j < dataset.jobs.size(); ++j) {
    const auto& doc = dataset.document(dataset.jobs[j].requirement_document);
    const FoldInResult folded = fold_in(topics, doc, config.foldin_iters);
    out.job_topics.row(static_cast<Eigen::Index>(j)) = folded.topics.transpose();
    const Eigen::VectorXd feature = build_feature(folded.topics, dataset.jobs[j].attributes);
    job_points.row(static_cast<Eigen::Index>(j)) = feature.transpose();
  }
  out.n_job_groups = choose_k(dataset.jobs.size(), config.job_group_ratio);
  out.job_clusters = kmeans_fit(job_points, out.n_job_groups, config.kmeans_max_iters,
                                RngStream(config.seed).fork("kmeans-jobs").next_u64());
  out.job_group = out.job_clusters.assignment;
  return out;
}

std::vector<GroupGraph> build_group_graphs(const Dataset& dataset, const TopicModel& topics,
                                           const GroupAssignments& groups,
                                           const RunConfig& config,
                                           const std::vector<bool>& session_mask) {
  (void)topics;
  if (!session_mask.empty() && session_mask.size() != dataset.sessions.size()) {
    throw std::invalid_argument("build_group_graphs: mask size mismatch");
  }

  // global topic mean per job group
  std::vector<Eigen::VectorXd> group_topic_mean(static_cast<std::size_t>(groups.n_job_groups));
  std::vector<int> group_sizes(static_cast<std::size_t>(groups.n_job_groups), 0);
  const Eigen::Index K = groups.job_topics.cols();
  for (auto& m : group_topic_mean) m = Eigen::VectorXd::Zero(K);
  for (std::size_t j = 0; j < dataset.jobs.size(); ++j) {
    const auto g = static_cast<std::size_t>(groups.job_group[j]);
    group_topic_mean[g] += groups.job_topics.row(static_cast<Eigen::Index>(j)).transpose();
    ++group_sizes[g];
  }
  for (std::size_t g = 0; g < group_topic_mean.size(); ++g) {
    if (group_sizes[g] > 0) group_topic_mean[g] /= group_sizes[g];
  }

  const auto views = make_session_views(dataset, groups);

  // per user group: session sequences in job-group space, plus counts
  std::vector<std::vector<std::vector<int>>> sequences(
      static_cast<std::size_t>(groups.n_user_groups));
  std::vector<std::map<int, double>> counts(static_cast<std::size_t>(groups.n_user_groups));
  for (std::size_t s = 0; s < views.size(); ++s) {
    if (!session_mask.empty() && !session_mask[s]) continue;
    const auto& view = views[s];
    const auto ug = static_cast<std::size_t>(view.user_group);
    std::vector<int> seq;
    seq.reserve(view.jobs.size());
    for (std::size_t j : view.jobs) {
      const int jg = groups.job_group[j];
      seq.push_back(jg);
      counts[ug][jg] += 1.0;
    }
    sequences[ug].push_back(std::move(seq));
  }

  std::vector<GroupGraph> graphs(static_cast<std::size_t>(groups.n_user_groups));
  for (std::size_t ug = 0; ug < graphs.size(); ++ug) {
    auto& gg = graphs[ug];
    std::set<int> roster;
    for (const auto& seq : sequences[ug]) roster.insert(seq.begin(), seq.end());
    gg.node_job_groups.assign(roster.begin(), roster.end());
    for (std::size_t i = 0; i < gg.node_job_groups.size(); ++i) {
      gg.node_of_job_group[gg.node_job_groups[i]] = static_cast<int>(i);
    }
    const int n = static_cast<int>(gg.node_job_groups.size());
    gg.graph.n_nodes = n;
    if (n == 0) continue;

    std::vector<std::vector<int>> node_sequences;
    node_sequences.reserve(sequences[ug].size());
    for (const auto& seq : sequences[ug]) {
      std::vector<int> mapped;
      mapped.reserve(seq.size());
      for (int jg : seq) mapped.push_back(gg.node_of_job_group.at(jg));
      node_sequences.push_back(std::move(mapped));
    }
    for (auto& edge : build_session_hyperedges(node_sequences)) {
      gg.graph.add_edge(std::move(edge), HyperedgeKind::session);
    }
    for (auto& edge : build_transition_hyperedges(node_sequences)) {
      gg.graph.add_edge(std::move(edge), HyperedgeKind::transition);
    }
    gg.lap = laplacian(gg.graph);
    gg.bank = build_filter_bank(gg.lap.matrix, config.scales, config.cheb_order,
                                config.interp_degree, config.oracle_cap);

    std::vector<Eigen::VectorXd> node_means;
    std::vector<double> node_counts;
    for (int jg : gg.node_job_groups) {
      node_means.push_back(group_topic_mean[static_cast<std::size_t>(jg)]);
      auto it = counts[ug].find(jg);
      node_counts.push_back(it == counts[ug].end() ? 0.0 : it->second);
    }
    gg.raw_signal = build_group_signal(node_means, node_counts);
  }
  return graphs;
}

SessionSplit split_sessions(const Dataset& dataset, std::uint64_t seed) {
  std::vector<std::size_t> order(dataset.sessions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream rng = RngStream(seed).fork("split");
  rng.shuffle(order);

  SessionSplit split;
  const std::size_t n_test = order.size() / 5;           // 20% held-out test
  const std::size_t n_val = (order.size() - n_test) / 5; // remaining 4:1 train:val
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                   order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.train.begin(), split.train.end());
  split.train_val_mask.assign(dataset.sessions.size(), true);
  for (std::size_t s : split.test) split.train_val_mask[s] = false;
  return split;
}

ParamRegistry Model::registry() {
  ParamRegistry reg;
  reg.add("input_proj", input_proj);
  reg.add("emb_proj", emb_proj);
  reg.add("rnn/w_out", rnn.w_out);
  reg.add("rnn/w_in", rnn.w_in);
  reg.add("rnn/w_rec", rnn.w_rec);
  reg.add("fusion/weight", fusion.weight);
  reg.add("fusion/bias", fusion.bias);
  for (std::size_t l = 0; l < layer_mix.size(); ++l) {
    reg.add("wave/l" + std::to_string(l) + "/mix", layer_mix[l]);
  }
  for (std::size_t g = 0; g < spectral_diag.size(); ++g) {
    for (std::size_t l = 0; l < spectral_diag[g].size(); ++l) {
      reg.add("wave/g" + std::to_string(g) + "/l" + std::to_string(l) + "/diag",
              spectral_diag[g][l]);
    }
  }
  return reg;
}

Model init_model(const RunConfig& config, int n_labels, const std::vector<GroupGraph>& graphs,
                 std::uint64_t seed) {
  Model model;
  model.dim = config.dim;
  model.k_topics = config.k_topics;
  model.n_labels = n_labels;
  model.layers = config.layers;
  model.scales = config.scales;
  model.wavelet = config.wavelet;
  model.activation = activation_of(config);

  RngStream root = RngStream(seed).fork("model");
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = root.uniform(-bound, bound);
    }
    return m;
  };

  const int d = config.dim;
  const int K = config.k_topics;
  model.input_proj = glorot(K + 1, d);
  model.emb_proj = glorot(K, d);
  for (int l = 0; l < config.layers; ++l) model.layer_mix.push_back(glorot(d, d));
  if (config.wavelet) {
    for (const auto& graph : graphs) {
      std::vector<Eigen::MatrixXd> per_layer;
      for (int l = 0; l < config.layers; ++l) {
        Eigen::MatrixXd diag(graph.graph.n_nodes, config.scales);
        for (Eigen::Index i = 0; i < diag.rows(); ++i) {
          for (Eigen::Index s = 0; s < diag.cols(); ++s) diag(i, s) = 1.0 + root.normal(0, 0.01);
        }
        per_layer.push_back(std::move(diag));
      }
      model.spectral_diag.push_back(std::move(per_layer));
    }
  }
  model.rnn.w_out = glorot(d, d);
  model.rnn.w_in = glorot(d, d);
  model.rnn.w_rec = glorot(d, d);
  model.fusion.weight = glorot(n_labels, 2 * d);
  model.fusion.bias = Eigen::VectorXd::Zero(n_labels);
  return model;
}

namespace {

// --- shared forward/backward machinery ---

struct LayerCache {
  WaveConvCache wave;             // wavelet layers
  Eigen::MatrixXd input;          // dense (ablated) layers
  Eigen::MatrixXd preactivation;  // dense (ablated) layers
};

struct GroupForwardResult {
  Eigen::MatrixXd x0;  // raw_signal * input_proj
  Eigen::MatrixXd xl;  // final node features
  std::vector<LayerCache> caches;
};

GroupForwardResult forward_group(const Model& model, const GroupGraph& graph, int group_index,
                                 bool want_cache) {
  GroupForwardResult out;
  if (graph.graph.n_nodes == 0) {
    out.x0.resize(0, model.dim);
    out.xl.resize(0, model.dim);
    return out;
  }
  out.x0 = graph.raw_signal * model.input_proj;
  Eigen::MatrixXd x = out.x0;
  for (int l = 0; l < model.layers; ++l) {
    LayerCache cache;
    if (model.wavelet) {
      const GraphWaveletOperator op =
          GraphWaveletOperator::chebyshev(&graph.lap.matrix, &graph.bank);
      WaveConvParams params{model.layer_mix[static_cast<std::size_t>(l)],
                            model.spectral_diag[static_cast<std::size_t>(group_index)]
                                               [static_cast<std::size_t>(l)]};
      x = waveconv_forward(op, params, x, model.activation, want_cache ? &cache.wave : nullptr);
    } else {
      if (want_cache) cache.input = x;
      Eigen::MatrixXd pre = x * model.layer_mix[static_cast<std::size_t>(l)];
      x = model.activation == Activation::relu ? pre.cwiseMax(0.0).eval() : pre;
      if (want_cache) cache.preactivation = std::move(pre);
    }
    if (want_cache) out.caches.push_back(std::move(cache));
  }
  out.xl = std::move(x);
  return out;
}

// Backpropagates grad wrt xl into the shared grad map; returns nothing.
void backward_group(const Model& model, const GroupGraph& graph, int group_index,
                    const GroupForwardResult& fwd, const Eigen::MatrixXd& grad_xl,
                    std::map<std::string, Eigen::MatrixXd>& grads) {
  if (graph.graph.n_nodes == 0) return;
  Eigen::MatrixXd grad = grad_xl;
  for (int l = model.layers - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    const std::string mix_name = "wave/l" + std::to_string(l) + "/mix";
    if (model.wavelet) {
      const GraphWaveletOperator op =
          GraphWaveletOperator::chebyshev(&graph.lap.matrix, &graph.bank);
      WaveConvParams params{model.layer_mix[lu],
                            model.spectral_diag[static_cast<std::size_t>(group_index)][lu]};
      WaveConvGrads wg =
          waveconv_backward(op, params, fwd.caches[lu].wave, model.activation, grad);
      auto [mit, inserted] = grads.try_emplace(mix_name, std::move(wg.channel_mix));
      if (!inserted) mit->second += wg.channel_mix;
      const std::string diag_name =
          "wave/g" + std::to_string(group_index) + "/l" + std::to_string(l) + "/diag";
      auto [dit, dinserted] = grads.try_emplace(diag_name, std::move(wg.spectral_diag));
      if (!dinserted) dit->second += wg.spectral_diag;
      grad = std::move(wg.input);
    } else {
      Eigen::MatrixXd grad_pre = grad;
      if (model.activation == Activation::relu) {
        grad_pre = (fwd.caches[lu].preactivation.array() > 0.0).select(grad, 0.0);
      }
      Eigen::MatrixXd mix_grad = fwd.caches[lu].input.transpose() * grad_pre;
      auto [mit, inserted] = grads.try_emplace(mix_name, mix_grad);
      if (!inserted) mit->second += mix_grad;
      grad = grad_pre * model.layer_mix[lu].transpose();
    }
  }
  Eigen::MatrixXd in_grad = graph.raw_signal.transpose() * grad;
  auto [iit, inserted] = grads.try_emplace("input_proj", in_grad);
  if (!inserted) iit->second += in_grad;
}

struct Point {
  std::size_t session = 0;  // index into views/dataset.sessions
  int cut = 0;              // target position; prefix is [0, cut)
};

// Window-length bucket of points, processed in one RNN batch.
struct Bucket {
  int window = 0;
  std::vector<std::size_t> rows;                  // indices into the point list
  std::vector<Eigen::MatrixXd> topic_gathers;     // per step [B x K]
  RnnCache rnn;
};

struct PointsForward {
  Eigen::MatrixXd y_t;    // [B x d]
  Eigen::MatrixXd x_sel;  // [B x d]
  std::vector<std::vector<int>> sel_nodes;  // per point, graph node ids
  std::vector<Bucket> buckets;
  std::map<int, GroupForwardResult> group_fwd;  // keyed by user group
};

PointsForward forward_points(const Model& model, const GroupAssignments& groups,
                             const std::vector<GroupGraph>& graphs,
                             const std::vector<SessionView>& views,
                             const std::vector<Point>& points, int window_cfg, bool want_cache) {
  PointsForward out;
  const auto B = static_cast<Eigen::Index>(points.size());
  out.y_t.resize(B, model.dim);
  out.x_sel = Eigen::MatrixXd::Zero(B, model.dim);
  out.sel_nodes.resize(points.size());

  // one graph forward per user group present in the batch
  std::set<int> needed;
  for (const auto& p : points) needed.insert(views[p.session].user_group);
  for (int g : needed) {
    out.group_fwd.emplace(g, forward_group(model, graphs[static_cast<std::size_t>(g)], g,
                                           want_cache));
  }

  // bucket by window length
  std::map<int, std::vector<std::size_t>> by_window;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int win = std::min(window_cfg, points[i].cut);
    by_window[win].push_back(i);
  }

  for (auto& [win, rows] : by_window) {
    Bucket bucket;
    bucket.window = win;
    bucket.rows = std::move(rows);
    const auto bb = static_cast<Eigen::Index>(bucket.rows.size());

    std::vector<Eigen::MatrixXd> emb_steps;
    for (int t = 0; t < win; ++t) {
      Eigen::MatrixXd gather(bb, model.k_topics);
      for (Eigen::Index r = 0; r < bb; ++r) {
        const auto& p = points[bucket.rows[static_cast<std::size_t>(r)]];
        const auto& view = views[p.session];
        const std::size_t job = view.jobs[static_cast<std::size_t>(p.cut - win + t)];
        gather.row(r) = groups.job_topics.row(static_cast<Eigen::Index>(job));
      }
      emb_steps.push_back(gather * model.emb_proj);
      if (want_cache) bucket.topic_gathers.push_back(std::move(gather));
    }
    const Eigen::MatrixXd y =
        rnn_forward(model.rnn, emb_steps, want_cache ? &bucket.rnn : nullptr);
    for (Eigen::Index r = 0; r < bb; ++r) {
      out.y_t.row(static_cast<Eigen::Index>(bucket.rows[static_cast<std::size_t>(r)])) = y.row(r);
    }
    if (want_cache) out.buckets.push_back(std::move(bucket));
  }

  // session-context rows: mean of the wavenet output over the prefix's groups
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const auto& view = views[p.session];
    const auto& graph = graphs[static_cast<std::size_t>(view.user_group)];
    const auto& xl = out.group_fwd.at(view.user_group).xl;
    std::set<int> prefix_groups;
    for (int t = 0; t < p.cut; ++t) {
      prefix_groups.insert(groups.job_group[view.jobs[static_cast<std::size_t>(t)]]);
    }
    auto& nodes = out.sel_nodes[i];
    for (int jg : prefix_groups) {
      auto found = graph.node_of_job_group.find(jg);
      if (found != graph.node_of_job_group.end()) nodes.push_back(found->second);
    }
    if (!nodes.empty()) {
      for (int node : nodes) out.x_sel.row(static_cast<Eigen::Index>(i)) += xl.row(node);
      out.x_sel.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(nodes.size());
    }
  }
  return out;
}

Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double n = out.row(r).norm();
    if (n > 1e-12) out.row(r) /= n;
  }
  return out;
}

// Lexicographic rank of each job id, for deterministic tie-breaks.
std::vector<int> job_id_ranks(const Dataset& dataset) {
  std::vector<int> order(dataset.jobs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return dataset.jobs[static_cast<std::size_t>(a)].id <
                                       dataset.jobs[static_cast<std::size_t>(b)].id; });
  std::vector<int> rank(dataset.jobs.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[static_cast<std::size_t>(order[i])] =
      static_cast<int>(i);
  return rank;
}

std::vector<Point> collect_points(const std::vector<SessionView>& views,
                                  const std::vector<std::size_t>& session_indices) {
  std::vector<Point> points;
  for (std::size_t s : session_indices) {
    const auto len = static_cast<int>(views[s].jobs.size());
    for (int cut = 2; cut < len; ++cut) points.push_back({s, cut});
  }
  return points;
}

EvalReport evaluate_with_views(const Bundle& bundle, const Model& model,
                               const std::vector<SessionView>& views,
                               const std::vector<std::size_t>& session_indices,
                               const RunConfig& config, int k, int max_points);

}  // namespace

TrainResult train_model(const Bundle& bundle, const SessionSplit& split, const RunConfig& config) {
  const Dataset& dataset = *bundle.dataset;
  const GroupAssignments& groups = *bundle.groups;
  const std::vector<GroupGraph>& graphs = *bundle.graphs;
  const auto views = make_session_views(dataset, groups);

  std::vector<std::size_t> trainable;
  for (std::size_t s : split.train) {
    if (views[s].jobs.size() >= 3) trainable.push_back(s);
  }
  if (trainable.empty()) throw std::runtime_error("train_model: empty training split");

  TrainResult result;
  result.model = init_model(config, dataset.n_labels, graphs, config.seed);
  ParamRegistry registry = result.model.registry();
  result.adam.config.lr = config.lr;

  Model best_model = result.model;
  int best_epoch = 0;
  double best_val = -1.0;
  int since_best = 0;

  RngStream train_rng = RngStream(config.seed).fork("train");

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // one prediction target per usable training session per epoch
    std::vector<Point> samples;
    samples.reserve(trainable.size());
    for (std::size_t s : trainable) {
      const auto len = static_cast<int>(views[s].jobs.size());
      const int cut = 2 + static_cast<int>(train_rng.uniform_index(
                              static_cast<std::size_t>(len - 2)));
      samples.push_back({s, cut});
    }
    train_rng.shuffle(samples);

    double epoch_loss = 0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < samples.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(samples.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<Point> batch(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                     samples.begin() + static_cast<std::ptrdiff_t>(end));
      const auto B = static_cast<Eigen::Index>(batch.size());

      PointsForward fwd = forward_points(result.model, groups, graphs, views, batch,
                                         config.window, /*want_cache=*/true);

      // fuse + softmax + NLL
      const Eigen::MatrixXd scores = fuse(result.model.fusion, fwd.y_t, fwd.x_sel);
      const Eigen::MatrixXd probs = row_softmax(scores);
      std::vector<int> targets;
      targets.reserve(batch.size());
      for (const auto& p : batch) {
        const std::size_t next_job = views[p.session].jobs[static_cast<std::size_t>(p.cut)];
        targets.push_back(dataset.jobs[next_job].label);
      }
      epoch_loss += nll_loss(probs, targets);
      ++n_batches;

      // backward through softmax and the sigmoid head
      Eigen::MatrixXd grad_scores = probs;
      for (Eigen::Index r = 0; r < B; ++r) {
        grad_scores(r, targets[static_cast<std::size_t>(r)]) -= 1.0;
      }
      grad_scores /= static_cast<double>(B);
      const Eigen::MatrixXd grad_z =
          (grad_scores.array() * scores.array() * (1.0 - scores.array())).matrix();

      std::map<std::string, Eigen::MatrixXd> grads;
      Eigen::MatrixXd concat(B, 2 * result.model.dim);
      concat << fwd.y_t, fwd.x_sel;
      grads["fusion/weight"] = grad_z.transpose() * concat;
      grads["fusion/bias"] = grad_z.colwise().sum().transpose();
      const Eigen::MatrixXd grad_concat = grad_z * result.model.fusion.weight;
      const Eigen::MatrixXd grad_y = grad_concat.leftCols(result.model.dim);
      const Eigen::MatrixXd grad_x_sel = grad_concat.rightCols(result.model.dim);

      // RNN and embedding-projection gradients, bucket by bucket
      Eigen::MatrixXd grad_emb_proj =
          Eigen::MatrixXd::Zero(result.model.emb_proj.rows(), result.model.emb_proj.cols());
      RnnGrads total_rnn;
      total_rnn.w_out = Eigen::MatrixXd::Zero(result.model.dim, result.model.dim);
      total_rnn.w_in = Eigen::MatrixXd::Zero(result.model.dim, result.model.dim);
      total_rnn.w_rec = Eigen::MatrixXd::Zero(result.model.dim, result.model.dim);
      for (const auto& bucket : fwd.buckets) {
        Eigen::MatrixXd grad_y_bucket(static_cast<Eigen::Index>(bucket.rows.size()),
                                      result.model.dim);
        for (std::size_t r = 0; r < bucket.rows.size(); ++r) {
          grad_y_bucket.row(static_cast<Eigen::Index>(r)) =
              grad_y.row(static_cast<Eigen::Index>(bucket.rows[r]));
        }
        RnnGrads rg = rnn_backward(result.model.rnn, bucket.rnn, grad_y_bucket);
        total_rnn.w_out += rg.w_out;
        total_rnn.w_in += rg.w_in;
        total_rnn.w_rec += rg.w_rec;
        for (std::size_t t = 0; t < rg.inputs.size(); ++t) {
          grad_emb_proj.noalias() += bucket.topic_gathers[t].transpose() * rg.inputs[t];
        }
      }
      grads["rnn/w_out"] = std::move(total_rnn.w_out);
      grads["rnn/w_in"] = std::move(total_rnn.w_in);
      grads["rnn/w_rec"] = std::move(total_rnn.w_rec);
      grads["emb_proj"] = std::move(grad_emb_proj);

      // scatter the session-context gradient back into the group outputs
      std::map<int, Eigen::MatrixXd> grad_xl;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (fwd.sel_nodes[i].empty()) continue;
        const int g = views[batch[i].session].user_group;
        auto found = grad_xl.find(g);
        if (found == grad_xl.end()) {
          found = grad_xl
                      .emplace(g, Eigen::MatrixXd::Zero(fwd.group_fwd.at(g).xl.rows(),
                                                        result.model.dim))
                      .first;
        }
        const double w = 1.0 / static_cast<double>(fwd.sel_nodes[i].size());
        for (int node : fwd.sel_nodes[i]) {
          found->second.row(node) += w * grad_x_sel.row(static_cast<Eigen::Index>(i));
        }
      }
      for (const auto& [g, gxl] : grad_xl) {
        backward_group(result.model, graphs[static_cast<std::size_t>(g)], g, fwd.group_fwd.at(g),
                       gxl, grads);
      }

      adam_step(registry, grads, result.adam);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = n_batches > 0 ? epoch_loss / static_cast<double>(n_batches) : 0.0;
    const EvalReport val = evaluate_with_views(bundle, result.model, views, split.val, config,
                                               config.topk, config.val_points_cap);
    stats.val_hit = val.hit;
    stats.val_mrr = val.mrr;
    result.trace.push_back(stats);

    if (val.hit > best_val) {
      best_val = val.hit;
      best_epoch = epoch;
      best_model = result.model;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= config.patience) break;
    }
  }

  result.model = std::move(best_model);
  result.best_epoch = best_epoch;
  result.best_val_hit = best_val;
  return result;
}

EvalReport evaluate_model(const Bundle& bundle, const Model& model,
                          const std::vector<std::size_t>& session_indices,
                          const RunConfig& config, int k, int max_points) {
  const auto views = make_session_views(*bundle.dataset, *bundle.groups);
  return evaluate_with_views(bundle, model, views, session_indices, config, k, max_points);
}

namespace {

EvalReport evaluate_with_views(const Bundle& bundle, const Model& model,
                               const std::vector<SessionView>& views,
                               const std::vector<std::size_t>& session_indices,
                               const RunConfig& config, int k, int max_points) {
  const Dataset& dataset = *bundle.dataset;
  const GroupAssignments& groups = *bundle.groups;
  const std::vector<GroupGraph>& graphs = *bundle.graphs;

  std::vector<Point> points = collect_points(views, session_indices);
  if (max_points > 0 && static_cast<int>(points.size()) > max_points) {
    std::vector<Point> sampled;
    sampled.reserve(static_cast<std::size_t>(max_points));
    const double step = static_cast<double>(points.size()) / max_points;
    for (int i = 0; i < max_points; ++i) {
      sampled.push_back(points[static_cast<std::size_t>(i * step)]);
    }
    points = std::move(sampled);
  }

  EvalReport report;
  report.k = k;
  if (points.empty()) return report;

  const Eigen::MatrixXd job_emb_norm = normalized_rows(groups.job_topics * model.emb_proj);
  const std::vector<int> id_rank = job_id_ranks(dataset);
  std::vector<int> labels(dataset.jobs.size());
  for (std::size_t j = 0; j < dataset.jobs.size(); ++j) labels[j] = dataset.jobs[j].label;

  std::vector<int> ranks;
  ranks.reserve(points.size());
  std::map<std::string, std::pair<double, std::size_t>> user_rr;

  const std::size_t chunk = 512;
  for (std::size_t start = 0; start < points.size(); start += chunk) {
    const std::size_t end = std::min(points.size(), start + chunk);
    const std::vector<Point> slice(points.begin() + static_cast<std::ptrdiff_t>(start),
                                   points.begin() + static_cast<std::ptrdiff_t>(end));
    const PointsForward fwd = forward_points(model, groups, graphs, views, slice, config.window,
                                             /*want_cache=*/false);
    const Eigen::MatrixXd scores = fuse(model.fusion, fwd.y_t, fwd.x_sel);
    const Eigen::MatrixXd probs = row_softmax(scores);
    const Eigen::MatrixXd cosines = normalized_rows(fwd.y_t) * job_emb_norm.transpose();

    for (std::size_t i = 0; i < slice.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const auto& view = views[slice[i].session];
      const auto truth = view.jobs[static_cast<std::size_t>(slice[i].cut)];
      const double truth_score =
          probs(row, labels[truth]) * cosines(row, static_cast<Eigen::Index>(truth));
      int rank = 1;
      for (std::size_t j = 0; j < dataset.jobs.size(); ++j) {
        if (j == truth) continue;
        const double s = probs(row, labels[j]) * cosines(row, static_cast<Eigen::Index>(j));
        if (s > truth_score || (s == truth_score && id_rank[j] < id_rank[truth])) ++rank;
      }
      const int recorded = rank <= k ? rank : 0;
      ranks.push_back(recorded);
      auto& rr = user_rr[dataset.users[view.user].id];
      rr.first += recorded > 0 ? 1.0 / recorded : 0.0;
      rr.second += 1;
    }
  }

  report.hit = hit_ratio(ranks, k);
  report.mrr = mrr(ranks, k);
  report.n_points = ranks.size();
  for (const auto& [uid, acc] : user_rr) {
    report.per_user_rr[uid] = acc.first / static_cast<double>(acc.second);
  }
  return report;
}

}  // namespace

Recommendation recommend_topk(const Bundle& bundle, const Model& model, std::size_t session_index,
                              std::size_t prefix_len, const RunConfig& config, int k) {
  const Dataset& dataset = *bundle.dataset;
  const GroupAssignments& groups = *bundle.groups;
  const auto views = make_session_views(dataset, groups);
  if (session_index >= views.size()) throw std::invalid_argument("recommend_topk: bad session");
  if (prefix_len == 0 || views[session_index].jobs.empty()) {
    throw std::invalid_argument("recommend_topk: session prefix is empty");
  }
  prefix_len = std::min(prefix_len, views[session_index].jobs.size());

  const std::vector<Point> points{{session_index, static_cast<int>(prefix_len)}};
  const PointsForward fwd = forward_points(model, groups, *bundle.graphs, views, points,
                                           config.window, /*want_cache=*/false);
  const Eigen::MatrixXd scores = fuse(model.fusion, fwd.y_t, fwd.x_sel);
  const Eigen::MatrixXd probs = row_softmax(scores);
  const Eigen::MatrixXd job_emb_norm = normalized_rows(groups.job_topics * model.emb_proj);
  const Eigen::MatrixXd cosines = normalized_rows(fwd.y_t) * job_emb_norm.transpose();

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(dataset.jobs.size());
  for (std::size_t j = 0; j < dataset.jobs.size(); ++j) {
    const double s =
        probs(0, dataset.jobs[j].label) * cosines(0, static_cast<Eigen::Index>(j));
    scored.emplace_back(dataset.jobs[j].id, s);
  }
  Recommendation rec;
  rec.user_id = dataset.sessions[session_index].user_id;
  rec.session_index = static_cast<int>(session_index);
  rec.ranked = rank_top_k(scored, k);
  return rec;
}

std::string eval_report_json(const EvalReport& report, const RunConfig& config) {
  nlohmann::json j;
  j["h_at_k"] = report.hit;
  j["m_at_k"] = report.mrr;
  j["k"] = report.k;
  j["n_points"] = report.n_points;
  nlohmann::json per_user = nlohmann::json::object();
  for (const auto& [uid, rr] : report.per_user_rr) per_user[uid] = rr;
  j["per_user_rr"] = per_user;
  nlohmann::json cfg = nlohmann::json::object();
  std::istringstream echo(config.echo());
  std::string line;
  while (std::getline(echo, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 1);
  }
  j["config"] = cfg;
  return j.dump(2) + "\n";
}

void save_checkpoint(const std::filesystem::path& path, Model& model, const AdamState& adam,
                     const RunConfig& config) {
  BinaryWriter w(path, kCheckpointMagic, 1);
  w.write_u64(config.hash());
  w.write_u64(config.seed);
  ParamRegistry reg = model.registry();
  w.write_u64(reg.entries.size());
  for (auto& [name, tensor] : reg.entries) {
    w.write_string(name);
    w.write_matrix(tensor);
  }
  w.write_i64(adam.step);
  w.write_f64(adam.config.lr);
  w.write_u64(adam.m.size());
  for (const auto& [name, m] : adam.m) {
    w.write_string(name);
    w.write_matrix(m.matrix());
    w.write_matrix(adam.v.at(name).matrix());
  }
  w.close();
}

void load_checkpoint(const std::filesystem::path& path, Model& model, AdamState& adam,
                     std::uint64_t expect_config_hash, bool* config_mismatch) {
  BinaryReader r(path, kCheckpointMagic, 1);
  const std::uint64_t hash = r.read_u64();
  if (config_mismatch) *config_mismatch = hash != expect_config_hash;
  r.read_u64();  // seed, informational
  ParamRegistry reg = model.registry();
  const std::uint64_t n = r.read_u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string name = r.read_string();
    const Eigen::MatrixXd value = r.read_matrix();
    auto* view = reg.find(name);
    if (view == nullptr) throw std::runtime_error(path.string() + ": unknown tensor " + name);
    if (view->rows() != value.rows() || view->cols() != value.cols()) {
      throw std::runtime_error(path.string() + ": shape mismatch for tensor " + name);
    }
    *view = value;
  }
  adam.step = r.read_i64();
  adam.config.lr = r.read_f64();
  adam.m.clear();
  adam.v.clear();
  const std::uint64_t slots = r.read_u64();
  for (std::uint64_t i = 0; i < slots; ++i) {
    const std::string name = r.read_string();
    adam.m.emplace(name, r.read_matrix().array());
    adam.v.emplace(name, r.read_matrix().array());
  }
}

void write_metric_trace(const std::vector<EpochStats>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << "epoch,train_loss,val_hit,val_mrr\n";
  out.precision(17);
  for (const auto& row : trace) {
    out << row.epoch << "," << row.train_loss << "," << row.val_hit << "," << row.val_mrr << "\n";
  }
}

}  // namespace driftrec
