#include "driftrec/topics.hpp"

#include "driftrec/rng.hpp"
#include "driftrec/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace driftrec {

namespace {

constexpr char kTopicMagic[8] = {'D', 'R', 'T', 'O', 'P', 'I', 'C', '1'};

void normalize_rows_with_floor(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double sum = m.row(r).sum();
    if (sum < kProbFloor) {
      m.row(r).setConstant(1.0 / static_cast<double>(m.cols()));
    } else {
      m.row(r) /= sum;
    }
  }
}

}  // namespace

Corpus Corpus::from_documents(std::span<const Document> documents) {
  Corpus c;
  for (const auto& doc : documents) {
    c.doc_ids.push_back(doc.id);
    std::vector<std::pair<int, double>> entries;
    entries.reserve(doc.token_counts.size());
    for (const auto& [token, count] : doc.token_counts) {
      auto found = c.vocab_index.find(token);
      int col;
      if (found == c.vocab_index.end()) {
        col = static_cast<int>(c.vocab.size());
        c.vocab_index.emplace(token, col);
        c.vocab.push_back(token);
      } else {
        col = found->second;
      }
      entries.emplace_back(col, static_cast<double>(count));
    }
    c.docs.push_back(std::move(entries));
  }
  return c;
}

double Corpus::total_count() const {
  double total = 0;
  for (const auto& doc : docs) {
    for (const auto& [w, f] : doc) total += f;
  }
  return total;
}

Posterior e_step(const TopicModel& model, const Corpus& corpus) {
  const int K = model.n_topics;
  Posterior post;
  post.n_topics = K;
  std::size_t nnz = 0;
  for (const auto& doc : corpus.docs) {
    post.doc_offsets.push_back(nnz);
    nnz += doc.size();
  }
  post.values.resize(nnz * static_cast<std::size_t>(K));

  std::vector<double> pzd_row(K);
  double* out = post.values.data();
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    for (int z = 0; z < K; ++z) pzd_row[z] = model.topic_given_doc(static_cast<Eigen::Index>(d), z);
    for (const auto& [w, f] : corpus.docs[d]) {
      (void)f;
      double denom = 0;
      for (int z = 0; z < K; ++z) {
        const double v = model.word_given_topic(z, w) * pzd_row[z];
        out[z] = v;
        denom += v;
      }
      if (denom < kProbFloor) {
        for (int z = 0; z < K; ++z) out[z] = 1.0 / K;
      } else {
        for (int z = 0; z < K; ++z) out[z] /= denom;
      }
      out += K;
    }
  }
  return post;
}

TopicModel m_step(const Posterior& posterior, const Corpus& corpus, const TopicModel& like) {
  const int K = like.n_topics;
  const auto V = static_cast<Eigen::Index>(corpus.vocab.size());
  const auto D = static_cast<Eigen::Index>(corpus.docs.size());

  TopicModel next = like;
  next.word_given_topic = Eigen::MatrixXd::Zero(K, V);
  next.topic_given_doc = Eigen::MatrixXd::Zero(D, K);

  const double* p = posterior.values.data();
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    for (const auto& [w, f] : corpus.docs[d]) {
      for (int z = 0; z < K; ++z) {
        const double m = f * p[z];
        next.word_given_topic(z, w) += m;
        next.topic_given_doc(static_cast<Eigen::Index>(d), z) += m;
      }
      p += K;
    }
  }
  normalize_rows_with_floor(next.word_given_topic);
  normalize_rows_with_floor(next.topic_given_doc);
  return next;
}

double log_likelihood(const TopicModel& model, const Corpus& corpus) {
  const int K = model.n_topics;
  const double total = corpus.total_count();
  double ll = 0;
  std::vector<double> pzd_row(K);
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    double doc_len = 0;
    for (const auto& [w, f] : corpus.docs[d]) {
      (void)w;
      doc_len += f;
    }
    const double p_doc = total > 0 ? doc_len / total : 1.0;
    for (int z = 0; z < K; ++z) pzd_row[z] = model.topic_given_doc(static_cast<Eigen::Index>(d), z);
    for (const auto& [w, f] : corpus.docs[d]) {
      double mix = 0;
      for (int z = 0; z < K; ++z) mix += model.word_given_topic(z, w) * pzd_row[z];
      ll += f * std::log(std::max(p_doc * mix, kProbFloor));
    }
  }
  return ll;
}

TopicModel em_fit(const Corpus& corpus, int n_topics, int max_iters, double tol,
                  std::uint64_t seed, EmTrace* trace) {
  if (n_topics < 1) throw std::invalid_argument("em_fit: n_topics must be >= 1");
  if (corpus.docs.empty()) throw std::invalid_argument("em_fit: empty corpus");
  if (corpus.vocab.empty()) throw std::invalid_argument("em_fit: empty vocabulary");

  const int K = n_topics;
  const auto V = static_cast<Eigen::Index>(corpus.vocab.size());
  const auto D = static_cast<Eigen::Index>(corpus.docs.size());

  TopicModel model;
  model.n_topics = K;
  model.vocab = corpus.vocab;
  model.vocab_index = corpus.vocab_index;
  model.doc_ids = corpus.doc_ids;
  for (std::size_t i = 0; i < corpus.doc_ids.size(); ++i) {
    model.doc_index[corpus.doc_ids[i]] = static_cast<int>(i);
  }

  // Dirichlet(1) rows: normalized Exp(1) draws.
  RngStream rng(seed);
  model.word_given_topic.resize(K, V);
  for (Eigen::Index z = 0; z < K; ++z) {
    for (Eigen::Index w = 0; w < V; ++w) model.word_given_topic(z, w) = rng.exponential(1.0);
  }
  model.topic_given_doc.resize(D, K);
  for (Eigen::Index d = 0; d < D; ++d) {
    for (Eigen::Index z = 0; z < K; ++z) model.topic_given_doc(d, z) = rng.exponential(1.0);
  }
  normalize_rows_with_floor(model.word_given_topic);
  normalize_rows_with_floor(model.topic_given_doc);

  const double total = corpus.total_count();
  EmTrace local_trace;

  // Fused E+M sweep: accumulates the M-step statistics while scoring the
  // current model, so the responsibilities are never materialized. A unit
  // test pins this against the explicit e_step/m_step pair.
  Eigen::MatrixXd acc_wz(K, V);
  Eigen::MatrixXd acc_zd(D, K);
  std::vector<double> pzd_row(K), resp(K);
  double prev_ll = 0;
  for (int iter = 0; iter < max_iters; ++iter) {
    acc_wz.setZero();
    acc_zd.setZero();
    double ll = 0;
    for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
      double doc_len = 0;
      for (const auto& [w, f] : corpus.docs[d]) {
        (void)w;
        doc_len += f;
      }
      const double p_doc = total > 0 ? doc_len / total : 1.0;
      for (int z = 0; z < K; ++z) {
        pzd_row[z] = model.topic_given_doc(static_cast<Eigen::Index>(d), z);
      }
      for (const auto& [w, f] : corpus.docs[d]) {
        double denom = 0;
        for (int z = 0; z < K; ++z) {
          const double v = model.word_given_topic(z, w) * pzd_row[z];
          resp[z] = v;
          denom += v;
        }
        ll += f * std::log(std::max(p_doc * denom, kProbFloor));
        if (denom < kProbFloor) {
          for (int z = 0; z < K; ++z) resp[z] = 1.0 / K;
        } else {
          for (int z = 0; z < K; ++z) resp[z] /= denom;
        }
        for (int z = 0; z < K; ++z) {
          const double m = f * resp[z];
          acc_wz(z, w) += m;
          acc_zd(static_cast<Eigen::Index>(d), z) += m;
        }
      }
    }
    model.word_given_topic = acc_wz;
    model.topic_given_doc = acc_zd;
    normalize_rows_with_floor(model.word_given_topic);
    normalize_rows_with_floor(model.topic_given_doc);

    local_trace.log_likelihood.push_back(ll);
    if (iter > 0 && std::abs(ll - prev_ll) < tol * std::abs(prev_ll)) {
      local_trace.converged = true;
      break;
    }
    prev_ll = ll;
  }
  if (trace) *trace = std::move(local_trace);
  return model;
}

FoldInResult fold_in(const TopicModel& model, const Document& doc, int iters) {
  const int K = model.n_topics;
  FoldInResult result;
  result.topics = Eigen::VectorXd::Constant(K, 1.0 / K);

  std::vector<std::pair<int, double>> entries;
  for (const auto& [token, count] : doc.token_counts) {
    auto found = model.vocab_index.find(token);
    if (found != model.vocab_index.end()) {
      entries.emplace_back(found->second, static_cast<double>(count));
    }
  }
  if (entries.empty()) {
    result.all_oov = true;
    return result;
  }

  std::vector<double> resp(K), acc(K);
  for (int iter = 0; iter < iters; ++iter) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& [w, f] : entries) {
      double denom = 0;
      for (int z = 0; z < K; ++z) {
        const double v = model.word_given_topic(z, w) * result.topics(z);
        resp[z] = v;
        denom += v;
      }
      if (denom < kProbFloor) {
        for (int z = 0; z < K; ++z) resp[z] = 1.0 / K;
      } else {
        for (int z = 0; z < K; ++z) resp[z] /= denom;
      }
      for (int z = 0; z < K; ++z) acc[z] += f * resp[z];
    }
    double sum = 0;
    for (double v : acc) sum += v;
    if (sum < kProbFloor) {
      result.topics.setConstant(1.0 / K);
    } else {
      for (int z = 0; z < K; ++z) result.topics(z) = acc[z] / sum;
    }
  }
  return result;
}

void save_topic_model(const TopicModel& model, const std::filesystem::path& path) {
  BinaryWriter w(path, kTopicMagic, 1);
  w.write_u32(static_cast<std::uint32_t>(model.n_topics));
  w.write_u64(model.vocab.size());
  for (const auto& s : model.vocab) w.write_string(s);
  w.write_u64(model.doc_ids.size());
  for (const auto& s : model.doc_ids) w.write_string(s);
  w.write_matrix(model.word_given_topic);
  w.write_matrix(model.topic_given_doc);
  w.close();
}

TopicModel load_topic_model(const std::filesystem::path& path) {
  BinaryReader r(path, kTopicMagic, 1);
  TopicModel model;
  model.n_topics = static_cast<int>(r.read_u32());
  const std::uint64_t v = r.read_u64();
  for (std::uint64_t i = 0; i < v; ++i) model.vocab.push_back(r.read_string());
  const std::uint64_t d = r.read_u64();
  for (std::uint64_t i = 0; i < d; ++i) model.doc_ids.push_back(r.read_string());
  model.word_given_topic = r.read_matrix();
  model.topic_given_doc = r.read_matrix();
  for (std::size_t i = 0; i < model.vocab.size(); ++i) {
    model.vocab_index[model.vocab[i]] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < model.doc_ids.size(); ++i) {
    model.doc_index[model.doc_ids[i]] = static_cast<int>(i);
  }
  return model;
}

std::vector<std::vector<std::string>> top_words(const TopicModel& model, int per_topic) {
  std::vector<std::vector<std::string>> result;
  for (int z = 0; z < model.n_topics; ++z) {
    std::vector<int> order(model.vocab.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double pa = model.word_given_topic(z, a);
      const double pb = model.word_given_topic(z, b);
      if (pa != pb) return pa > pb;
      return model.vocab[a] < model.vocab[b];
    });
    std::vector<std::string> words;
    for (int i = 0; i < per_topic && i < static_cast<int>(order.size()); ++i) {
      words.push_back(model.vocab[order[i]]);
    }
    result.push_back(std::move(words));
  }
  return result;
}

}  // namespace driftrec
