#pragma once

#include "driftrec/data_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace driftrec {

// Bag-of-words corpus in column-index form.
struct Corpus {
  std::vector<std::string> doc_ids;
  std::vector<std::vector<std::pair<int, double>>> docs;  // (word column, count)
  std::vector<std::string> vocab;
  std::unordered_map<std::string, int> vocab_index;

  static Corpus from_documents(std::span<const Document> documents);
  double total_count() const;
};

struct TopicModel {
  int n_topics = 0;
  Eigen::MatrixXd word_given_topic;  // [K x V], rows sum to 1
  Eigen::MatrixXd topic_given_doc;   // [D x K], rows sum to 1
  std::vector<std::string> vocab;
  std::unordered_map<std::string, int> vocab_index;
  std::vector<std::string> doc_ids;
  std::unordered_map<std::string, int> doc_index;
};

// Responsibilities P(z|w,d), stored only for (d,w) pairs with f(d,w) > 0,
// laid out doc-major in the corpus nonzero order.
struct Posterior {
  int n_topics = 0;
  std::vector<std::size_t> doc_offsets;  // per doc, offset into values in units of K
  std::vector<double> values;            // nnz * K

  const double* at(std::size_t doc, std::size_t nz_index) const {
    return values.data() + (doc_offsets[doc] + nz_index) * static_cast<std::size_t>(n_topics);
  }
};

struct EmTrace {
  std::vector<double> log_likelihood;  // one entry per EM iteration
  bool converged = false;
};

constexpr double kProbFloor = 1e-12;

Posterior e_step(const TopicModel& model, const Corpus& corpus);
TopicModel m_step(const Posterior& posterior, const Corpus& corpus, const TopicModel& like);
double log_likelihood(const TopicModel& model, const Corpus& corpus);

// Alternates E and M steps until |dL| < tol * |L| or max_iters. Initial rows
// are Dirichlet(1) draws from the seeded stream.
TopicModel em_fit(const Corpus& corpus, int n_topics, int max_iters, double tol,
                  std::uint64_t seed, EmTrace* trace = nullptr);

struct FoldInResult {
  Eigen::VectorXd topics;
  bool all_oov = false;
};

// P(z|d') for an unseen document, holding the word-topic rows fixed.
FoldInResult fold_in(const TopicModel& model, const Document& doc, int iters = 10);

void save_topic_model(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_topic_model(const std::filesystem::path& path);

// Top words per topic by P(w|z), for the `topics dump` command.
std::vector<std::vector<std::string>> top_words(const TopicModel& model, int per_topic = 10);

}  // namespace driftrec
