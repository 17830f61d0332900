#include "driftrec/topics.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace driftrec;
namespace oracle = driftrec::testing;

namespace {

Document doc(const std::string& id, std::map<std::string, int> counts) {
  return Document{id, std::move(counts)};
}

// Two docs over two words with asymmetric counts.
Corpus toy_corpus() {
  std::vector<Document> docs{doc("d0", {{"aa", 3}, {"bb", 1}}), doc("d1", {{"aa", 1}, {"bb", 4}})};
  return Corpus::from_documents(docs);
}

Eigen::MatrixXd dense_counts(const Corpus& corpus) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(corpus.docs.size()),
                                                 static_cast<Eigen::Index>(corpus.vocab.size()));
  for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
    for (const auto& [w, f] : corpus.docs[d]) counts(static_cast<Eigen::Index>(d), w) = f;
  }
  return counts;
}

}  // namespace

TEST_CASE("e_step matches the defining ratio") {
  SUBCASE("single topic: posterior is [1]") {
    const Corpus corpus = toy_corpus();
    TopicModel model;
    model.n_topics = 1;
    model.word_given_topic = Eigen::MatrixXd::Constant(1, 2, 0.5);
    model.topic_given_doc = Eigen::MatrixXd::Constant(2, 1, 1.0);
    const Posterior post = e_step(model, corpus);
    CHECK(post.at(0, 0)[0] == doctest::Approx(1.0));
    CHECK(post.at(1, 1)[0] == doctest::Approx(1.0));
  }

  SUBCASE("two topics, hand-computed ratio") {
    // P(w0|z) = [.5, .9], P(z|d0) = [.5, .5] -> posterior [0.3571, 0.6429]
    std::vector<Document> docs{doc("d0", {{"w0", 1}})};
    const Corpus corpus = Corpus::from_documents(docs);
    TopicModel model;
    model.n_topics = 2;
    model.word_given_topic.resize(2, 1);
    model.word_given_topic << 0.5, 0.9;
    model.topic_given_doc.resize(1, 2);
    model.topic_given_doc << 0.5, 0.5;
    const Posterior post = e_step(model, corpus);
    CHECK(post.at(0, 0)[0] == doctest::Approx(0.25 / 0.70).epsilon(1e-9));
    CHECK(post.at(0, 0)[1] == doctest::Approx(0.45 / 0.70).epsilon(1e-9));
  }

  SUBCASE("uniform model gives uniform posterior") {
    const Corpus corpus = toy_corpus();
    TopicModel model;
    model.n_topics = 4;
    model.word_given_topic = Eigen::MatrixXd::Constant(4, 2, 0.5);
    model.topic_given_doc = Eigen::MatrixXd::Constant(2, 4, 0.25);
    const Posterior post = e_step(model, corpus);
    for (int z = 0; z < 4; ++z) CHECK(post.at(0, 0)[z] == doctest::Approx(0.25));
  }
}

TEST_CASE("m_step degenerate cases") {
  SUBCASE("one doc, one word, one topic") {
    std::vector<Document> docs{doc("d0", {{"solo", 2}})};
    const Corpus corpus = Corpus::from_documents(docs);
    TopicModel model;
    model.n_topics = 1;
    model.word_given_topic = Eigen::MatrixXd::Constant(1, 1, 1.0);
    model.topic_given_doc = Eigen::MatrixXd::Constant(1, 1, 1.0);
    const TopicModel next = m_step(e_step(model, corpus), corpus, model);
    CHECK(next.word_given_topic(0, 0) == doctest::Approx(1.0));
    CHECK(next.topic_given_doc(0, 0) == doctest::Approx(1.0));
  }

  SUBCASE("posterior mass all on topic 0 forces P(z=0|d)=1") {
    const Corpus corpus = toy_corpus();
    TopicModel model;
    model.n_topics = 2;
    model.word_given_topic.resize(2, 2);
    model.word_given_topic << 0.5, 0.5, 0.5, 0.5;
    model.topic_given_doc.resize(2, 2);
    model.topic_given_doc << 1.0, 0.0, 1.0, 0.0;  // only topic 0 has mass
    const TopicModel next = m_step(e_step(model, corpus), corpus, model);
    CHECK(next.topic_given_doc(0, 0) == doctest::Approx(1.0));
    CHECK(next.topic_given_doc(1, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("one EM cycle matches the dense reference to 1e-12") {
  const Corpus corpus = toy_corpus();
  const Eigen::MatrixXd counts = dense_counts(corpus);

  TopicModel model;
  model.n_topics = 2;
  model.word_given_topic.resize(2, 2);
  model.word_given_topic << 0.7, 0.3, 0.2, 0.8;
  model.topic_given_doc.resize(2, 2);
  model.topic_given_doc << 0.6, 0.4, 0.1, 0.9;

  oracle::DensePlsa reference{model.word_given_topic, model.topic_given_doc};
  const oracle::DensePlsa expected = oracle::plsa_reference_cycle(reference, counts);
  const TopicModel got = m_step(e_step(model, corpus), corpus, model);

  CHECK((got.word_given_topic - expected.word_given_topic).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((got.topic_given_doc - expected.topic_given_doc).cwiseAbs().maxCoeff() < 1e-12);

  CHECK(log_likelihood(model, corpus) ==
        doctest::Approx(oracle::plsa_reference_log_likelihood(reference, counts)).epsilon(1e-12));
}

TEST_CASE("log_likelihood corner cases") {
  SUBCASE("single doc and word gives zero") {
    std::vector<Document> docs{doc("d0", {{"solo", 5}})};
    const Corpus corpus = Corpus::from_documents(docs);
    TopicModel model;
    model.n_topics = 1;
    model.word_given_topic = Eigen::MatrixXd::Constant(1, 1, 1.0);
    model.topic_given_doc = Eigen::MatrixXd::Constant(1, 1, 1.0);
    CHECK(log_likelihood(model, corpus) == doctest::Approx(0.0));
  }

  SUBCASE("zero probabilities stay finite through the floor") {
    const Corpus corpus = toy_corpus();
    TopicModel model;
    model.n_topics = 1;
    model.word_given_topic = Eigen::MatrixXd::Zero(1, 2);
    model.topic_given_doc = Eigen::MatrixXd::Constant(2, 1, 1.0);
    CHECK(std::isfinite(log_likelihood(model, corpus)));
  }
}

TEST_CASE("em_fit: monotone likelihood, normalized rows") {
  std::vector<Document> docs;
  for (int d = 0; d < 12; ++d) {
    std::map<std::string, int> counts;
    for (int w = 0; w < 6; ++w) {
      if ((d + w) % 3 != 0) counts["w" + std::to_string(w)] = 1 + (d * w) % 4;
    }
    docs.push_back(doc("d" + std::to_string(d), std::move(counts)));
  }
  const Corpus corpus = Corpus::from_documents(docs);

  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    EmTrace trace;
    const TopicModel model = em_fit(corpus, 3, 60, 1e-9, seed, &trace);
    REQUIRE(trace.log_likelihood.size() >= 2);
    for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i) {
      CHECK(trace.log_likelihood[i] >= trace.log_likelihood[i - 1] - 1e-9);
    }
    for (Eigen::Index z = 0; z < 3; ++z) {
      CHECK(model.word_given_topic.row(z).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (Eigen::Index d = 0; d < model.topic_given_doc.rows(); ++d) {
      CHECK(model.topic_given_doc.row(d).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("em_fit identical docs with one topic reaches the unigram likelihood") {
  std::vector<Document> docs;
  for (int d = 0; d < 4; ++d) docs.push_back(doc("d" + std::to_string(d), {{"aa", 2}, {"bb", 1}}));
  const Corpus corpus = Corpus::from_documents(docs);

  EmTrace trace;
  em_fit(corpus, 1, 10, 1e-12, 7, &trace);
  // f * log(P(d) * unigram): each doc has P(d) = 1/4, unigram = (2/3, 1/3)
  double expected = 0;
  for (int d = 0; d < 4; ++d) {
    expected += 2 * std::log(0.25 * 2.0 / 3.0) + 1 * std::log(0.25 * 1.0 / 3.0);
  }
  REQUIRE(trace.log_likelihood.size() >= 2);
  // after one full cycle the parameters are exact
  CHECK(trace.log_likelihood[1] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("em_fit rejects empty inputs") {
  CHECK_THROWS_AS(em_fit(Corpus{}, 2, 10, 1e-6, 1), std::invalid_argument);
  std::vector<Document> docs{doc("d0", {})};
  const Corpus corpus = Corpus::from_documents(docs);
  CHECK_THROWS_AS(em_fit(corpus, 2, 10, 1e-6, 1), std::invalid_argument);
}

TEST_CASE("fold_in") {
  std::vector<Document> docs;
  for (int d = 0; d < 6; ++d) {
    std::map<std::string, int> counts;
    counts["topic" + std::to_string(d % 2)] = 5;
    counts["shared"] = 1;
    docs.push_back(doc("d" + std::to_string(d), std::move(counts)));
  }
  const Corpus corpus = Corpus::from_documents(docs);
  const TopicModel model = em_fit(corpus, 2, 100, 1e-10, 11);

  SUBCASE("a training document folds back close to its trained row") {
    const Eigen::MatrixXd before = model.word_given_topic;
    const FoldInResult result = fold_in(model, docs[0], 10);
    CHECK_FALSE(result.all_oov);
    const double l1 = (result.topics.transpose() - model.topic_given_doc.row(0)).cwiseAbs().sum();
    CHECK(l1 < 0.05);
    // fold_in never touches the model
    CHECK((model.word_given_topic - before).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("all-OOV document gets the uniform vector and a flag") {
    const FoldInResult result = fold_in(model, doc("x", {{"unseen", 3}}), 10);
    CHECK(result.all_oov);
    CHECK(result.topics(0) == doctest::Approx(0.5));
    CHECK(result.topics(1) == doctest::Approx(0.5));
  }

  SUBCASE("single topic folds to [1]") {
    const TopicModel k1 = em_fit(corpus, 1, 10, 1e-6, 3);
    const FoldInResult result = fold_in(k1, docs[0], 5);
    CHECK(result.topics(0) == doctest::Approx(1.0));
  }
}

TEST_CASE("topic model serialization round-trip") {
  std::vector<Document> docs{doc("d0", {{"aa", 3}, {"bb", 1}}), doc("d1", {{"cc", 2}})};
  const Corpus corpus = Corpus::from_documents(docs);
  const TopicModel model = em_fit(corpus, 2, 20, 1e-8, 5);

  const auto path = std::filesystem::temp_directory_path() / "driftrec_topics_test.bin";
  save_topic_model(model, path);
  const TopicModel loaded = load_topic_model(path);
  std::filesystem::remove(path);

  CHECK(loaded.n_topics == model.n_topics);
  CHECK(loaded.vocab == model.vocab);
  CHECK(loaded.doc_ids == model.doc_ids);
  CHECK((loaded.word_given_topic - model.word_given_topic).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.topic_given_doc - model.topic_given_doc).cwiseAbs().maxCoeff() == 0.0);

  const auto words = top_words(model, 2);
  CHECK(words.size() == 2);
  CHECK(words[0].size() == 2);
}

TEST_CASE("em_fit is deterministic per seed") {
  const Corpus corpus = toy_corpus();
  const TopicModel a = em_fit(corpus, 2, 30, 1e-8, 42);
  const TopicModel b = em_fit(corpus, 2, 30, 1e-8, 42);
  CHECK((a.word_given_topic - b.word_given_topic).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.topic_given_doc - b.topic_given_doc).cwiseAbs().maxCoeff() == 0.0);
}
