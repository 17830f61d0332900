#include "driftrec/synthgen.hpp"

#include "driftrec/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace driftrec {

using nlohmann::json;

GenConfig GenConfig::from_run_config(const RunConfig& run) {
  GenConfig g;
  g.n_users = run.n_users;
  g.n_jobs = run.n_jobs;
  g.n_topics = run.n_topics;
  g.vocab_size = run.vocab_size;
  g.n_attrs = run.n_attrs;
  g.doc_tokens = run.doc_tokens;
  g.mean_session_len = run.mean_session_len;
  g.mean_revision_gap_days = run.revision_gap_days;
  g.drift_prob_on_revision = run.drift_prob;
  g.noise_pct = run.noise_pct;
  g.horizon_days = run.horizon_days;
  g.seed = run.seed;
  return g;
}

namespace {

constexpr double kDaySeconds = 86400.0;
constexpr const char* kKinds[] = {"browse", "click", "chat", "apply"};

std::string padded_id(char prefix, int index, int width) {
  std::string digits = std::to_string(index);
  std::string out(1, prefix);
  out.append(static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0');
  out += digits;
  return out;
}

int id_width(int count) {
  int width = 1;
  for (int v = count - 1; v >= 10; v /= 10) ++width;
  return width;
}

struct VocabLayout {
  int block_size;  // words per topic block; the remainder is generic filler
  int vocab_size;
  int n_topics;

  int topic_word(int topic, double u) const {
    return topic * block_size + static_cast<int>(u * block_size) % block_size;
  }
  int any_word(double u) const { return static_cast<int>(u * vocab_size) % vocab_size; }
};

std::string make_document(const VocabLayout& vocab, int topic, double off_topic_fraction,
                          int n_tokens, int token_width, RngStream& rng) {
  std::string text;
  for (int i = 0; i < n_tokens; ++i) {
    const int word = rng.uniform() < off_topic_fraction ? vocab.any_word(rng.uniform())
                                                        : vocab.topic_word(topic, rng.uniform());
    if (i > 0) text += ' ';
    text += padded_id('w', word, token_width);
  }
  return text;
}

}  // namespace

SynthResult generate(const GenConfig& config) {
  if (config.n_users < 1 || config.n_jobs < 1 || config.n_topics < 1) {
    throw std::invalid_argument("generate: counts must be >= 1");
  }
  if (config.vocab_size < config.n_topics) {
    throw std::invalid_argument("generate: vocab_size must be >= n_topics");
  }
  if (config.noise_pct < 0 || config.noise_pct >= 1) {
    throw std::invalid_argument("generate: noise_pct must be in [0,1)");
  }

  RngStream root(config.seed);
  RngStream world = root.fork("world");
  RngStream noise = root.fork("noise");

  const VocabLayout vocab{config.vocab_size / config.n_topics, config.vocab_size,
                          config.n_topics};
  const int token_width = id_width(config.vocab_size);
  const int user_width = id_width(config.n_users);
  const int job_width = id_width(config.n_jobs);
  const auto horizon_sec =
      static_cast<std::int64_t>(std::floor(config.horizon_days * kDaySeconds));

  std::ostringstream jobs_out, resumes_out, interactions_out, truth_out;
  GroundTruth truth;

  // Jobs: topic assigned round-robin so every position class is populated.
  std::vector<std::vector<int>> jobs_of_topic(static_cast<std::size_t>(config.n_topics));
  std::vector<std::string> job_ids;
  for (int j = 0; j < config.n_jobs; ++j) {
    const int topic = j % config.n_topics;
    jobs_of_topic[static_cast<std::size_t>(topic)].push_back(j);
    job_ids.push_back(padded_id('j', j, job_width));

    json line;
    line["job"] = job_ids.back();
    line["text"] = make_document(vocab, topic, 0.10, config.doc_tokens, token_width, world);
    json attrs = json::array();
    for (int a = 0; a < config.n_attrs; ++a) attrs.push_back(world.uniform());
    line["attrs"] = attrs;
    line["label"] = topic;
    jobs_out << line.dump() << "\n";
  }

  auto pick_consistent_job = [&](int topic, RngStream& rng) {
    const auto& pool = jobs_of_topic[static_cast<std::size_t>(topic)];
    return pool[rng.uniform_index(pool.size())];
  };
  auto pick_noisy_job = [&](int pref_topic, RngStream& rng) {
    if (config.n_topics == 1) return pick_consistent_job(0, rng);
    int topic = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(config.n_topics - 1)));
    if (topic >= pref_topic) ++topic;
    while (jobs_of_topic[static_cast<std::size_t>(topic)].empty()) {
      topic = (topic + 1) % config.n_topics;  // only possible when n_jobs < n_topics
    }
    return pick_consistent_job(topic, rng);
  };

  // Noise is additive: every consistent interaction spawns
  // noise_pct/(1-noise_pct) noisy companions in expectation, which makes the
  // noisy fraction of the final dataset equal noise_pct.
  const double insertions_per_base = config.noise_pct / (1.0 - config.noise_pct);

  struct PendingInteraction {
    std::int64_t ts;
    int job;
    const char* kind;
    bool noisy;
  };

  for (int u = 0; u < config.n_users; ++u) {
    const std::string uid = padded_id('u', u, user_width);

    // resume revision clock
    std::vector<std::int64_t> version_sec{0};
    double clock = 0;
    for (;;) {
      clock += world.exponential(config.mean_revision_gap_days * kDaySeconds);
      const auto sec = static_cast<std::int64_t>(std::floor(clock));
      if (sec >= horizon_sec) break;
      version_sec.push_back(std::max(version_sec.back() + 1, sec));
    }

    // preferred topic per version
    std::vector<int> prefs;
    prefs.push_back(static_cast<int>(world.uniform_index(static_cast<std::size_t>(config.n_topics))));
    for (std::size_t v = 1; v < version_sec.size(); ++v) {
      int next = prefs.back();
      if (config.n_topics > 1 && world.uniform() < config.drift_prob_on_revision) {
        int t = static_cast<int>(world.uniform_index(static_cast<std::size_t>(config.n_topics - 1)));
        if (t >= next) ++t;
        next = t;
      }
      prefs.push_back(next);
    }
    truth.pref_topics[uid] = prefs;

    // user attributes (shared across versions)
    json attrs = json::array();
    for (int a = 0; a < config.n_attrs; ++a) attrs.push_back(world.uniform());

    for (std::size_t v = 0; v < version_sec.size(); ++v) {
      json resume;
      resume["user"] = uid;
      resume["ts"] = version_sec[v];
      resume["text"] =
          make_document(vocab, prefs[v], 0.20, config.doc_tokens, token_width, world);
      resume["attrs"] = attrs;
      resumes_out << resume.dump() << "\n";

      json pref_line;
      pref_line["type"] = "pref";
      pref_line["user"] = uid;
      pref_line["ts"] = version_sec[v];
      pref_line["pref_topic"] = prefs[v];
      truth_out << pref_line.dump() << "\n";
    }

    // sessions: one per version interval
    for (std::size_t v = 0; v < version_sec.size(); ++v) {
      const std::int64_t lo = version_sec[v];
      const std::int64_t hi = (v + 1 < version_sec.size()) ? version_sec[v + 1] : horizon_sec;
      const int base_count = 1 + world.poisson(std::max(0.0, config.mean_session_len - 1.0));

      std::vector<PendingInteraction> pending;
      for (int i = 0; i < base_count; ++i) {
        PendingInteraction it;
        it.ts = std::max<std::int64_t>(
            lo, static_cast<std::int64_t>(
                    std::floor(world.uniform(static_cast<double>(lo), static_cast<double>(hi)))));
        it.job = pick_consistent_job(prefs[v], world);
        it.kind = kKinds[world.uniform_index(4)];
        it.noisy = false;
        pending.push_back(it);

        int extra = static_cast<int>(std::floor(insertions_per_base));
        if (noise.uniform() < insertions_per_base - std::floor(insertions_per_base)) ++extra;
        for (int e = 0; e < extra; ++e) {
          PendingInteraction n;
          n.ts = std::max<std::int64_t>(
              lo, static_cast<std::int64_t>(
                      std::floor(noise.uniform(static_cast<double>(lo), static_cast<double>(hi)))));
          n.job = pick_noisy_job(prefs[v], noise);
          n.kind = kKinds[noise.uniform_index(4)];
          n.noisy = true;
          pending.push_back(n);
        }
      }

      for (const auto& it : pending) {
        json line;
        line["user"] = uid;
        line["job"] = job_ids[static_cast<std::size_t>(it.job)];
        line["ts"] = it.ts;
        line["kind"] = it.kind;
        interactions_out << line.dump() << "\n";

        json gt;
        gt["type"] = "interaction";
        gt["user"] = uid;
        gt["job"] = job_ids[static_cast<std::size_t>(it.job)];
        gt["ts"] = it.ts;
        gt["noisy"] = it.noisy;
        truth_out << gt.dump() << "\n";

        truth.noisy.push_back(it.noisy);
      }
    }
  }

  SynthResult result;
  result.interactions_jsonl = interactions_out.str();
  result.resumes_jsonl = resumes_out.str();
  result.jobs_jsonl = jobs_out.str();
  result.ground_truth_jsonl = truth_out.str();
  result.truth = std::move(truth);

  std::istringstream ii(result.interactions_jsonl);
  std::istringstream ri(result.resumes_jsonl);
  std::istringstream ji(result.jobs_jsonl);
  IngestReport report;
  result.dataset = ingest_streams(ii, ri, ji, &report, "<synthetic>");
  if (report.malformed_lines != 0) {
    throw std::logic_error("generate: emitted malformed lines");
  }
  return result;
}

std::vector<SynthResult> noise_sweep(GenConfig base, const std::vector<double>& rhos) {
  for (std::size_t i = 1; i < rhos.size(); ++i) {
    if (rhos[i] < rhos[i - 1]) throw std::invalid_argument("noise_sweep: rhos must be sorted");
  }
  std::vector<SynthResult> out;
  for (double rho : rhos) {
    base.noise_pct = rho;
    out.push_back(generate(base));
  }
  return out;
}

void write_files(const SynthResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto dump = [&](const char* name, const std::string& payload) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error((dir / name).string() + ": cannot open for writing");
    out << payload;
  };
  dump("interactions.jsonl", result.interactions_jsonl);
  dump("resumes.jsonl", result.resumes_jsonl);
  dump("jobs.jsonl", result.jobs_jsonl);
  dump("ground_truth.jsonl", result.ground_truth_jsonl);
}

GroundTruth read_ground_truth(const std::filesystem::path& file, const Dataset& dataset) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error(file.string() + ": cannot open");
  GroundTruth truth;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "pref") {
      truth.pref_topics[j.at("user").get<std::string>()].push_back(j.at("pref_topic").get<int>());
    } else if (type == "interaction") {
      truth.noisy.push_back(j.at("noisy").get<bool>());
    } else {
      throw std::runtime_error(file.string() + ": unknown ground-truth record type " + type);
    }
  }
  if (truth.noisy.size() != dataset.interactions.size()) {
    throw std::runtime_error(file.string() + ": interaction flag count does not match dataset");
  }
  return truth;
}

}  // namespace driftrec
