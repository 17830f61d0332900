#pragma once

#include "driftrec/config.hpp"
#include "driftrec/data_model.hpp"

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace driftrec {

struct GenConfig {
  int n_users = 2000;
  int n_jobs = 1000;
  int n_topics = 20;
  int vocab_size = 2000;
  int n_attrs = 2;
  int doc_tokens = 40;
  double mean_session_len = 20.0;
  double mean_revision_gap_days = 7.28;
  double drift_prob_on_revision = 0.77;
  double noise_pct = 0.0;  // rho: target fraction of noisy interactions
  double horizon_days = 42.0;
  std::uint64_t seed = 1;

  static GenConfig from_run_config(const RunConfig& run);
};

struct GroundTruth {
  // user id -> preferred topic per resume version
  std::unordered_map<std::string, std::vector<int>> pref_topics;
  // aligned with Dataset::interactions order
  std::vector<bool> noisy;
};

struct SynthResult {
  Dataset dataset;
  GroundTruth truth;
  // exact file payloads; write_files dumps these verbatim so generation is
  // byte-reproducible and ingest() of the written files equals `dataset`
  std::string interactions_jsonl;
  std::string resumes_jsonl;
  std::string jobs_jsonl;
  std::string ground_truth_jsonl;
};

// Preference-drift job market with additive interaction noise. The world
// (users, jobs, documents, revision times, consistent interactions) depends
// only on the seed; noise_pct adds noisy interactions on top, so the
// consistent-interaction multiset is identical across noise levels.
SynthResult generate(const GenConfig& config);

// One dataset per rho over a shared world.
std::vector<SynthResult> noise_sweep(GenConfig base, const std::vector<double>& rhos);

void write_files(const SynthResult& result, const std::filesystem::path& dir);
GroundTruth read_ground_truth(const std::filesystem::path& file, const Dataset& dataset);

}  // namespace driftrec
