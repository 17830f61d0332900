#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace driftrec {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every tunable of the pipeline, flat key=value style. Field names double as
// config keys.
struct RunConfig {
  // shared
  std::uint64_t seed = 1;
  int threads = 1;

  // synthetic generator
  int n_users = 2000;
  int n_jobs = 1000;
  int n_topics = 20;
  int vocab_size = 2000;
  int n_attrs = 2;
  int doc_tokens = 40;
  double mean_session_len = 20.0;
  double revision_gap_days = 7.28;
  double drift_prob = 0.77;
  double noise_pct = 0.0;
  double horizon_days = 42.0;

  // topic model
  int k_topics = 32;
  int em_max_iters = 200;
  double em_tol = 1e-6;
  int foldin_iters = 10;

  // clustering
  double user_group_ratio = 1000.0;
  double job_group_ratio = 500.0;
  int kmeans_max_iters = 100;

  // spectral
  int scales = 4;
  int cheb_order = 3;
  int interp_degree = 50;
  int oracle_cap = 256;

  // network
  int dim = 128;
  int layers = 1;
  std::string activation = "relu";  // relu | identity
  bool wavelet = true;

  // training
  int window = 20;
  double lr = 1e-3;
  int epochs = 100;
  int batch_size = 128;
  int patience = 20;
  int val_points_cap = 2000;

  // evaluation
  int topk = 10;

  void validate() const;  // throws ConfigError naming the offending field
  std::string echo() const;  // canonical sorted key=value text
  std::uint64_t hash() const;  // FNV-1a over echo()

  void set(const std::string& key, const std::string& value);  // throws ConfigError
};

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});
void write_config_echo(const RunConfig& config, const std::filesystem::path& path);

}  // namespace driftrec
