#include "driftrec/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace driftrec {

namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(value, &used));
      if (used != value.size()) throw std::invalid_argument("");
    } catch (...) {
      throw ConfigError("config field " + key + ": not a number: '" + value + "'");
    }
  } else {
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError("config field " + key + ": not an integer: '" + value + "'");
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "on" : "off"; }

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw ConfigError("config field " + key + ": expected on/off: '" + value + "'");
}

#define NUM_FIELD(name, type)                                                       \
  Field {                                                                           \
    #name, [](const RunConfig& c) { return fmt(c.name); },                          \
        [](RunConfig& c, const std::string& v) { c.name = parse_number<type>(#name, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      NUM_FIELD(seed, std::uint64_t),
      NUM_FIELD(threads, int),
      NUM_FIELD(n_users, int),
      NUM_FIELD(n_jobs, int),
      NUM_FIELD(n_topics, int),
      NUM_FIELD(vocab_size, int),
      NUM_FIELD(n_attrs, int),
      NUM_FIELD(doc_tokens, int),
      NUM_FIELD(mean_session_len, double),
      NUM_FIELD(revision_gap_days, double),
      NUM_FIELD(drift_prob, double),
      NUM_FIELD(noise_pct, double),
      NUM_FIELD(horizon_days, double),
      NUM_FIELD(k_topics, int),
      NUM_FIELD(em_max_iters, int),
      NUM_FIELD(em_tol, double),
      NUM_FIELD(foldin_iters, int),
      NUM_FIELD(user_group_ratio, double),
      NUM_FIELD(job_group_ratio, double),
      NUM_FIELD(kmeans_max_iters, int),
      NUM_FIELD(scales, int),
      NUM_FIELD(cheb_order, int),
      NUM_FIELD(interp_degree, int),
      NUM_FIELD(oracle_cap, int),
      NUM_FIELD(dim, int),
      NUM_FIELD(layers, int),
      Field{"activation", [](const RunConfig& c) { return c.activation; },
            [](RunConfig& c, const std::string& v) {
              if (v != "relu" && v != "identity") {
                throw ConfigError("config field activation: expected relu or identity");
              }
              c.activation = v;
            }},
      Field{"wavelet", [](const RunConfig& c) { return fmt(c.wavelet); },
            [](RunConfig& c, const std::string& v) { c.wavelet = parse_bool("wavelet", v); }},
      NUM_FIELD(window, int),
      NUM_FIELD(lr, double),
      NUM_FIELD(epochs, int),
      NUM_FIELD(batch_size, int),
      NUM_FIELD(patience, int),
      NUM_FIELD(val_points_cap, int),
      NUM_FIELD(topk, int),
  };
  return table;
}

#undef NUM_FIELD

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key: " + key);
}

void RunConfig::validate() const {
  require(threads >= 1, "threads: must be >= 1");
  require(n_users >= 1, "n_users: must be >= 1");
  require(n_jobs >= 1, "n_jobs: must be >= 1");
  require(n_topics >= 1, "n_topics: must be >= 1");
  require(vocab_size >= n_topics, "vocab_size: must be >= n_topics");
  require(n_attrs >= 0, "n_attrs: must be >= 0");
  require(doc_tokens >= 1, "doc_tokens: must be >= 1");
  require(mean_session_len >= 1.0, "mean_session_len: must be >= 1");
  require(revision_gap_days > 0, "revision_gap_days: must be positive");
  require(drift_prob >= 0 && drift_prob <= 1, "drift_prob: must be in [0,1]");
  require(noise_pct >= 0 && noise_pct < 1, "noise_pct: must be in [0,1)");
  require(horizon_days > 0, "horizon_days: must be positive");
  require(k_topics >= 1, "k_topics: must be >= 1");
  require(em_max_iters >= 1, "em_max_iters: must be >= 1");
  require(em_tol > 0, "em_tol: must be positive");
  require(foldin_iters >= 1, "foldin_iters: must be >= 1");
  require(user_group_ratio > 0, "user_group_ratio: must be positive");
  require(job_group_ratio > 0, "job_group_ratio: must be positive");
  require(kmeans_max_iters >= 1, "kmeans_max_iters: must be >= 1");
  require(scales >= 1, "scales: must be >= 1");
  require(cheb_order >= 1, "cheb_order: must be >= 1");
  require(interp_degree >= cheb_order, "interp_degree: must be >= cheb_order");
  require(oracle_cap >= 1, "oracle_cap: must be >= 1");
  require(dim >= 1, "dim: must be >= 1");
  require(layers >= 1, "layers: must be >= 1");
  require(window >= 1, "window: must be >= 1");
  require(lr >= 0, "lr: must be >= 0");
  require(epochs >= 1, "epochs: must be >= 1");
  require(batch_size >= 1, "batch_size: must be >= 1");
  require(patience >= 1, "patience: must be >= 1");
  require(val_points_cap >= 1, "val_points_cap: must be >= 1");
  require(topk >= 1, "topk: must be >= 1");
}

std::string RunConfig::echo() const {
  std::map<std::string, std::string> sorted;
  for (const auto& f : fields()) sorted[f.key] = f.get(*this);
  std::string out;
  for (const auto& [k, v] : sorted) {
    out += k;
    out += "=";
    out += v;
    out += "\n";
  }
  return out;
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : echo()) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  return h;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    base.set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  return base;
}

void write_config_echo(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot write config echo");
  out << config.echo();
}

}  // namespace driftrec
