#include "driftrec/data_model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace driftrec {

using nlohmann::json;

const char* to_string(InteractionKind k) {
  switch (k) {
    case InteractionKind::browse: return "browse";
    case InteractionKind::click: return "click";
    case InteractionKind::chat: return "chat";
    case InteractionKind::apply: return "apply";
  }
  return "?";
}

std::optional<InteractionKind> interaction_kind_from_string(std::string_view s) {
  if (s == "browse") return InteractionKind::browse;
  if (s == "click") return InteractionKind::click;
  if (s == "chat") return InteractionKind::chat;
  if (s == "apply") return InteractionKind::apply;
  return std::nullopt;
}

const User& Dataset::user(const std::string& id) const { return users.at(user_index.at(id)); }
const Job& Dataset::job(const std::string& id) const { return jobs.at(job_index.at(id)); }
const Document& Dataset::document(const std::string& id) const {
  return documents.at(document_index.at(id));
}

void Dataset::build_indexes() {
  user_index.clear();
  job_index.clear();
  document_index.clear();
  for (std::size_t i = 0; i < users.size(); ++i) user_index[users[i].id] = i;
  for (std::size_t i = 0; i < jobs.size(); ++i) job_index[jobs[i].id] = i;
  for (std::size_t i = 0; i < documents.size(); ++i) document_index[documents[i].id] = i;
}

bool Dataset::operator==(const Dataset& other) const {
  auto user_eq = [](const User& a, const User& b) {
    if (a.id != b.id || a.attributes != b.attributes) return false;
    if (a.resume_versions.size() != b.resume_versions.size()) return false;
    for (std::size_t i = 0; i < a.resume_versions.size(); ++i) {
      if (a.resume_versions[i].ts != b.resume_versions[i].ts ||
          a.resume_versions[i].document_id != b.resume_versions[i].document_id)
        return false;
    }
    return true;
  };
  auto job_eq = [](const Job& a, const Job& b) {
    return a.id == b.id && a.requirement_document == b.requirement_document &&
           a.attributes == b.attributes && a.label == b.label;
  };
  auto doc_eq = [](const Document& a, const Document& b) {
    return a.id == b.id && a.token_counts == b.token_counts;
  };
  auto sess_eq = [](const Session& a, const Session& b) {
    return a.user_id == b.user_id && a.resume_version_index == b.resume_version_index &&
           a.interactions == b.interactions;
  };
  return std::equal(users.begin(), users.end(), other.users.begin(), other.users.end(), user_eq) &&
         std::equal(jobs.begin(), jobs.end(), other.jobs.begin(), other.jobs.end(), job_eq) &&
         std::equal(documents.begin(), documents.end(), other.documents.begin(),
                    other.documents.end(), doc_eq) &&
         interactions == other.interactions &&
         std::equal(sessions.begin(), sessions.end(), other.sessions.begin(),
                    other.sessions.end(), sess_eq) &&
         n_labels == other.n_labels;
}

std::map<std::string, int> tokenize(std::string_view text) {
  std::map<std::string, int> counts;
  std::string token;
  auto flush = [&] {
    if (token.size() >= 2) ++counts[token];
    token.clear();
  };
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      token.push_back(static_cast<char>(std::tolower(uc)));
    } else {
      flush();
    }
  }
  flush();
  return counts;
}

namespace {

// Total order so segmentation is stable under input permutation.
bool interaction_less(const Interaction& a, const Interaction& b) {
  if (a.ts != b.ts) return a.ts < b.ts;
  if (a.job_id != b.job_id) return a.job_id < b.job_id;
  if (a.kind != b.kind) return a.kind < b.kind;
  return a.user_id < b.user_id;
}

}  // namespace

std::vector<Session> segment_sessions(const User& user, std::vector<Interaction> interactions) {
  std::sort(interactions.begin(), interactions.end(), interaction_less);

  const auto& versions = user.resume_versions;
  std::vector<Session> sessions;
  std::size_t pos = 0;
  for (std::size_t v = 0; v < versions.size(); ++v) {
    // Version v covers [ts_v, ts_{v+1}); anything before the first version
    // attaches to version 0. An interaction at exactly a revision timestamp
    // belongs to the new session.
    const std::int64_t hi = (v + 1 < versions.size()) ? versions[v + 1].ts
                                                      : std::numeric_limits<std::int64_t>::max();
    Session s;
    s.user_id = user.id;
    s.resume_version_index = static_cast<int>(v);
    while (pos < interactions.size() && (v + 1 >= versions.size() || interactions[pos].ts < hi)) {
      s.interactions.push_back(interactions[pos]);
      ++pos;
    }
    if (!s.interactions.empty()) sessions.push_back(std::move(s));
  }
  return sessions;
}

namespace {

struct RawResume {
  std::int64_t ts;
  std::string text;
  std::vector<double> attrs;
};

[[noreturn]] void ingest_error(const std::string& file, std::size_t line,
                               const std::string& what) {
  throw std::runtime_error(file + ":" + std::to_string(line) + ": " + what);
}

// Applies `fn` to each parsed JSON object; malformed lines are counted, not fatal.
template <typename Fn>
void for_each_jsonl(std::istream& in, std::size_t& malformed, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      ++malformed;
      continue;
    }
    fn(j, lineno);
  }
}

void minmax_normalize(std::vector<std::vector<double>*> rows) {
  if (rows.empty()) return;
  const std::size_t dim = rows.front()->size();
  for (std::size_t d = 0; d < dim; ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (auto* r : rows) {
      lo = std::min(lo, (*r)[d]);
      hi = std::max(hi, (*r)[d]);
    }
    const double span = hi - lo;
    for (auto* r : rows) {
      (*r)[d] = span > 0 ? ((*r)[d] - lo) / span : 0.0;
    }
  }
}

}  // namespace

Dataset ingest(const std::filesystem::path& interactions_file,
               const std::filesystem::path& resumes_file,
               const std::filesystem::path& jobs_file,
               IngestReport* report) {
  std::ifstream fi(interactions_file);
  if (!fi) throw std::runtime_error(interactions_file.string() + ": cannot open");
  std::ifstream fr(resumes_file);
  if (!fr) throw std::runtime_error(resumes_file.string() + ": cannot open");
  std::ifstream fj(jobs_file);
  if (!fj) throw std::runtime_error(jobs_file.string() + ": cannot open");
  return ingest_streams(fi, fr, fj, report, interactions_file.parent_path().string());
}

Dataset ingest_streams(std::istream& interactions_in, std::istream& resumes_in,
                       std::istream& jobs_in, IngestReport* report,
                       const std::string& label_prefix) {
  Dataset ds;
  IngestReport rep;
  const std::string resumes_file = label_prefix + "/resumes.jsonl";
  const std::string jobs_file = label_prefix + "/jobs.jsonl";
  const std::string interactions_file = label_prefix + "/interactions.jsonl";

  // resumes.jsonl: {"user", "ts", "text", "attrs"}
  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<RawResume>> resumes;
  std::optional<std::size_t> user_attr_dim;
  for_each_jsonl(resumes_in, rep.malformed_lines, [&](const json& j, std::size_t lineno) {
    if (!j.contains("user") || !j["user"].is_string() || !j.contains("ts") ||
        !j["ts"].is_number_integer() || !j.contains("text") || !j["text"].is_string()) {
      ++rep.malformed_lines;
      return;
    }
    RawResume r;
    r.ts = j["ts"].get<std::int64_t>();
    r.text = j["text"].get<std::string>();
    if (j.contains("attrs")) {
      if (!j["attrs"].is_array()) {
        ++rep.malformed_lines;
        return;
      }
      for (const auto& a : j["attrs"]) {
        if (!a.is_number()) {
          ++rep.malformed_lines;
          return;
        }
        r.attrs.push_back(a.get<double>());
      }
    }
    if (!user_attr_dim) user_attr_dim = r.attrs.size();
    if (r.attrs.size() != *user_attr_dim) {
      ingest_error(resumes_file, lineno, "inconsistent attrs dimension for user " +
                                             j["user"].get<std::string>());
    }
    const std::string uid = j["user"].get<std::string>();
    if (resumes.find(uid) == resumes.end()) user_order.push_back(uid);
    resumes[uid].push_back(std::move(r));
  });

  for (const auto& uid : user_order) {
    auto& versions = resumes[uid];
    std::sort(versions.begin(), versions.end(),
              [](const RawResume& a, const RawResume& b) { return a.ts < b.ts; });
    for (std::size_t i = 1; i < versions.size(); ++i) {
      if (versions[i].ts == versions[i - 1].ts) {
        throw std::runtime_error(resumes_file + ": duplicate resume timestamp " +
                                 std::to_string(versions[i].ts) + " for user " + uid);
      }
    }
    User u;
    u.id = uid;
    u.attributes = versions.back().attrs;  // latest version's attributes
    for (std::size_t i = 0; i < versions.size(); ++i) {
      Document doc;
      doc.id = "u/" + uid + "/" + std::to_string(i);
      doc.token_counts = tokenize(versions[i].text);
      u.resume_versions.push_back({versions[i].ts, doc.id});
      ds.documents.push_back(std::move(doc));
    }
    ds.users.push_back(std::move(u));
  }
  rep.users = ds.users.size();

  // jobs.jsonl: {"job", "text", "attrs", "label"}
  std::optional<std::size_t> job_attr_dim;
  for_each_jsonl(jobs_in, rep.malformed_lines, [&](const json& j, std::size_t lineno) {
    if (!j.contains("job") || !j["job"].is_string() || !j.contains("text") ||
        !j["text"].is_string() || !j.contains("label") || !j["label"].is_number_integer()) {
      ++rep.malformed_lines;
      return;
    }
    const int label = j["label"].get<int>();
    if (label < 0) {
      ++rep.malformed_lines;
      return;
    }
    Job job;
    job.id = j["job"].get<std::string>();
    job.label = label;
    if (j.contains("attrs")) {
      if (!j["attrs"].is_array()) {
        ++rep.malformed_lines;
        return;
      }
      for (const auto& a : j["attrs"]) {
        if (!a.is_number()) {
          ++rep.malformed_lines;
          return;
        }
        job.attributes.push_back(a.get<double>());
      }
    }
    if (!job_attr_dim) job_attr_dim = job.attributes.size();
    if (job.attributes.size() != *job_attr_dim) {
      ingest_error(jobs_file, lineno, "inconsistent attrs dimension for job " + job.id);
    }
    if (ds.job_index.count(job.id)) {
      ingest_error(jobs_file, lineno, "duplicate job id " + job.id);
    }
    Document doc;
    doc.id = "j/" + job.id;
    doc.token_counts = tokenize(j["text"].get<std::string>());
    job.requirement_document = doc.id;
    ds.documents.push_back(std::move(doc));
    ds.job_index[job.id] = ds.jobs.size();
    ds.jobs.push_back(std::move(job));
  });
  rep.jobs = ds.jobs.size();
  for (const auto& job : ds.jobs) ds.n_labels = std::max(ds.n_labels, job.label + 1);

  ds.build_indexes();

  // interactions.jsonl: {"user", "job", "ts", "kind"}
  for_each_jsonl(interactions_in, rep.malformed_lines, [&](const json& j, std::size_t lineno) {
    if (!j.contains("user") || !j["user"].is_string() || !j.contains("job") ||
        !j["job"].is_string() || !j.contains("ts") || !j["ts"].is_number_integer() ||
        !j.contains("kind") || !j["kind"].is_string()) {
      ++rep.malformed_lines;
      return;
    }
    const auto kind = interaction_kind_from_string(j["kind"].get<std::string>());
    if (!kind) {
      ++rep.malformed_lines;
      return;
    }
    Interaction it;
    it.user_id = j["user"].get<std::string>();
    it.job_id = j["job"].get<std::string>();
    it.ts = j["ts"].get<std::int64_t>();
    it.kind = *kind;
    if (!ds.user_index.count(it.user_id)) {
      ingest_error(interactions_file, lineno, "unknown user " + it.user_id);
    }
    if (!ds.job_index.count(it.job_id)) {
      ingest_error(interactions_file, lineno, "unknown job " + it.job_id);
    }
    ds.interactions.push_back(std::move(it));
  });
  rep.interactions = ds.interactions.size();

  // Min-max normalize attributes per dimension, users and jobs separately.
  {
    std::vector<std::vector<double>*> rows;
    for (auto& u : ds.users) rows.push_back(&u.attributes);
    minmax_normalize(rows);
    rows.clear();
    for (auto& j : ds.jobs) rows.push_back(&j.attributes);
    minmax_normalize(rows);
  }

  // Segment sessions per user.
  {
    std::unordered_map<std::string, std::vector<Interaction>> per_user;
    for (const auto& it : ds.interactions) per_user[it.user_id].push_back(it);
    for (const auto& u : ds.users) {
      auto found = per_user.find(u.id);
      if (found == per_user.end()) continue;
      auto sessions = segment_sessions(u, std::move(found->second));
      for (auto& s : sessions) ds.sessions.push_back(std::move(s));
    }
  }

  if (report) *report = rep;
  return ds;
}

}  // namespace driftrec
