#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace driftrec {

enum class InteractionKind { browse, click, chat, apply };

const char* to_string(InteractionKind k);
std::optional<InteractionKind> interaction_kind_from_string(std::string_view s);

struct ResumeVersion {
  std::int64_t ts = 0;  // seconds
  std::string document_id;
};

struct User {
  std::string id;
  std::vector<ResumeVersion> resume_versions;  // strictly increasing in ts, >= 1
  std::vector<double> attributes;              // min-max normalized over the dataset
};

struct Job {
  std::string id;
  std::string requirement_document;
  std::vector<double> attributes;
  int label = 0;  // job-position class in [0, M)
};

struct Interaction {
  std::string user_id;
  std::string job_id;
  std::int64_t ts = 0;
  InteractionKind kind = InteractionKind::browse;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct Session {
  std::string user_id;
  int resume_version_index = 0;
  std::vector<Interaction> interactions;  // time-ordered, non-empty
};

struct Document {
  std::string id;
  std::map<std::string, int> token_counts;  // positive counts
};

struct Dataset {
  std::vector<User> users;
  std::vector<Job> jobs;
  std::vector<Document> documents;
  std::vector<Interaction> interactions;
  std::vector<Session> sessions;

  std::unordered_map<std::string, std::size_t> user_index;
  std::unordered_map<std::string, std::size_t> job_index;
  std::unordered_map<std::string, std::size_t> document_index;

  int n_labels = 0;  // M

  const User& user(const std::string& id) const;
  const Job& job(const std::string& id) const;
  const Document& document(const std::string& id) const;

  void build_indexes();

  bool operator==(const Dataset& other) const;
};

struct IngestReport {
  std::size_t users = 0;
  std::size_t jobs = 0;
  std::size_t interactions = 0;
  std::size_t malformed_lines = 0;
};

// Lowercase, split on non-alphanumeric runs, drop tokens shorter than 2 chars.
std::map<std::string, int> tokenize(std::string_view text);

// Partition a user's interactions at resume-revision timestamps. An
// interaction at exactly a revision timestamp opens the new session;
// interactions before the first version attach to version 0. Empty partitions
// are dropped. Sorting is internal, so input order does not matter.
std::vector<Session> segment_sessions(const User& user, std::vector<Interaction> interactions);

// Reads the three JSON-Lines files, resolves references and segments
// sessions. Malformed lines are skipped and counted; an interaction that
// references an unknown user or job is a hard error naming the line.
Dataset ingest(const std::filesystem::path& interactions_file,
               const std::filesystem::path& resumes_file,
               const std::filesystem::path& jobs_file,
               IngestReport* report = nullptr);

// Stream variant; `label` names appear in error messages in place of paths.
Dataset ingest_streams(std::istream& interactions, std::istream& resumes, std::istream& jobs,
                       IngestReport* report = nullptr,
                       const std::string& label_prefix = "<stream>");

}  // namespace driftrec
