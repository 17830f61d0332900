#include "driftrec/data_model.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace driftrec;

namespace {

const std::string kFixtures = DRIFTREC_FIXTURE_DIR;

User make_user(std::vector<std::int64_t> version_ts) {
  User u;
  u.id = "u";
  int v = 0;
  for (auto ts : version_ts) u.resume_versions.push_back({ts, "u/u/" + std::to_string(v++)});
  return u;
}

Interaction make_interaction(std::int64_t ts, const std::string& job = "j") {
  return {"u", job, ts, InteractionKind::browse};
}

}  // namespace

TEST_CASE("tokenize basic rules") {
  CHECK(tokenize("").empty());

  const auto counts = tokenize("Data Engineer, data pipelines");
  CHECK(counts.at("data") == 2);
  CHECK(counts.at("engineer") == 1);
  CHECK(counts.at("pipelines") == 1);
  CHECK(counts.size() == 3);

  // single-character residue dropped
  CHECK(tokenize("C++").empty());
  CHECK(tokenize("a b c").empty());
  CHECK(tokenize("ab1 x").count("ab1") == 1);
}

TEST_CASE("segment_sessions splits at revision timestamps") {
  SUBCASE("no revisions: one session") {
    const User u = make_user({0});
    auto sessions = segment_sessions(u, {make_interaction(1), make_interaction(9)});
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].resume_version_index == 0);
    CHECK(sessions[0].interactions.size() == 2);
  }

  SUBCASE("boundary at t=4 splits [1,2,5,9]") {
    const User u = make_user({0, 4});
    auto sessions = segment_sessions(
        u, {make_interaction(5), make_interaction(1), make_interaction(9), make_interaction(2)});
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].interactions.size() == 2);
    CHECK(sessions[0].interactions[0].ts == 1);
    CHECK(sessions[0].interactions[1].ts == 2);
    CHECK(sessions[1].interactions.size() == 2);
    CHECK(sessions[1].interactions[0].ts == 5);
  }

  SUBCASE("interaction exactly at a revision opens the new session") {
    const User u = make_user({0, 4});
    auto sessions = segment_sessions(u, {make_interaction(4)});
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].resume_version_index == 1);
  }

  SUBCASE("interactions before the first version attach to version 0") {
    const User u = make_user({100});
    auto sessions = segment_sessions(u, {make_interaction(5)});
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].resume_version_index == 0);
  }

  SUBCASE("empty input: empty list") {
    CHECK(segment_sessions(make_user({0, 4}), {}).empty());
  }
}

TEST_CASE("segment_sessions partition is exact and order-stable") {
  const User u = make_user({0, 10, 20});
  std::vector<Interaction> input;
  for (int i = 0; i < 30; ++i) input.push_back(make_interaction(i, "j" + std::to_string(i % 3)));

  auto sessions = segment_sessions(u, input);
  std::size_t total = 0;
  std::int64_t last_boundary = -1;
  for (const auto& s : sessions) {
    CHECK(!s.interactions.empty());
    for (const auto& it : s.interactions) CHECK(it.ts > last_boundary);
    total += s.interactions.size();
    last_boundary = s.interactions.back().ts;
  }
  CHECK(total == input.size());

  // permuting the input changes nothing
  std::vector<Interaction> shuffled = input;
  std::reverse(shuffled.begin(), shuffled.end());
  auto sessions2 = segment_sessions(u, shuffled);
  REQUIRE(sessions2.size() == sessions.size());
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    CHECK(sessions2[i].interactions == sessions[i].interactions);
  }
}

TEST_CASE("ingest fixture has expected shape") {
  IngestReport report;
  const Dataset ds = ingest(kFixtures + "/interactions.jsonl", kFixtures + "/resumes.jsonl",
                            kFixtures + "/jobs.jsonl", &report);
  CHECK(report.users == 3);
  CHECK(report.jobs == 5);
  CHECK(report.interactions == 12);
  CHECK(report.malformed_lines == 0);
  CHECK(ds.users.size() == 3);
  CHECK(ds.jobs.size() == 5);
  CHECK(ds.interactions.size() == 12);
  CHECK(ds.n_labels == 2);
  // u1 has two versions, so two sessions; u2/u3 one each
  CHECK(ds.sessions.size() == 4);
  // documents: 4 resumes + 5 jobs
  CHECK(ds.documents.size() == 9);

  // attributes are min-max normalized per dimension
  for (const auto& user : ds.users) {
    for (double a : user.attributes) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }
}

TEST_CASE("ingest is idempotent") {
  const Dataset a = ingest(kFixtures + "/interactions.jsonl", kFixtures + "/resumes.jsonl",
                           kFixtures + "/jobs.jsonl");
  const Dataset b = ingest(kFixtures + "/interactions.jsonl", kFixtures + "/resumes.jsonl",
                           kFixtures + "/jobs.jsonl");
  CHECK(a == b);
}

TEST_CASE("ingest errors and warnings") {
  SUBCASE("empty files yield an empty dataset with no warnings") {
    std::istringstream ii, ri, ji;
    IngestReport report;
    const Dataset ds = ingest_streams(ii, ri, ji, &report);
    CHECK(ds.users.empty());
    CHECK(ds.jobs.empty());
    CHECK(ds.interactions.empty());
    CHECK(report.malformed_lines == 0);
  }

  SUBCASE("unknown job reference is a hard error naming the line") {
    std::istringstream ii(R"({"user":"u1","job":"nope","ts":1,"kind":"click"})");
    std::istringstream ri(R"({"user":"u1","ts":0,"text":"data things","attrs":[]})");
    std::istringstream ji(R"({"job":"j1","text":"data role","attrs":[],"label":0})");
    CHECK_THROWS_WITH_AS(ingest_streams(ii, ri, ji),
                         doctest::Contains("interactions.jsonl:1"), std::runtime_error);
  }

  SUBCASE("malformed lines are skipped and counted") {
    std::istringstream ii("not json at all\n"
                          R"({"user":"u1","job":"j1","ts":1,"kind":"click"})"
                          "\n"
                          R"({"user":"u1","job":"j1","ts":2,"kind":"bogus-kind"})"
                          "\n");
    std::istringstream ri(R"({"user":"u1","ts":0,"text":"data things","attrs":[]})");
    std::istringstream ji(R"({"job":"j1","text":"data role","attrs":[],"label":0})");
    IngestReport report;
    const Dataset ds = ingest_streams(ii, ri, ji, &report);
    CHECK(ds.interactions.size() == 1);
    CHECK(report.malformed_lines == 2);
  }
}
