// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>
#include <string>
#include <vector>

#include "setrank/trec_io.hpp"

using namespace setrank;

namespace {

std::vector<RunEntry> sample_run() {
  return {
      {"q2", "p4", 1, 0.9, "sys"},
      {"q1", "p1", 1, 2.5, "sys"},
      {"q1", "p2", 2, 1.0, "sys"},
      {"q1", "p3", 3, -0.25, "sys"},
      {"q2", "p5", 2, 0.9, "sys"},
  };
}

}  // namespace

TEST_CASE("run serialization is canonical and byte-stable") {
  std::ostringstream os;
  write_run(os, sample_run());
  std::string expected =
      "q1 Q0 p1 1 2.500000 sys\n"
      "q1 Q0 p2 2 1.000000 sys\n"
      "q1 Q0 p3 3 -0.250000 sys\n"
      "q2 Q0 p4 1 0.900000 sys\n"
      "q2 Q0 p5 2 0.900000 sys\n";
  CHECK(os.str() == expected);

  std::istringstream is(os.str());
  auto parsed = read_run(is);
  REQUIRE(parsed.size() == 5);
  std::ostringstream os2;
  write_run(os2, parsed);
  CHECK(os2.str() == expected);

  std::istringstream is2(os2.str());
  CHECK(read_run(is2) == parsed);
}

TEST_CASE("run invariants are enforced") {
  // Ranks must be contiguous from 1.
  std::vector<RunEntry> gap = {{"q", "a", 1, 2.0, "t"}, {"q", "b", 3, 1.0, "t"}};
  CHECK_THROWS_AS(validate_run(gap), std::invalid_argument);

  std::vector<RunEntry> no_one = {{"q", "a", 2, 2.0, "t"}};
  CHECK_THROWS_AS(validate_run(no_one), std::invalid_argument);

  // Scores may not increase with rank.
  std::vector<RunEntry> rising = {{"q", "a", 1, 1.0, "t"},
                                  {"q", "b", 2, 2.0, "t"}};
  CHECK_THROWS_AS(validate_run(rising), std::invalid_argument);

  CHECK_NOTHROW(validate_run(sample_run()));
  CHECK_NOTHROW(validate_run({}));
}

TEST_CASE("run parsing rejects malformed lines") {
  std::istringstream missing_field("q1 Q0 p1 1 0.5\n");
  CHECK_THROWS_AS(read_run(missing_field), std::runtime_error);

  std::istringstream wrong_literal("q1 XX p1 1 0.5 tag\n");
  CHECK_THROWS_AS(read_run(wrong_literal), std::runtime_error);

  std::istringstream empty("");
  CHECK(read_run(empty).empty());
}

TEST_CASE("qrels round trip") {
  QrelSet qrels;
  qrels.set("q1", "p1", 2);
  qrels.set("q1", "p2", 0);
  qrels.set("q2", "p9", 1);

  std::ostringstream os;
  write_qrels(os, qrels);
  CHECK(os.str() ==
        "q1 0 p1 2\n"
        "q1 0 p2 0\n"
        "q2 0 p9 1\n");

  std::istringstream is(os.str());
  auto parsed = read_qrels(is);
  CHECK(parsed.by_query == qrels.by_query);

  std::istringstream bad("q1 0 p1\n");
  CHECK_THROWS_AS(read_qrels(bad), std::runtime_error);
}

TEST_CASE("corpus json lines round trip") {
  std::vector<std::pair<std::string, std::string>> docs = {
      {"d1", "plain words"},
      {"d2", "with \"quotes\" and\ttabs"},
      {"d3", ""},
  };
  std::ostringstream os;
  write_corpus(os, docs);
  std::istringstream is(os.str());
  CHECK(read_corpus(is) == docs);

  std::istringstream bad("not json\n");
  CHECK_THROWS_AS(read_corpus(bad), std::runtime_error);
  std::istringstream missing(R"({"id": "x"})"
                             "\n");
  CHECK_THROWS_AS(read_corpus(missing), std::runtime_error);
}

TEST_CASE("queries round trip") {
  std::vector<std::pair<std::string, std::string>> queries = {
      {"q1", "what is steel"},
      {"q2", "words with  spaces"},
  };
  std::ostringstream os;
  write_queries(os, queries);
  CHECK(os.str() == "q1\twhat is steel\nq2\twords with  spaces\n");
  std::istringstream is(os.str());
  CHECK(read_queries(is) == queries);

  std::istringstream bad("no tab here\n");
  CHECK_THROWS_AS(read_queries(bad), std::runtime_error);
}

TEST_CASE("clusters round trip") {
  SubtopicMap clusters;
  clusters.set("q1", "p1", 0);
  clusters.set("q1", "p2", 0);
  clusters.set("q1", "p3", 1);
  clusters.set("q2", "p4", 7);

  std::ostringstream os;
  write_clusters(os, clusters);
  CHECK(os.str() ==
        "q1\tp1\t0\n"
        "q1\tp2\t0\n"
        "q1\tp3\t1\n"
        "q2\tp4\t7\n");

  std::istringstream is(os.str());
  auto parsed = read_clusters(is);
  CHECK(parsed.by_query == clusters.by_query);

  std::istringstream bad("q1\tp1\tnotanint\n");
  CHECK_THROWS_AS(read_clusters(bad), std::runtime_error);
}

TEST_CASE("file helpers report unopenable paths") {
  CHECK_THROWS_AS(load_run("/nonexistent/dir/run.txt"), std::runtime_error);
  CHECK_THROWS_AS(save_run("/nonexistent/dir/run.txt", {}),
                  std::runtime_error);
}
