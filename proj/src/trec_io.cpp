// SPDX-License-Identifier: Apache-2.0
#include "setrank/trec_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace setrank {
namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return is;
}

std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", score);
  return buf;
}

[[noreturn]] void bad_line(const char* what, std::size_t line_no,
                           const std::string& line) {
  throw std::runtime_error(std::string(what) + " at line " +
                           std::to_string(line_no) + ": '" + line + "'");
}

}  // namespace

void validate_run(const std::vector<RunEntry>& entries) {
  std::map<std::string, std::vector<const RunEntry*>> per_query;
  for (const auto& e : entries) per_query[e.query_id].push_back(&e);
  for (auto& [qid, rows] : per_query) {
    std::sort(rows.begin(), rows.end(),
              [](const RunEntry* a, const RunEntry* b) {
                return a->rank < b->rank;
              });
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i]->rank != static_cast<Index>(i) + 1) {
        throw std::invalid_argument("run for query '" + qid +
                                    "' has non-contiguous ranks");
      }
      if (i > 0 && rows[i]->score > rows[i - 1]->score) {
        throw std::invalid_argument("run for query '" + qid +
                                    "' has increasing scores");
      }
    }
  }
}

void write_run(std::ostream& os, const std::vector<RunEntry>& entries) {
  validate_run(entries);
  auto sorted = entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const RunEntry& a, const RunEntry& b) {
              return std::tie(a.query_id, a.rank) < std::tie(b.query_id, b.rank);
            });
  for (const auto& e : sorted) {
    os << e.query_id << " Q0 " << e.passage_id << ' ' << e.rank << ' '
       << format_score(e.score) << ' ' << e.tag << '\n';
  }
}

std::vector<RunEntry> read_run(std::istream& is) {
  std::vector<RunEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    RunEntry e;
    std::string q0;
    if (!(ls >> e.query_id >> q0 >> e.passage_id >> e.rank >> e.score >>
          e.tag)) {
      bad_line("malformed run line", line_no, line);
    }
    if (q0 != "Q0") bad_line("expected literal Q0", line_no, line);
    entries.push_back(std::move(e));
  }
  validate_run(entries);
  return entries;
}

void save_run(const std::string& path, const std::vector<RunEntry>& entries) {
  auto os = open_out(path);
  write_run(os, entries);
}

std::vector<RunEntry> load_run(const std::string& path) {
  auto is = open_in(path);
  return read_run(is);
}

void write_qrels(std::ostream& os, const QrelSet& qrels) {
  for (const auto& [qid, judged] : qrels.by_query) {
    for (const auto& [pid, rel] : judged) {
      os << qid << " 0 " << pid << ' ' << rel << '\n';
    }
  }
}

QrelSet read_qrels(std::istream& is) {
  QrelSet qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string qid, zero, pid;
    int rel = 0;
    if (!(ls >> qid >> zero >> pid >> rel)) {
      bad_line("malformed qrels line", line_no, line);
    }
    qrels.set(qid, pid, rel);
  }
  return qrels;
}

void save_qrels(const std::string& path, const QrelSet& qrels) {
  auto os = open_out(path);
  write_qrels(os, qrels);
}

QrelSet load_qrels(const std::string& path) {
  auto is = open_in(path);
  return read_qrels(is);
}

void write_corpus(std::ostream& os,
                  const std::vector<std::pair<std::string, std::string>>& docs) {
  for (const auto& [id, text] : docs) {
    nlohmann::json j;
    j["id"] = id;
    j["text"] = text;
    os << j.dump() << '\n';
  }
}

std::vector<std::pair<std::string, std::string>> read_corpus(std::istream& is) {
  std::vector<std::pair<std::string, std::string>> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      bad_line("malformed corpus record", line_no, line);
    }
    if (!j.contains("id") || !j.contains("text") || !j["id"].is_string() ||
        !j["text"].is_string()) {
      bad_line("corpus record missing string id/text", line_no, line);
    }
    docs.emplace_back(j["id"].get<std::string>(), j["text"].get<std::string>());
  }
  return docs;
}

void save_corpus(const std::string& path,
                 const std::vector<std::pair<std::string, std::string>>& docs) {
  auto os = open_out(path);
  write_corpus(os, docs);
}

std::vector<std::pair<std::string, std::string>> load_corpus(
    const std::string& path) {
  auto is = open_in(path);
  return read_corpus(is);
}

void write_queries(
    std::ostream& os,
    const std::vector<std::pair<std::string, std::string>>& queries) {
  for (const auto& [id, text] : queries) {
    os << id << '\t' << text << '\n';
  }
}

std::vector<std::pair<std::string, std::string>> read_queries(
    std::istream& is) {
  std::vector<std::pair<std::string, std::string>> queries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) bad_line("missing tab", line_no, line);
    queries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return queries;
}

void save_queries(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& queries) {
  auto os = open_out(path);
  write_queries(os, queries);
}

std::vector<std::pair<std::string, std::string>> load_queries(
    const std::string& path) {
  auto is = open_in(path);
  return read_queries(is);
}

void write_clusters(std::ostream& os, const SubtopicMap& clusters) {
  for (const auto& [qid, passages] : clusters.by_query) {
    for (const auto& [pid, cluster] : passages) {
      os << qid << '\t' << pid << '\t' << cluster << '\n';
    }
  }
}

SubtopicMap read_clusters(std::istream& is) {
  SubtopicMap clusters;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string qid, pid, cluster_str;
    if (!std::getline(ls, qid, '\t') || !std::getline(ls, pid, '\t') ||
        !std::getline(ls, cluster_str)) {
      bad_line("malformed cluster line", line_no, line);
    }
    try {
      clusters.set(qid, pid, std::stoi(cluster_str));
    } catch (const std::exception&) {
      bad_line("bad cluster id", line_no, line);
    }
  }
  return clusters;
}

void save_clusters(const std::string& path, const SubtopicMap& clusters) {
  auto os = open_out(path);
  write_clusters(os, clusters);
}

SubtopicMap load_clusters(const std::string& path) {
  auto is = open_in(path);
  return read_clusters(is);
}

}  // namespace setrank
