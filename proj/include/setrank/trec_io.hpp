// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "setrank/metrics.hpp"
#include "setrank/tensor.hpp"

namespace setrank {

/// One line of a TREC run.
struct RunEntry {
  std::string query_id;
  std::string passage_id;
  Index rank = 0;  // 1-based
  double score = 0.0;
  std::string tag;

  bool operator==(const RunEntry&) const = default;
};

/// Throws invalid_argument unless, per query, ranks are contiguous from 1
/// and scores are non-increasing with rank.
void validate_run(const std::vector<RunEntry>& entries);

/// Canonical run serialization: entries sorted by (query_id, rank), lines
/// "query_id Q0 passage_id rank score tag" with score at 6 decimal places.
/// Validates before writing. Byte-stable: serializing a parsed run
/// reproduces the file.
void write_run(std::ostream& os, const std::vector<RunEntry>& entries);
std::vector<RunEntry> read_run(std::istream& is);
void save_run(const std::string& path, const std::vector<RunEntry>& entries);
std::vector<RunEntry> load_run(const std::string& path);

/// Qrels lines "query_id 0 passage_id relevance", sorted by (query, passage).
void write_qrels(std::ostream& os, const QrelSet& qrels);
QrelSet read_qrels(std::istream& is);
void save_qrels(const std::string& path, const QrelSet& qrels);
QrelSet load_qrels(const std::string& path);

/// Corpus as line-delimited JSON records {"id": ..., "text": ...}.
void write_corpus(std::ostream& os,
                  const std::vector<std::pair<std::string, std::string>>& docs);
std::vector<std::pair<std::string, std::string>> read_corpus(std::istream& is);
void save_corpus(const std::string& path,
                 const std::vector<std::pair<std::string, std::string>>& docs);
std::vector<std::pair<std::string, std::string>> load_corpus(
    const std::string& path);

/// Queries as "id<TAB>text" lines.
void write_queries(
    std::ostream& os,
    const std::vector<std::pair<std::string, std::string>>& queries);
std::vector<std::pair<std::string, std::string>> read_queries(std::istream& is);
void save_queries(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& queries);
std::vector<std::pair<std::string, std::string>> load_queries(
    const std::string& path);

/// Cluster assignments as "query_id<TAB>passage_id<TAB>cluster_id" lines,
/// sorted by (query, passage).
void write_clusters(std::ostream& os, const SubtopicMap& clusters);
SubtopicMap read_clusters(std::istream& is);
void save_clusters(const std::string& path, const SubtopicMap& clusters);
SubtopicMap load_clusters(const std::string& path);

}  // namespace setrank
