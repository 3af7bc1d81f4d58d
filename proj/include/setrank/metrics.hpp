// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "setrank/tensor.hpp"

namespace setrank {

/// Graded relevance judgments keyed by query then passage. Unjudged pairs
/// have relevance 0.
struct QrelSet {
  std::map<std::string, std::map<std::string, int>> by_query;

  void set(const std::string& query_id, const std::string& passage_id,
           int relevance);
  int relevance(const std::string& query_id,
                const std::string& passage_id) const;
  /// Judged passages for one query, sorted by passage id; empty if none.
  const std::map<std::string, int>& judged(const std::string& query_id) const;
};

/// Maps judged passages to subtopics (near-duplicate cluster ids).
struct SubtopicMap {
  std::map<std::string, std::map<std::string, int>> by_query;

  void set(const std::string& query_id, const std::string& passage_id,
           int subtopic);
  /// -1 when the pair has no subtopic; such passages never repeat a subtopic.
  int subtopic(const std::string& query_id,
               const std::string& passage_id) const;
};

enum class GainMode { kExponential, kLinear };

/// nDCG@k with discount 1/log2(rank+1) and gain 2^rel-1 (exponential) or
/// rel (linear). The ideal ranking sorts all judged passages by relevance;
/// both sums stop at rank k. An ideal DCG of zero defines the metric as 0.
double ndcg_at_k(const std::vector<std::string>& ranking, const QrelSet& qrels,
                 const std::string& query_id, Index k,
                 GainMode gain = GainMode::kExponential);

/// alpha-nDCG@k. Relevance is binarized at rel >= 1; a relevant passage at
/// rank r whose subtopic was already covered by c earlier ranked relevant
/// passages gains (1-alpha)^c, discounted by 1/log2(rank+1). Normalization
/// uses the greedy ideal below. alpha must lie in [0,1).
double alpha_ndcg_at_k(const std::vector<std::string>& ranking,
                       const QrelSet& qrels, const SubtopicMap& subtopics,
                       const std::string& query_id, Index k,
                       double alpha = 0.99);

/// Greedy ideal ordering for alpha-nDCG normalization: repeatedly picks the
/// relevant judged passage with maximal marginal gain (1-alpha)^count for its
/// subtopic, breaking ties by passage id. Returns at most k ids.
std::vector<std::string> greedy_ideal(const QrelSet& qrels,
                                      const SubtopicMap& subtopics,
                                      const std::string& query_id, Index k,
                                      double alpha = 0.99);

/// One line of a metrics report.
struct MetricRow {
  std::string query_id;
  std::string metric;
  double value = 0.0;
};

/// Writes "query_id<TAB>metric<TAB>value" lines sorted by (query_id, metric),
/// followed by one "all" row per metric holding the mean over queries. The
/// mean accumulates in sorted query order, so output is deterministic.
void write_metrics_report(std::ostream& os,
                          const std::vector<MetricRow>& rows);

}  // namespace setrank
