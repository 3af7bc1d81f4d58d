// SPDX-License-Identifier: Apache-2.0
#include "setrank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace setrank {
namespace {

double discount(Index rank) {
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

double gain_of(int rel, GainMode mode) {
  if (mode == GainMode::kLinear) return static_cast<double>(rel);
  return std::exp2(static_cast<double>(rel)) - 1.0;
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in [0,1)");
  }
}

// Discounted cumulative alpha-gain of a ranking prefix.
double alpha_dcg(const std::vector<std::string>& ranking, const QrelSet& qrels,
                 const SubtopicMap& subtopics, const std::string& query_id,
                 Index k, double alpha) {
  std::unordered_map<int, int> covered;
  double dcg = 0.0;
  Index rank = 0;
  for (const auto& pid : ranking) {
    if (rank == k) break;
    ++rank;
    if (qrels.relevance(query_id, pid) < 1) continue;
    int s = subtopics.subtopic(query_id, pid);
    int prior = 0;
    if (s >= 0) prior = covered[s]++;
    dcg += std::pow(1.0 - alpha, static_cast<double>(prior)) * discount(rank);
  }
  return dcg;
}

}  // namespace

void QrelSet::set(const std::string& query_id, const std::string& passage_id,
                  int relevance) {
  by_query[query_id][passage_id] = relevance;
}

int QrelSet::relevance(const std::string& query_id,
                       const std::string& passage_id) const {
  auto q = by_query.find(query_id);
  if (q == by_query.end()) return 0;
  auto p = q->second.find(passage_id);
  return p == q->second.end() ? 0 : p->second;
}

const std::map<std::string, int>& QrelSet::judged(
    const std::string& query_id) const {
  static const std::map<std::string, int> kEmpty;
  auto q = by_query.find(query_id);
  return q == by_query.end() ? kEmpty : q->second;
}

void SubtopicMap::set(const std::string& query_id,
                      const std::string& passage_id, int subtopic) {
  by_query[query_id][passage_id] = subtopic;
}

int SubtopicMap::subtopic(const std::string& query_id,
                          const std::string& passage_id) const {
  auto q = by_query.find(query_id);
  if (q == by_query.end()) return -1;
  auto p = q->second.find(passage_id);
  return p == q->second.end() ? -1 : p->second;
}

double ndcg_at_k(const std::vector<std::string>& ranking, const QrelSet& qrels,
                 const std::string& query_id, Index k, GainMode gain) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");

  double dcg = 0.0;
  Index rank = 0;
  for (const auto& pid : ranking) {
    if (rank == k) break;
    ++rank;
    dcg += gain_of(qrels.relevance(query_id, pid), gain) * discount(rank);
  }

  std::vector<int> rels;
  for (const auto& [pid, rel] : qrels.judged(query_id)) rels.push_back(rel);
  std::sort(rels.begin(), rels.end(), std::greater<int>());
  double idcg = 0.0;
  for (Index r = 0; r < std::min<Index>(k, static_cast<Index>(rels.size()));
       ++r) {
    idcg += gain_of(rels[static_cast<std::size_t>(r)], gain) * discount(r + 1);
  }
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

std::vector<std::string> greedy_ideal(const QrelSet& qrels,
                                      const SubtopicMap& subtopics,
                                      const std::string& query_id, Index k,
                                      double alpha) {
  check_alpha(alpha);
  // Candidates: judged relevant passages, in id order for deterministic ties.
  std::vector<std::string> pool;
  for (const auto& [pid, rel] : qrels.judged(query_id)) {
    if (rel >= 1) pool.push_back(pid);
  }

  std::vector<std::string> ideal;
  std::unordered_map<int, int> covered;
  std::unordered_set<std::size_t> used;
  while (static_cast<Index>(ideal.size()) < k && used.size() < pool.size()) {
    double best_gain = -1.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (used.count(i)) continue;
      int s = subtopics.subtopic(query_id, pool[i]);
      int prior = 0;
      if (s >= 0) {
        auto it = covered.find(s);
        if (it != covered.end()) prior = it->second;
      }
      double g = std::pow(1.0 - alpha, static_cast<double>(prior));
      // Strict > keeps the earliest (smallest id) candidate on ties.
      if (g > best_gain) {
        best_gain = g;
        best = i;
      }
    }
    used.insert(best);
    int s = subtopics.subtopic(query_id, pool[best]);
    if (s >= 0) covered[s]++;
    ideal.push_back(pool[best]);
  }
  return ideal;
}

double alpha_ndcg_at_k(const std::vector<std::string>& ranking,
                       const QrelSet& qrels, const SubtopicMap& subtopics,
                       const std::string& query_id, Index k, double alpha) {
  if (k < 1) throw std::invalid_argument("alpha_ndcg_at_k: k must be >= 1");
  check_alpha(alpha);
  double dcg = alpha_dcg(ranking, qrels, subtopics, query_id, k, alpha);
  auto ideal = greedy_ideal(qrels, subtopics, query_id, k, alpha);
  double idcg = alpha_dcg(ideal, qrels, subtopics, query_id, k, alpha);
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

void write_metrics_report(std::ostream& os,
                          const std::vector<MetricRow>& rows) {
  auto sorted = rows;
  std::sort(sorted.begin(), sorted.end(),
            [](const MetricRow& a, const MetricRow& b) {
              return std::tie(a.query_id, a.metric) <
                     std::tie(b.query_id, b.metric);
            });

  std::map<std::string, std::pair<double, Index>> totals;
  char buf[64];
  for (const auto& row : sorted) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.value);
    os << row.query_id << '\t' << row.metric << '\t' << buf << '\n';
    auto& [sum, count] = totals[row.metric];
    sum += row.value;
    ++count;
  }
  for (const auto& [metric, agg] : totals) {
    std::snprintf(buf, sizeof(buf), "%.6f",
                  agg.first / static_cast<double>(agg.second));
    os << "all" << '\t' << metric << '\t' << buf << '\n';
  }
}

}  // namespace setrank
