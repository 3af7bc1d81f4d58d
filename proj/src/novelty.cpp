// SPDX-License-Identifier: Apache-2.0
#include "setrank/novelty.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "setrank/rng.hpp"
#include "setrank/tokenize.hpp"

namespace setrank {
namespace {

std::set<std::string> word_set(const std::string& text) {
  auto words = tokenize_words(text);
  return {words.begin(), words.end()};
}

double linkage_distance(const std::vector<std::vector<double>>& dist,
                        const std::vector<int>& a, const std::vector<int>& b,
                        Linkage linkage) {
  double best = linkage == Linkage::kSingle
                    ? std::numeric_limits<double>::infinity()
                    : 0.0;
  double sum = 0.0;
  for (int i : a) {
    for (int j : b) {
      double d = dist[i][j];
      if (linkage == Linkage::kSingle) {
        best = std::min(best, d);
      } else {
        best = std::max(best, d);
      }
      sum += d;
    }
  }
  if (linkage == Linkage::kAverage) {
    return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  }
  return best;
}

}  // namespace

double jaccard(const std::string& a, const std::string& b) {
  auto sa = word_set(a);
  auto sb = word_set(b);
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& w : sa) {
    inter += sb.count(w);
  }
  std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

ClusterAssignment cluster_near_duplicates(
    const std::vector<std::pair<std::string, std::string>>& passages,
    double threshold, Linkage linkage) {
  const int n = static_cast<int>(passages.size());

  // Canonical processing order: sort by passage id so clustering does not
  // depend on input order.
  std::vector<int> order(passages.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return passages[a].first < passages[b].first;
  });
  for (int i = 1; i < n; ++i) {
    if (passages[order[i - 1]].first == passages[order[i]].first) {
      throw std::invalid_argument("cluster_near_duplicates: duplicate passage id '" +
                                  passages[order[i]].first + "'");
    }
  }

  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double d = 1.0 - jaccard(passages[order[i]].second, passages[order[j]].second);
      dist[i][j] = d;
      dist[j][i] = d;
    }
  }

  // Agglomerative merge loop over index lists into the sorted order.
  std::vector<std::vector<int>> clusters;
  clusters.reserve(passages.size());
  for (int i = 0; i < n; ++i) clusters.push_back({i});

  const double cutoff = 1.0 - threshold;
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i + 1 < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        double d = linkage_distance(dist, clusters[i], clusters[j], linkage);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (!(best < cutoff)) break;
    auto merged = clusters[bi];
    merged.insert(merged.end(), clusters[bj].begin(), clusters[bj].end());
    std::sort(merged.begin(), merged.end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    clusters[bi] = std::move(merged);
  }

  // Canonical labels: clusters ordered by their smallest passage id. The
  // merge loop kept member lists sorted by position in `order`, which is id
  // order, so the first member is the smallest id.
  std::sort(clusters.begin(), clusters.end(), [&](const auto& a, const auto& b) {
    return passages[order[a.front()]].first < passages[order[b.front()]].first;
  });

  ClusterAssignment out;
  out.members.reserve(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    std::vector<std::string> ids;
    ids.reserve(clusters[c].size());
    for (int i : clusters[c]) {
      const std::string& id = passages[order[i]].first;
      ids.push_back(id);
      out.cluster_of[id] = static_cast<int>(c);
    }
    out.members.push_back(std::move(ids));
  }
  return out;
}

RankingInstance inject_duplicate(const RankingInstance& instance,
                                 std::uint64_t seed) {
  if (instance.passages.empty()) {
    throw std::invalid_argument("inject_duplicate: instance has no passages");
  }
  Rng rng(seed);
  Index pick = rng.uniform_index(instance.k());

  RankingInstance out = instance;
  const auto& src = instance.passages[static_cast<std::size_t>(pick)];
  out.passages.emplace_back(src.first + ".dup", src.second);
  if (!out.labels.empty()) {
    out.labels.push_back(instance.labels[static_cast<std::size_t>(pick)]);
  }
  if (!out.cluster_ids.empty()) {
    out.cluster_ids.push_back(
        instance.cluster_ids[static_cast<std::size_t>(pick)]);
  }
  out.duplicated_index = pick;
  return out;
}

}  // namespace setrank
