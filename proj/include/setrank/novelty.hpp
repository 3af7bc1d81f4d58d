// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "setrank/instance.hpp"

namespace setrank {

/// Jaccard similarity of the word sets of two texts. Words are produced by
/// tokenize_words (lowercased alphanumeric runs). Two empty sets count as
/// identical, so jaccard("", "") == 1.0.
double jaccard(const std::string& a, const std::string& b);

enum class Linkage { kComplete, kSingle, kAverage };

struct ClusterAssignment {
  /// passage id -> cluster id. Cluster ids are dense, starting at 0,
  /// assigned in lexicographic order of each cluster's smallest passage id.
  std::unordered_map<std::string, int> cluster_of;
  /// members[c] lists cluster c's passage ids in lexicographic order.
  std::vector<std::vector<std::string>> members;

  int cluster_count() const { return static_cast<int>(members.size()); }
};

/// Agglomerative clustering of passages by text similarity. Distance between
/// passages is 1 - jaccard(text_a, text_b); clusters merge while the linkage
/// distance of the closest pair is strictly below 1 - threshold. With the
/// default complete linkage this guarantees every intra-cluster pair has
/// similarity strictly above the threshold.
///
/// Passages are canonically sorted by id before clustering, so the result is
/// identical for any input order. Passage ids must be unique.
ClusterAssignment cluster_near_duplicates(
    const std::vector<std::pair<std::string, std::string>>& passages,
    double threshold = 0.5, Linkage linkage = Linkage::kComplete);

/// Returns a copy of the instance with one passage duplicated: the original
/// is chosen uniformly from the k passages using the given seed, and a
/// byte-identical copy of its text is appended (id suffixed with ".dup").
/// duplicated_index records the chosen original, 0-based. Labels and cluster
/// ids are extended to match the copy's source.
RankingInstance inject_duplicate(const RankingInstance& instance,
                                 std::uint64_t seed);

}  // namespace setrank
