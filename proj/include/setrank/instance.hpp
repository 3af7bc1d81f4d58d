// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "setrank/tensor.hpp"

namespace setrank {

/// One training/evaluation unit: a query with its candidate passages and
/// whatever supervision the stage carries.
struct RankingInstance {
  std::string query_id;
  std::string query_text;
  std::vector<std::pair<std::string, std::string>> passages;  // (id, text)
  std::vector<Scalar> labels;    // relevance-like, higher = preferred
  Index positive_index = -1;     // stage-1 contrastive target, -1 = absent
  std::vector<int> cluster_ids;  // near-duplicate cluster per passage
  Index duplicated_index = -1;   // original copied by inject_duplicate

  Index k() const { return static_cast<Index>(passages.size()); }
};

}  // namespace setrank
