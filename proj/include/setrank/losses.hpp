// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "setrank/tensor.hpp"

namespace setrank {

/// Scores with whatever supervision a training stage carries. labels are
/// relevance-like (higher = preferred); teacher rank positions are converted
/// on ingest via label = k - rank_position.
struct LabeledScores {
  Tensor scores;                // rank-1, one score per passage
  std::vector<Scalar> labels;   // empty when unused
  Index positive_index = -1;    // -1 = absent
  std::vector<int> cluster_ids;  // empty when unused
};

/// Contrastive loss: -log softmax(scores)[positive_index]. Computed with
/// max-shift stability; exponent terms are summed in ascending order, so the
/// value is exactly independent of input order.
Tensor info_nce(const Tensor& scores, Index positive_index);

/// Pairwise logistic loss: sum over ordered pairs (i, j) with labels[i] <
/// labels[j] of softplus(scores[i] - scores[j]), each term computed as
/// max(d, 0) + log1p(exp(-|d|)). Terms are summed in ascending order. Equal
/// labels contribute nothing; k = 1 gives 0.
Tensor rank_net(const Tensor& scores, const std::vector<Scalar>& labels);

/// Duplicate-aware InfoNCE over k originals plus one appended copy at the
/// last index: info_nce over the originals plus a binary cross-entropy over
/// dup_probs with target 1 at duplicated_index. The appended copy is
/// excluded from both terms unless include_appended_copy is set, in which
/// case it joins the InfoNCE denominator and carries BCE target 1.
/// Probabilities are clipped to [1e-12, 1 - 1e-12] inside the BCE.
Tensor da_info_nce(const Tensor& scores, const Tensor& dup_probs,
                   Index positive_index, Index duplicated_index,
                   bool include_appended_copy = false);

/// labels[i] zeroed whenever a same-cluster passage outscores passage i
/// strictly; ties keep labels. Pure data transform, no gradient flows.
std::vector<Scalar> adjusted_labels(const ArrayX& scores,
                                    const std::vector<Scalar>& labels,
                                    const std::vector<int>& cluster_ids);

/// rank_net over labels adjusted against the current scores; the adjusted
/// labels are data per evaluation, not differentiated through.
Tensor na_rank_net(const Tensor& scores, const std::vector<Scalar>& labels,
                   const std::vector<int>& cluster_ids);

}  // namespace setrank
