// SPDX-License-Identifier: Apache-2.0
#include "setrank/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace setrank {

namespace {

constexpr Scalar kProbClip = 1e-12;

Scalar ordered_sum(std::vector<Scalar>& terms) {
  std::sort(terms.begin(), terms.end());
  Scalar acc = 0;
  for (Scalar t : terms) acc += t;
  return acc;
}

Scalar softplus(Scalar d) {
  return std::max(d, 0.0) + std::log1p(std::exp(-std::abs(d)));
}

Scalar logistic(Scalar d) { return 1.0 / (1.0 + std::exp(-d)); }

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Tensor info_nce(const Tensor& scores, Index positive_index) {
  require(scores.defined() && scores.rank() == 1 && scores.size() >= 1,
          "info_nce: scores must be a nonempty rank-1 tensor");
  require(positive_index >= 0 && positive_index < scores.size(),
          "info_nce: positive_index out of range");
  const ArrayX& s = scores.values();
  const Index k = s.size();
  const Scalar m = s.maxCoeff();
  std::vector<Scalar> exps(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    exps[static_cast<std::size_t>(i)] = std::exp(s[i] - m);
  }
  std::vector<Scalar> terms = exps;
  const Scalar z = ordered_sum(terms);
  ArrayX value(1);
  value[0] = std::log(z) - (s[positive_index] - m);
  return make_op({}, std::move(value), {scores},
                 [scores, exps, z, positive_index](const Tensor& self) {
                   const Scalar g = self.grad()[0];
                   ArrayX ds(scores.size());
                   for (Index i = 0; i < scores.size(); ++i) {
                     Scalar p = exps[static_cast<std::size_t>(i)] / z;
                     if (i == positive_index) p -= 1.0;
                     ds[i] = g * p;
                   }
                   accumulate_to(scores, ds);
                 });
}

Tensor rank_net(const Tensor& scores, const std::vector<Scalar>& labels) {
  require(scores.defined() && scores.rank() == 1 && scores.size() >= 1,
          "rank_net: scores must be a nonempty rank-1 tensor");
  require(static_cast<Index>(labels.size()) == scores.size(),
          "rank_net: labels must match scores length");
  const ArrayX& s = scores.values();
  const Index k = s.size();
  std::vector<Scalar> terms;
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      if (labels[static_cast<std::size_t>(i)] <
          labels[static_cast<std::size_t>(j)]) {
        terms.push_back(softplus(s[i] - s[j]));
      }
    }
  }
  ArrayX value(1);
  value[0] = ordered_sum(terms);
  return make_op({}, std::move(value), {scores},
                 [scores, labels](const Tensor& self) {
                   const Scalar g = self.grad()[0];
                   const ArrayX& s = scores.values();
                   const Index k = s.size();
                   ArrayX ds = ArrayX::Zero(k);
                   for (Index i = 0; i < k; ++i) {
                     for (Index j = 0; j < k; ++j) {
                       if (labels[static_cast<std::size_t>(i)] <
                           labels[static_cast<std::size_t>(j)]) {
                         const Scalar w = logistic(s[i] - s[j]);
                         ds[i] += g * w;
                         ds[j] -= g * w;
                       }
                     }
                   }
                   accumulate_to(scores, ds);
                 });
}

Tensor da_info_nce(const Tensor& scores, const Tensor& dup_probs,
                   Index positive_index, Index duplicated_index,
                   bool include_appended_copy) {
  require(scores.defined() && scores.rank() == 1 && scores.size() >= 2,
          "da_info_nce: scores must hold k originals plus the copy");
  require(dup_probs.defined() && dup_probs.rank() == 1 &&
              dup_probs.size() == scores.size(),
          "da_info_nce: dup_probs must match scores length");
  const Index k = scores.size() - 1;  // originals; the copy sits at index k
  require(positive_index >= 0 && positive_index < k,
          "da_info_nce: positive_index out of the original range");
  require(duplicated_index >= 0 && duplicated_index < k,
          "da_info_nce: duplicated_index out of the original range");
  const Index included = include_appended_copy ? k + 1 : k;

  const ArrayX& s = scores.values();
  Scalar m = s[0];
  for (Index i = 1; i < included; ++i) m = std::max(m, s[i]);
  std::vector<Scalar> exps(static_cast<std::size_t>(included));
  for (Index i = 0; i < included; ++i) {
    exps[static_cast<std::size_t>(i)] = std::exp(s[i] - m);
  }
  std::vector<Scalar> terms = exps;
  const Scalar z = ordered_sum(terms);
  const Scalar nce = std::log(z) - (s[positive_index] - m);

  const ArrayX& p = dup_probs.values();
  std::vector<Scalar> bce_terms;
  for (Index i = 0; i < included; ++i) {
    const Scalar pc = std::clamp(p[i], kProbClip, 1.0 - kProbClip);
    const bool target = i == duplicated_index ||
                        (include_appended_copy && i == k);
    bce_terms.push_back(target ? -std::log(pc) : -std::log(1.0 - pc));
  }
  ArrayX value(1);
  value[0] = nce + ordered_sum(bce_terms);

  return make_op(
      {}, std::move(value), {scores, dup_probs},
      [scores, dup_probs, exps, z, positive_index, duplicated_index, included,
       k, include_appended_copy](const Tensor& self) {
        const Scalar g = self.grad()[0];
        if (scores.requires_grad()) {
          ArrayX ds = ArrayX::Zero(scores.size());
          for (Index i = 0; i < included; ++i) {
            Scalar grad = exps[static_cast<std::size_t>(i)] / z;
            if (i == positive_index) grad -= 1.0;
            ds[i] = g * grad;
          }
          accumulate_to(scores, ds);
        }
        if (dup_probs.requires_grad()) {
          const ArrayX& p = dup_probs.values();
          ArrayX dp = ArrayX::Zero(dup_probs.size());
          for (Index i = 0; i < included; ++i) {
            if (p[i] <= kProbClip || p[i] >= 1.0 - kProbClip) {
              continue;  // clipped flat region
            }
            const bool target = i == duplicated_index ||
                                (include_appended_copy && i == k);
            dp[i] = g * (target ? -1.0 / p[i] : 1.0 / (1.0 - p[i]));
          }
          accumulate_to(dup_probs, dp);
        }
      });
}

std::vector<Scalar> adjusted_labels(const ArrayX& scores,
                                    const std::vector<Scalar>& labels,
                                    const std::vector<int>& cluster_ids) {
  const std::size_t k = labels.size();
  require(static_cast<std::size_t>(scores.size()) == k &&
              cluster_ids.size() == k,
          "adjusted_labels: scores, labels and cluster_ids must match");
  std::vector<Scalar> adjusted(labels);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i && cluster_ids[i] == cluster_ids[j] &&
          scores[static_cast<Index>(i)] < scores[static_cast<Index>(j)]) {
        adjusted[i] = 0.0;
        break;
      }
    }
  }
  return adjusted;
}

Tensor na_rank_net(const Tensor& scores, const std::vector<Scalar>& labels,
                   const std::vector<int>& cluster_ids) {
  require(scores.defined() && scores.rank() == 1,
          "na_rank_net: scores must be rank-1");
  return rank_net(scores,
                  adjusted_labels(scores.values(), labels, cluster_ids));
}

}  // namespace setrank
