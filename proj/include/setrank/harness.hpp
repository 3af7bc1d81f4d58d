// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "setrank/encoder.hpp"
#include "setrank/instance.hpp"
#include "setrank/metrics.hpp"
#include "setrank/trec_io.hpp"

namespace setrank {

struct SyntheticConfig {
  Index num_queries = 200;
  Index passages_per_query = 8;
  Index vocab_size = 500;
  Index passage_length = 12;  // words per passage, at least 6
  double duplicate_rate = 0.0;
  double noise_rate = 0.0;  // teacher label noise, applied in stage 2
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  std::vector<std::pair<std::string, std::string>> corpus;   // (id, text)
  std::vector<std::pair<std::string, std::string>> queries;  // (id, text)
  QrelSet qrels;
  SubtopicMap clusters;  // ground-truth near-duplicate clusters
  std::vector<RunEntry> first_stage;
};

/// Synthetic retrieval collection. Each query plants one relevant passage
/// (rel 2) sharing all query words, hard negatives (rel 1) sharing half of
/// them, and random negatives (rel 0) sharing none. With probability
/// duplicate_rate a near-duplicate variant of the relevant passage (word
/// substitutions keeping Jaccard above 0.5) replaces one random negative and
/// joins the relevant passage's cluster. The first-stage run orders passages
/// by query word overlap, ties by passage id. Bit-identical for a fixed
/// config.
SyntheticData generate_synthetic(const SyntheticConfig& config);

/// (id, text) pairs as a lookup map; throws on duplicate ids.
std::unordered_map<std::string, std::string> text_index(
    const std::vector<std::pair<std::string, std::string>>& pairs);

/// One instance per query: the planted relevant passage (smallest rel-2 id)
/// plus the first `negatives` passages outside its cluster in first-stage
/// order. Labels carry relevance grades; positive_index marks the planted
/// passage.
std::vector<RankingInstance> build_stage1_instances(const SyntheticData& data,
                                                    Index negatives = 7);

/// One listwise instance per query over the first-stage top max_passages.
/// Teacher labels follow the ground-truth ordering (relevance descending,
/// first-stage rank ascending): the passage at position p of k gets label
/// k - p. With probability noise_rate each label is swapped with a uniformly
/// chosen partner, per query under the seed.
std::vector<RankingInstance> build_stage2_instances(const SyntheticData& data,
                                                    Index max_passages = 100,
                                                    double noise_rate = 0.0,
                                                    std::uint64_t seed = 1);

enum class Stage1Loss { kInfoNce, kDaInfoNce };
enum class Stage2Loss { kRankNet, kNaRankNet };

Stage1Loss stage1_loss_from_string(const std::string& name);
Stage2Loss stage2_loss_from_string(const std::string& name);
std::string to_string(Stage1Loss loss);
std::string to_string(Stage2Loss loss);

struct Stage1Options {
  Stage1Loss loss = Stage1Loss::kInfoNce;
  Index max_steps = 400;
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;
  // Duplicate-aware early stop: halt once the held-out duplicate BCE stays
  // below duplicate_bce_stop for stop_patience consecutive steps.
  double duplicate_bce_stop = 0.05;
  Index stop_patience = 100;
  bool include_appended_copy = false;
};

struct Stage2Options {
  Stage2Loss loss = Stage2Loss::kRankNet;
  Index epochs = 1;
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;
};

struct TrainReport {
  std::vector<double> loss_curve;  // training loss, one entry per step
  std::vector<double> heldout_bce_curve;  // duplicate-aware stage 1 only
  Index steps_run = 0;
  bool early_stopped = false;
  double final_heldout_bce = std::numeric_limits<double>::quiet_NaN();
};

/// Contrastive first-stage training, one instance per step, AdamW updates in
/// place. For da_info_nce every training instance gets a seeded injected
/// duplicate, and the held-out instances (pre-injected once) drive the early
/// stop. Throws runtime_error when the loss turns non-finite. Zero max_steps
/// leaves params untouched.
TrainReport train_stage1(ModelParams& params, const ModelConfig& config,
                         const std::vector<RankingInstance>& train,
                         const std::vector<RankingInstance>& heldout,
                         const Vocab& vocab, const Stage1Options& options);

/// Listwise second-stage training over teacher labels; epochs full passes in
/// seeded shuffled order. Zero epochs leaves params untouched.
TrainReport train_stage2(ModelParams& params, const ModelConfig& config,
                         const std::vector<RankingInstance>& train,
                         const Vocab& vocab, const Stage2Options& options);

/// Mean rank_net loss over instances, no gradients.
double mean_rank_net_loss(const ModelParams& params, const ModelConfig& config,
                          const std::vector<RankingInstance>& instances,
                          const Vocab& vocab);

/// Mean per-passage duplicate BCE over instances that carry an injected
/// duplicate (targets: 1 at duplicated_index, and at the appended copy when
/// include_appended_copy is set; 0 elsewhere).
double mean_duplicate_bce(const ModelParams& params, const ModelConfig& config,
                          const std::vector<RankingInstance>& instances,
                          const Vocab& vocab,
                          bool include_appended_copy = false);

/// Re-ranks each query's top_k run entries in one forward pass. Passages are
/// canonically sorted by id before encoding, so any input permutation of the
/// same top_k set produces byte-identical output. Output is ordered by score
/// descending, ties by passage id, ranks from 1. Missing passage or query
/// texts raise runtime_error listing the ids.
std::vector<RunEntry> rerank(
    const ModelParams& params, const ModelConfig& config, const Vocab& vocab,
    const std::vector<RunEntry>& run,
    const std::vector<std::pair<std::string, std::string>>& corpus,
    const std::vector<std::pair<std::string, std::string>>& queries,
    Index top_k = 100, const std::string& tag = "setrank");

enum class PerturbMode { kOriginal, kRandom, kIdeal, kReverseIdeal };

PerturbMode perturb_mode_from_string(const std::string& name);
std::string to_string(PerturbMode mode);

/// Reorders each query's entries: original keeps the order, random shuffles
/// under a per-query stream of the seed, ideal sorts by relevance descending
/// (ties by original rank), reverse_ideal is the exact reverse of ideal.
/// Ranks are reassigned from 1 and scores rewritten as k - rank + 1; the tag
/// becomes the mode name.
std::vector<RunEntry> perturb(const std::vector<RunEntry>& run,
                              PerturbMode mode, const QrelSet& qrels,
                              std::uint64_t seed);

/// entry (i, j) = fraction of queries whose input rank i+1 passage lands at
/// output rank j+1, both truncated at depth. Queries with fewer than depth
/// entries contribute only to the rows they populate; rows over
/// fully-populated ranks sum to 1. Throws runtime_error when the two runs
/// disagree on queries or per-query passage sets.
Eigen::MatrixXd rank_change_matrix(const std::vector<RunEntry>& before,
                                   const std::vector<RunEntry>& after,
                                   Index depth = 100);

/// CSV with a header row and column of 1-based rank indices.
void write_rank_change_csv(std::ostream& os, const Eigen::MatrixXd& matrix);

}  // namespace setrank
