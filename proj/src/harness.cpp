// SPDX-License-Identifier: Apache-2.0
#include "setrank/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "setrank/losses.hpp"
#include "setrank/novelty.hpp"
#include "setrank/optimizer.hpp"
#include "setrank/rng.hpp"

namespace setrank {
namespace {

constexpr Index kQueryWords = 4;

std::string word(Index i) { return "w" + std::to_string(i); }

std::string zero_pad(Index value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*lld", width,
                static_cast<long long>(value));
  return buf;
}

std::string join_words(const std::vector<Index>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += word(ids[i]);
  }
  return out;
}

std::vector<Index> sample_distinct(Rng& rng, Index vocab, Index count,
                                   const std::unordered_set<Index>& avoid) {
  std::unordered_set<Index> chosen;
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<Index>(out.size()) < count) {
    Index w = rng.uniform_index(vocab);
    if (avoid.count(w) || chosen.count(w)) continue;
    chosen.insert(w);
    out.push_back(w);
  }
  return out;
}

struct DraftPassage {
  std::vector<Index> words;
  int rel = 0;
  int cluster = 0;
};

// One query's passages; deterministic in the rng state.
std::vector<DraftPassage> draft_query_passages(Rng& rng,
                                               const SyntheticConfig& config,
                                               const std::vector<Index>& query) {
  const Index L = config.passage_length;
  const Index V = config.vocab_size;
  std::unordered_set<Index> query_set(query.begin(), query.end());

  std::vector<DraftPassage> passages;

  DraftPassage relevant;
  relevant.words = query;
  auto filler = sample_distinct(rng, V, L - kQueryWords, query_set);
  relevant.words.insert(relevant.words.end(), filler.begin(), filler.end());
  relevant.rel = 2;
  relevant.cluster = 0;
  passages.push_back(relevant);

  bool make_dup = rng.uniform() < config.duplicate_rate;
  if (make_dup && config.passages_per_query >= 2) {
    DraftPassage dup = relevant;
    // Substitute m filler words; Jaccard becomes (L-m)/(L+m) > 0.5.
    Index m = std::max<Index>(1, L / 4);
    std::unordered_set<Index> avoid(dup.words.begin(), dup.words.end());
    auto fresh = sample_distinct(rng, V, m, avoid);
    for (Index i = 0; i < m; ++i) {
      dup.words[static_cast<std::size_t>(kQueryWords + i)] =
          fresh[static_cast<std::size_t>(i)];
    }
    rng.shuffle(dup.words);
    passages.push_back(dup);
  }

  Index slots = config.passages_per_query - static_cast<Index>(passages.size());
  Index hard_count = slots / 2;
  int next_cluster = 1;
  for (Index h = 0; h < hard_count; ++h) {
    DraftPassage hard;
    hard.words.assign(query.begin(), query.begin() + kQueryWords / 2);
    auto rest = sample_distinct(rng, V, L - kQueryWords / 2, query_set);
    hard.words.insert(hard.words.end(), rest.begin(), rest.end());
    hard.rel = 1;
    hard.cluster = next_cluster++;
    passages.push_back(hard);
  }
  for (Index r = 0; r < slots - hard_count; ++r) {
    DraftPassage random;
    random.words = sample_distinct(rng, V, L, query_set);
    random.rel = 0;
    random.cluster = next_cluster++;
    passages.push_back(random);
  }
  return passages;
}

bool clusters_verified(const std::vector<DraftPassage>& passages) {
  for (std::size_t i = 0; i < passages.size(); ++i) {
    for (std::size_t j = i + 1; j < passages.size(); ++j) {
      double sim =
          jaccard(join_words(passages[i].words), join_words(passages[j].words));
      bool same = passages[i].cluster == passages[j].cluster;
      if (same && !(sim > 0.5)) return false;
      if (!same && sim > 0.5) return false;
    }
  }
  return true;
}

std::map<std::string, std::vector<RunEntry>> group_run(
    const std::vector<RunEntry>& run) {
  std::map<std::string, std::vector<RunEntry>> grouped;
  for (const auto& e : run) grouped[e.query_id].push_back(e);
  for (auto& [qid, rows] : grouped) {
    std::sort(rows.begin(), rows.end(), [](const RunEntry& a, const RunEntry& b) {
      return a.rank < b.rank;
    });
  }
  return grouped;
}

EncodedBatch instance_batch(const RankingInstance& inst, const Vocab& vocab) {
  return encode_batch(inst.query_text, inst.passages, vocab);
}

// Mean per-passage BCE of one duplicate-injected batch.
double duplicate_bce(const ArrayX& probs, Index duplicated_index,
                     bool include_appended_copy) {
  constexpr double kClip = 1e-12;
  Index total = probs.size();
  Index scored = include_appended_copy ? total : total - 1;
  double sum = 0.0;
  for (Index i = 0; i < scored; ++i) {
    bool positive = i == duplicated_index ||
                    (include_appended_copy && i == total - 1);
    double p = std::clamp(probs(i), kClip, 1.0 - kClip);
    sum += positive ? -std::log(p) : -std::log1p(-p);
  }
  return sum / static_cast<double>(scored);
}

}  // namespace

void SyntheticConfig::validate() const {
  if (num_queries < 1 || passages_per_query < 2) {
    throw std::invalid_argument("synthetic config: sizes must be positive");
  }
  if (passage_length < kQueryWords + 1) {
    throw std::invalid_argument("synthetic config: passage_length too small");
  }
  if (duplicate_rate < 0.0 || duplicate_rate > 1.0 || noise_rate < 0.0 ||
      noise_rate > 1.0) {
    throw std::invalid_argument("synthetic config: rates must lie in [0,1]");
  }
  if (vocab_size < 2 * (passage_length + kQueryWords + 4)) {
    throw std::invalid_argument(
        "synthetic config: vocab_size too small for distinct passages");
  }
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  SyntheticData data;
  Index next_pid = 0;

  for (Index qi = 0; qi < config.num_queries; ++qi) {
    std::string qid = "q" + zero_pad(qi, 4);

    std::vector<DraftPassage> passages;
    std::vector<Index> query;
    bool ok = false;
    for (std::uint64_t attempt = 0; attempt < 100 && !ok; ++attempt) {
      Rng rng(derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(qi)),
                          attempt));
      query = sample_distinct(rng, config.vocab_size, kQueryWords, {});
      passages = draft_query_passages(rng, config, query);
      ok = clusters_verified(passages);
    }
    if (!ok) {
      throw std::runtime_error(
          "generate_synthetic: could not draw sufficiently distinct passages; "
          "increase vocab_size");
    }

    data.queries.emplace_back(qid, join_words(query));

    std::unordered_set<Index> query_set(query.begin(), query.end());
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& p : passages) {
      std::string pid = "p" + zero_pad(next_pid++, 6);
      data.corpus.emplace_back(pid, join_words(p.words));
      data.qrels.set(qid, pid, p.rel);
      data.clusters.set(qid, pid, p.cluster);

      std::set<Index> distinct(p.words.begin(), p.words.end());
      double overlap = 0.0;
      for (Index w : distinct) overlap += query_set.count(w) ? 1.0 : 0.0;
      scored.emplace_back(overlap, pid);
    }

    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t r = 0; r < scored.size(); ++r) {
      data.first_stage.push_back({qid, scored[r].second,
                                  static_cast<Index>(r) + 1, scored[r].first,
                                  "first-stage"});
    }
  }
  return data;
}

std::unordered_map<std::string, std::string> text_index(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::unordered_map<std::string, std::string> index;
  for (const auto& [id, text] : pairs) {
    if (!index.emplace(id, text).second) {
      throw std::invalid_argument("duplicate id: " + id);
    }
  }
  return index;
}

std::vector<RankingInstance> build_stage1_instances(const SyntheticData& data,
                                                    Index negatives) {
  auto corpus = text_index(data.corpus);
  auto queries = text_index(data.queries);
  auto grouped = group_run(data.first_stage);

  std::vector<RankingInstance> instances;
  for (const auto& [qid, rows] : grouped) {
    // The planted positive: smallest rel-2 passage id.
    std::string positive;
    for (const auto& [pid, rel] : data.qrels.judged(qid)) {
      if (rel == 2) {
        positive = pid;
        break;
      }
    }
    if (positive.empty()) continue;
    int positive_cluster = data.clusters.subtopic(qid, positive);

    RankingInstance inst;
    inst.query_id = qid;
    inst.query_text = queries.at(qid);
    Index taken_negatives = 0;
    for (const auto& row : rows) {
      bool is_positive = row.passage_id == positive;
      bool same_cluster =
          data.clusters.subtopic(qid, row.passage_id) == positive_cluster;
      if (!is_positive) {
        if (same_cluster || taken_negatives == negatives) continue;
        ++taken_negatives;
      }
      if (is_positive) inst.positive_index = inst.k();
      inst.passages.emplace_back(row.passage_id, corpus.at(row.passage_id));
      inst.labels.push_back(
          static_cast<Scalar>(data.qrels.relevance(qid, row.passage_id)));
      inst.cluster_ids.push_back(data.clusters.subtopic(qid, row.passage_id));
    }
    instances.push_back(std::move(inst));
  }
  return instances;
}

std::vector<RankingInstance> build_stage2_instances(const SyntheticData& data,
                                                    Index max_passages,
                                                    double noise_rate,
                                                    std::uint64_t seed) {
  auto corpus = text_index(data.corpus);
  auto queries = text_index(data.queries);
  auto grouped = group_run(data.first_stage);

  std::vector<RankingInstance> instances;
  std::uint64_t qindex = 0;
  for (const auto& [qid, rows] : grouped) {
    RankingInstance inst;
    inst.query_id = qid;
    inst.query_text = queries.at(qid);
    Index k = std::min<Index>(max_passages, static_cast<Index>(rows.size()));
    for (Index i = 0; i < k; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      inst.passages.emplace_back(row.passage_id, corpus.at(row.passage_id));
      inst.cluster_ids.push_back(data.clusters.subtopic(qid, row.passage_id));
    }

    // Teacher ordering: relevance descending, first-stage rank ascending.
    std::vector<Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      int ra = data.qrels.relevance(qid, inst.passages[a].first);
      int rb = data.qrels.relevance(qid, inst.passages[b].first);
      if (ra != rb) return ra > rb;
      return a < b;
    });
    inst.labels.assign(static_cast<std::size_t>(k), 0.0);
    for (Index p = 0; p < k; ++p) {
      inst.labels[static_cast<std::size_t>(order[p])] =
          static_cast<Scalar>(k - p);
    }

    Rng rng(derive_seed(seed, qindex++));
    for (Index i = 0; i < k; ++i) {
      if (rng.uniform() < noise_rate) {
        Index j = rng.uniform_index(k);
        std::swap(inst.labels[static_cast<std::size_t>(i)],
                  inst.labels[static_cast<std::size_t>(j)]);
      }
    }
    instances.push_back(std::move(inst));
  }
  return instances;
}

Stage1Loss stage1_loss_from_string(const std::string& name) {
  if (name == "info_nce") return Stage1Loss::kInfoNce;
  if (name == "da_info_nce") return Stage1Loss::kDaInfoNce;
  throw std::invalid_argument("unknown stage-1 loss: " + name);
}

Stage2Loss stage2_loss_from_string(const std::string& name) {
  if (name == "rank_net") return Stage2Loss::kRankNet;
  if (name == "na_rank_net") return Stage2Loss::kNaRankNet;
  throw std::invalid_argument("unknown stage-2 loss: " + name);
}

std::string to_string(Stage1Loss loss) {
  return loss == Stage1Loss::kInfoNce ? "info_nce" : "da_info_nce";
}

std::string to_string(Stage2Loss loss) {
  return loss == Stage2Loss::kRankNet ? "rank_net" : "na_rank_net";
}

namespace {

// Applies one AdamW update over the fixed trainable set, seeding zero
// gradients for parameters the loss did not reach.
void apply_update(std::vector<Tensor>& trainable, ModelParams& params,
                  OptimizerState& opt) {
  if (trainable.empty()) {
    for (Tensor& t : params.parameters()) {
      if (t.has_grad()) trainable.push_back(t);
    }
  }
  if (trainable.empty()) return;  // constant loss, nothing to update
  for (Tensor& t : trainable) {
    if (!t.has_grad()) t.accumulate_grad(ArrayX::Zero(t.size()));
  }
  adamw_step(trainable, opt);
}

[[noreturn]] void diverged(const char* stage, Index step) {
  throw std::runtime_error(std::string(stage) +
                           " training diverged: non-finite loss at step " +
                           std::to_string(step));
}

}  // namespace

TrainReport train_stage1(ModelParams& params, const ModelConfig& config,
                         const std::vector<RankingInstance>& train,
                         const std::vector<RankingInstance>& heldout,
                         const Vocab& vocab, const Stage1Options& options) {
  if (train.empty()) {
    throw std::invalid_argument("train_stage1: no training instances");
  }
  const bool da = options.loss == Stage1Loss::kDaInfoNce;

  // Held-out duplicates are injected once so the early-stop metric is stable.
  struct HeldoutItem {
    EncodedBatch batch;
    Index duplicated_index;
  };
  std::vector<HeldoutItem> held;
  if (da) {
    for (std::size_t i = 0; i < heldout.size(); ++i) {
      RankingInstance inj = heldout[i].duplicated_index >= 0
                                ? heldout[i]
                                : inject_duplicate(
                                      heldout[i],
                                      derive_seed(options.seed, 0xBEEF00 + i));
      held.push_back({instance_batch(inj, vocab), inj.duplicated_index});
    }
  }
  auto heldout_bce = [&]() {
    NoGradGuard guard;
    double total = 0.0;
    for (const auto& h : held) {
      ArrayX probs = score_duplicates(params, h.batch, config).values();
      total += duplicate_bce(probs, h.duplicated_index,
                             options.include_appended_copy);
    }
    return total / static_cast<double>(held.size());
  };

  TrainReport report;
  OptimizerState opt;
  opt.learning_rate = options.learning_rate;
  std::vector<Tensor> trainable;

  Rng order_rng(derive_seed(options.seed, 0x0EDE));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Index streak = 0;
  for (Index step = 0; step < options.max_steps; ++step) {
    if (step % static_cast<Index>(train.size()) == 0) order_rng.shuffle(order);
    const auto& inst =
        train[order[static_cast<std::size_t>(step) % train.size()]];

    Tensor loss;
    if (da) {
      RankingInstance inj = inject_duplicate(
          inst, derive_seed(options.seed, 0xD00D00 + static_cast<std::uint64_t>(step)));
      auto batch = instance_batch(inj, vocab);
      auto scores = score_relevance(params, batch, config);
      auto dups = score_duplicates(params, batch, config);
      loss = da_info_nce(scores, dups, inj.positive_index,
                         inj.duplicated_index, options.include_appended_copy);
    } else {
      auto batch = instance_batch(inst, vocab);
      loss = info_nce(score_relevance(params, batch, config),
                      inst.positive_index);
    }

    double value = loss.values()(0);
    if (!std::isfinite(value)) diverged("stage-1", step);
    report.loss_curve.push_back(value);

    params.zero_grads();
    backward(loss);
    apply_update(trainable, params, opt);
    ++report.steps_run;

    if (da && !held.empty()) {
      double bce = heldout_bce();
      report.heldout_bce_curve.push_back(bce);
      report.final_heldout_bce = bce;
      streak = bce < options.duplicate_bce_stop ? streak + 1 : 0;
      if (streak >= options.stop_patience) {
        report.early_stopped = true;
        break;
      }
    }
  }
  return report;
}

TrainReport train_stage2(ModelParams& params, const ModelConfig& config,
                         const std::vector<RankingInstance>& train,
                         const Vocab& vocab, const Stage2Options& options) {
  if (train.empty()) {
    throw std::invalid_argument("train_stage2: no training instances");
  }

  TrainReport report;
  OptimizerState opt;
  opt.learning_rate = options.learning_rate;
  std::vector<Tensor> trainable;

  Rng order_rng(derive_seed(options.seed, 0x57A6E2));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (Index epoch = 0; epoch < options.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t idx : order) {
      const auto& inst = train[idx];
      auto batch = instance_batch(inst, vocab);
      auto scores = score_relevance(params, batch, config);
      Tensor loss = options.loss == Stage2Loss::kRankNet
                        ? rank_net(scores, inst.labels)
                        : na_rank_net(scores, inst.labels, inst.cluster_ids);

      double value = loss.values()(0);
      if (!std::isfinite(value)) diverged("stage-2", report.steps_run);
      report.loss_curve.push_back(value);

      params.zero_grads();
      backward(loss);
      apply_update(trainable, params, opt);
      ++report.steps_run;
    }
  }
  return report;
}

double mean_rank_net_loss(const ModelParams& params, const ModelConfig& config,
                          const std::vector<RankingInstance>& instances,
                          const Vocab& vocab) {
  if (instances.empty()) {
    throw std::invalid_argument("mean_rank_net_loss: no instances");
  }
  NoGradGuard guard;
  double total = 0.0;
  for (const auto& inst : instances) {
    auto batch = instance_batch(inst, vocab);
    auto scores = score_relevance(params, batch, config);
    total += rank_net(scores, inst.labels).values()(0);
  }
  return total / static_cast<double>(instances.size());
}

double mean_duplicate_bce(const ModelParams& params, const ModelConfig& config,
                          const std::vector<RankingInstance>& instances,
                          const Vocab& vocab, bool include_appended_copy) {
  if (instances.empty()) {
    throw std::invalid_argument("mean_duplicate_bce: no instances");
  }
  NoGradGuard guard;
  double total = 0.0;
  for (const auto& inst : instances) {
    if (inst.duplicated_index < 0) {
      throw std::invalid_argument(
          "mean_duplicate_bce: instance carries no injected duplicate");
    }
    auto batch = instance_batch(inst, vocab);
    ArrayX probs = score_duplicates(params, batch, config).values();
    total += duplicate_bce(probs, inst.duplicated_index, include_appended_copy);
  }
  return total / static_cast<double>(instances.size());
}

std::vector<RunEntry> rerank(
    const ModelParams& params, const ModelConfig& config, const Vocab& vocab,
    const std::vector<RunEntry>& run,
    const std::vector<std::pair<std::string, std::string>>& corpus,
    const std::vector<std::pair<std::string, std::string>>& queries,
    Index top_k, const std::string& tag) {
  auto corpus_map = text_index(corpus);
  auto query_map = text_index(queries);
  auto grouped = group_run(run);

  std::vector<std::string> missing;
  for (const auto& [qid, rows] : grouped) {
    if (!query_map.count(qid)) missing.push_back("query:" + qid);
    for (const auto& row : rows) {
      if (!corpus_map.count(row.passage_id)) missing.push_back(row.passage_id);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += ' ' + id;
    throw std::runtime_error("rerank: missing texts:" + list);
  }

  NoGradGuard guard;
  std::vector<RunEntry> out;
  for (const auto& [qid, rows] : grouped) {
    std::vector<std::pair<std::string, std::string>> passages;
    for (const auto& row : rows) {
      if (static_cast<Index>(passages.size()) == top_k) break;
      passages.emplace_back(row.passage_id, corpus_map.at(row.passage_id));
    }
    // Canonical order: any permutation of the same set encodes identically.
    std::sort(passages.begin(), passages.end());

    auto batch = encode_batch(query_map.at(qid), passages, vocab);
    ArrayX scores = score_relevance(params, batch, config).values();

    std::vector<Index> order(passages.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      if (scores(a) != scores(b)) return scores(a) > scores(b);
      return passages[static_cast<std::size_t>(a)].first <
             passages[static_cast<std::size_t>(b)].first;
    });
    for (std::size_t r = 0; r < order.size(); ++r) {
      out.push_back({qid, passages[static_cast<std::size_t>(order[r])].first,
                     static_cast<Index>(r) + 1, scores(order[r]), tag});
    }
  }
  return out;
}

PerturbMode perturb_mode_from_string(const std::string& name) {
  if (name == "original") return PerturbMode::kOriginal;
  if (name == "random") return PerturbMode::kRandom;
  if (name == "ideal") return PerturbMode::kIdeal;
  if (name == "reverse-ideal" || name == "reverse_ideal") {
    return PerturbMode::kReverseIdeal;
  }
  throw std::invalid_argument("unknown perturbation mode: " + name);
}

std::string to_string(PerturbMode mode) {
  switch (mode) {
    case PerturbMode::kOriginal: return "original";
    case PerturbMode::kRandom: return "random";
    case PerturbMode::kIdeal: return "ideal";
    case PerturbMode::kReverseIdeal: return "reverse-ideal";
  }
  throw std::invalid_argument("unknown perturbation mode");
}

std::vector<RunEntry> perturb(const std::vector<RunEntry>& run,
                              PerturbMode mode, const QrelSet& qrels,
                              std::uint64_t seed) {
  auto grouped = group_run(run);
  std::vector<RunEntry> out;
  std::uint64_t qindex = 0;
  for (auto& [qid, rows] : grouped) {
    std::vector<RunEntry> reordered = rows;
    switch (mode) {
      case PerturbMode::kOriginal:
        break;
      case PerturbMode::kRandom: {
        Rng rng(derive_seed(seed, qindex));
        rng.shuffle(reordered);
        break;
      }
      case PerturbMode::kIdeal:
      case PerturbMode::kReverseIdeal: {
        std::stable_sort(reordered.begin(), reordered.end(),
                         [&](const RunEntry& a, const RunEntry& b) {
                           return qrels.relevance(qid, a.passage_id) >
                                  qrels.relevance(qid, b.passage_id);
                         });
        if (mode == PerturbMode::kReverseIdeal) {
          std::reverse(reordered.begin(), reordered.end());
        }
        break;
      }
    }
    Index k = static_cast<Index>(reordered.size());
    for (Index r = 0; r < k; ++r) {
      auto& e = reordered[static_cast<std::size_t>(r)];
      e.rank = r + 1;
      e.score = static_cast<double>(k - r);
      e.tag = to_string(mode);
      out.push_back(std::move(e));
    }
    ++qindex;
  }
  return out;
}

Eigen::MatrixXd rank_change_matrix(const std::vector<RunEntry>& before,
                                   const std::vector<RunEntry>& after,
                                   Index depth) {
  auto gb = group_run(before);
  auto ga = group_run(after);
  if (gb.size() != ga.size()) {
    throw std::runtime_error("rank_change_matrix: query sets differ");
  }

  Eigen::MatrixXd matrix = Eigen::MatrixXd::Zero(depth, depth);
  for (const auto& [qid, rows_before] : gb) {
    auto it = ga.find(qid);
    if (it == ga.end()) {
      throw std::runtime_error("rank_change_matrix: query sets differ");
    }
    const auto& rows_after = it->second;

    std::map<std::string, Index> after_rank;
    for (const auto& e : rows_after) after_rank[e.passage_id] = e.rank;
    if (rows_before.size() != rows_after.size()) {
      throw std::runtime_error(
          "rank_change_matrix: passage sets differ for query " + qid);
    }
    for (const auto& e : rows_before) {
      auto at = after_rank.find(e.passage_id);
      if (at == after_rank.end()) {
        throw std::runtime_error(
            "rank_change_matrix: passage sets differ for query " + qid);
      }
      if (e.rank <= depth && at->second <= depth) {
        matrix(e.rank - 1, at->second - 1) += 1.0;
      }
    }
  }
  matrix /= static_cast<double>(gb.size());
  return matrix;
}

void write_rank_change_csv(std::ostream& os, const Eigen::MatrixXd& matrix) {
  os << "rank";
  for (Index j = 0; j < matrix.cols(); ++j) os << ',' << (j + 1);
  os << '\n';
  char buf[64];
  for (Index i = 0; i < matrix.rows(); ++i) {
    os << (i + 1);
    for (Index j = 0; j < matrix.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.6f", matrix(i, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace setrank
