// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstring>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "setrank/harness.hpp"
#include "setrank/losses.hpp"
#include "setrank/novelty.hpp"

using namespace setrank;

namespace {

SyntheticConfig small_config() {
  SyntheticConfig config;
  config.num_queries = 10;
  config.passages_per_query = 8;
  config.vocab_size = 300;
  config.passage_length = 12;
  config.seed = 42;
  return config;
}

struct Pipeline {
  SyntheticData data;
  Vocab vocab;
  ModelConfig config;
  ModelParams params;
};

Pipeline make_pipeline(const SyntheticConfig& synth, std::uint64_t model_seed) {
  Pipeline p{generate_synthetic(synth), {}, {}, {}};
  std::vector<std::string> texts;
  for (const auto& [id, text] : p.data.corpus) texts.push_back(text);
  for (const auto& [id, text] : p.data.queries) texts.push_back(text);
  p.vocab = build_vocab(texts, 1);
  p.config.layers = 1;
  p.config.heads = 2;
  p.config.model_dim = 16;
  p.config.ffn_dim = 32;
  p.config.vocab_size = p.vocab.size();
  p.config.max_positions = 64;
  p.params = init_params(p.config, model_seed);
  return p;
}

bool params_equal(ModelParams& a, ModelParams& b) {
  auto na = a.named_parameters();
  auto nb = b.named_parameters();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    if (na[i].first != nb[i].first) return false;
    const ArrayX& va = na[i].second.values();
    const ArrayX& vb = nb[i].second.values();
    if (va.size() != vb.size()) return false;
    if (std::memcmp(va.data(), vb.data(),
                    sizeof(Scalar) * static_cast<std::size_t>(va.size())) != 0) {
      return false;
    }
  }
  return true;
}

std::string run_bytes(const std::vector<RunEntry>& run) {
  std::ostringstream os;
  write_run(os, run);
  return os.str();
}

}  // namespace

TEST_CASE("synthetic generation is deterministic") {
  auto config = small_config();
  auto a = generate_synthetic(config);
  auto b = generate_synthetic(config);
  CHECK(a.corpus == b.corpus);
  CHECK(a.queries == b.queries);
  CHECK(a.first_stage == b.first_stage);
  CHECK(a.qrels.by_query == b.qrels.by_query);
  CHECK(a.clusters.by_query == b.clusters.by_query);

  auto other = config;
  other.seed = 43;
  CHECK(generate_synthetic(other).corpus != a.corpus);
}

TEST_CASE("synthetic config validation") {
  auto config = small_config();
  config.vocab_size = 16;
  CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);

  config = small_config();
  config.duplicate_rate = 1.5;
  CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);

  config = small_config();
  config.passage_length = 3;
  CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);

  config = small_config();
  config.passages_per_query = 1;
  CHECK_THROWS_AS(generate_synthetic(config), std::invalid_argument);
}

TEST_CASE("zero duplicate rate leaves every cluster a singleton") {
  auto data = generate_synthetic(small_config());
  for (const auto& [qid, passages] : data.clusters.by_query) {
    std::set<int> ids;
    for (const auto& [pid, cluster] : passages) {
      CHECK(ids.insert(cluster).second);
    }
  }
}

TEST_CASE("generated duplicates share a cluster and high jaccard") {
  auto config = small_config();
  config.duplicate_rate = 1.0;
  auto data = generate_synthetic(config);
  auto corpus = text_index(data.corpus);

  for (const auto& [qid, passages] : data.clusters.by_query) {
    std::map<int, std::vector<std::string>> members;
    for (const auto& [pid, cluster] : passages) members[cluster].push_back(pid);
    // Exactly the planted relevant pair shares cluster 0.
    REQUIRE(members[0].size() == 2);
    CHECK(jaccard(corpus.at(members[0][0]), corpus.at(members[0][1])) > 0.5);
    CHECK(data.qrels.relevance(qid, members[0][0]) == 2);
    CHECK(data.qrels.relevance(qid, members[0][1]) == 2);
  }
}

TEST_CASE("recorded clusters match text clustering") {
  auto config = small_config();
  config.duplicate_rate = 0.7;
  auto data = generate_synthetic(config);
  auto corpus = text_index(data.corpus);

  for (const auto& [qid, recorded] : data.clusters.by_query) {
    std::vector<std::pair<std::string, std::string>> passages;
    for (const auto& [pid, cluster] : recorded) {
      passages.emplace_back(pid, corpus.at(pid));
    }
    auto derived = cluster_near_duplicates(passages, 0.5);
    for (const auto& [pid, cluster] : recorded) {
      CHECK(derived.cluster_of.at(pid) == cluster);
    }
  }
}

TEST_CASE("first-stage run is valid and leads with the planted passage") {
  auto data = generate_synthetic(small_config());
  CHECK_NOTHROW(validate_run(data.first_stage));
  for (const auto& e : data.first_stage) {
    if (e.rank == 1) CHECK(data.qrels.relevance(e.query_id, e.passage_id) == 2);
  }
}

TEST_CASE("stage-1 instances carry one positive and no cluster mates") {
  auto config = small_config();
  config.duplicate_rate = 1.0;
  auto data = generate_synthetic(config);
  auto instances = build_stage1_instances(data, 7);
  REQUIRE(instances.size() == 10);
  for (const auto& inst : instances) {
    // 8 passages minus the near-duplicate leaves 6 negatives.
    CHECK(inst.k() == 7);
    REQUIRE(inst.positive_index >= 0);
    CHECK(inst.labels[static_cast<std::size_t>(inst.positive_index)] == 2.0);
    std::set<int> clusters(inst.cluster_ids.begin(), inst.cluster_ids.end());
    CHECK(clusters.size() == inst.cluster_ids.size());
  }
}

TEST_CASE("stage-2 teacher labels follow ground truth, noise is seeded") {
  auto data = generate_synthetic(small_config());
  auto clean = build_stage2_instances(data, 100, 0.0, 5);
  for (const auto& inst : clean) {
    Index k = inst.k();
    // Labels are a permutation of 1..k.
    std::vector<Scalar> sorted = inst.labels;
    std::sort(sorted.begin(), sorted.end());
    for (Index i = 0; i < k; ++i) {
      CHECK(sorted[static_cast<std::size_t>(i)] == static_cast<Scalar>(i + 1));
    }
    // The planted relevant passage tops the teacher ordering.
    for (Index i = 0; i < k; ++i) {
      if (inst.labels[static_cast<std::size_t>(i)] == static_cast<Scalar>(k)) {
        CHECK(data.qrels.relevance(inst.query_id,
                                   inst.passages[static_cast<std::size_t>(i)]
                                       .first) == 2);
      }
    }
  }

  auto noisy_a = build_stage2_instances(data, 100, 0.5, 5);
  auto noisy_b = build_stage2_instances(data, 100, 0.5, 5);
  auto noisy_c = build_stage2_instances(data, 100, 0.5, 6);
  bool all_equal = true;
  bool differs_somewhere = false;
  for (std::size_t i = 0; i < noisy_a.size(); ++i) {
    all_equal = all_equal && noisy_a[i].labels == noisy_b[i].labels;
    differs_somewhere =
        differs_somewhere || noisy_a[i].labels != noisy_c[i].labels;
  }
  CHECK(all_equal);
  CHECK(differs_somewhere);

  auto truncated = build_stage2_instances(data, 5, 0.0, 5);
  for (const auto& inst : truncated) CHECK(inst.k() == 5);
}

TEST_CASE("text_index rejects duplicate ids") {
  CHECK_THROWS_AS(text_index({{"a", "x"}, {"a", "y"}}), std::invalid_argument);
}

TEST_CASE("zero training steps leave parameters at init") {
  auto p = make_pipeline(small_config(), 7);
  auto fresh = init_params(p.config, 7);
  auto instances = build_stage1_instances(p.data, 7);

  Stage1Options opts;
  opts.max_steps = 0;
  auto report = train_stage1(p.params, p.config, instances, {}, p.vocab, opts);
  CHECK(report.steps_run == 0);
  CHECK(report.loss_curve.empty());
  CHECK(params_equal(p.params, fresh));

  Stage2Options s2;
  s2.epochs = 0;
  auto stage2 = build_stage2_instances(p.data, 8, 0.0, 1);
  auto report2 = train_stage2(p.params, p.config, stage2, p.vocab, s2);
  CHECK(report2.steps_run == 0);
  CHECK(params_equal(p.params, fresh));
}

TEST_CASE("stage-1 training steps update parameters and record losses") {
  auto p = make_pipeline(small_config(), 7);
  auto fresh = init_params(p.config, 7);
  auto instances = build_stage1_instances(p.data, 7);

  Stage1Options opts;
  opts.max_steps = 5;
  auto report = train_stage1(p.params, p.config, instances, {}, p.vocab, opts);
  CHECK(report.steps_run == 5);
  CHECK(report.loss_curve.size() == 5);
  CHECK(!params_equal(p.params, fresh));
  for (double v : report.loss_curve) CHECK(std::isfinite(v));

  CHECK_THROWS_AS(train_stage1(p.params, p.config, {}, {}, p.vocab, opts),
                  std::invalid_argument);
}

TEST_CASE("duplicate-aware training tracks held-out BCE") {
  auto p = make_pipeline(small_config(), 3);
  auto instances = build_stage1_instances(p.data, 7);
  std::vector<RankingInstance> train(instances.begin(), instances.end() - 3);
  std::vector<RankingInstance> held(instances.end() - 3, instances.end());

  Stage1Options opts;
  opts.loss = Stage1Loss::kDaInfoNce;
  opts.max_steps = 4;
  auto report = train_stage1(p.params, p.config, train, held, p.vocab, opts);
  CHECK(report.steps_run == 4);
  CHECK(report.heldout_bce_curve.size() == 4);
  CHECK(std::isfinite(report.final_heldout_bce));
  CHECK(report.final_heldout_bce > 0.0);
}

TEST_CASE("stage-2 training runs one epoch per instance") {
  auto p = make_pipeline(small_config(), 11);
  auto fresh = init_params(p.config, 11);
  auto instances = build_stage2_instances(p.data, 8, 0.0, 1);

  Stage2Options opts;
  opts.epochs = 1;
  auto report = train_stage2(p.params, p.config, instances, p.vocab, opts);
  CHECK(report.steps_run == static_cast<Index>(instances.size()));
  CHECK(!params_equal(p.params, fresh));

  Stage2Options na;
  na.loss = Stage2Loss::kNaRankNet;
  na.epochs = 1;
  CHECK_NOTHROW(train_stage2(p.params, p.config, instances, p.vocab, na));
}

TEST_CASE("mean losses over instances") {
  auto p = make_pipeline(small_config(), 13);
  auto stage2 = build_stage2_instances(p.data, 8, 0.0, 1);
  double loss = mean_rank_net_loss(p.params, p.config, stage2, p.vocab);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);

  auto stage1 = build_stage1_instances(p.data, 7);
  CHECK_THROWS_AS(mean_duplicate_bce(p.params, p.config, stage1, p.vocab),
                  std::invalid_argument);
  std::vector<RankingInstance> injected;
  for (std::size_t i = 0; i < stage1.size(); ++i) {
    injected.push_back(inject_duplicate(stage1[i], 100 + i));
  }
  double bce = mean_duplicate_bce(p.params, p.config, injected, p.vocab);
  CHECK(std::isfinite(bce));
  CHECK(bce > 0.0);
}

TEST_CASE("rerank orders by score with id tie-break and valid ranks") {
  auto p = make_pipeline(small_config(), 17);
  auto out = rerank(p.params, p.config, p.vocab, p.data.first_stage,
                    p.data.corpus, p.data.queries, 8, "test-model");
  CHECK_NOTHROW(validate_run(out));
  CHECK(out.size() == p.data.first_stage.size());
  for (const auto& e : out) CHECK(e.tag == "test-model");
}

TEST_CASE("rerank with top_k one keeps input ranks") {
  auto p = make_pipeline(small_config(), 17);
  auto out = rerank(p.params, p.config, p.vocab, p.data.first_stage,
                    p.data.corpus, p.data.queries, 1, "t");
  std::map<std::string, std::string> top_before;
  for (const auto& e : p.data.first_stage) {
    if (e.rank == 1) top_before[e.query_id] = e.passage_id;
  }
  CHECK(out.size() == top_before.size());
  for (const auto& e : out) {
    CHECK(e.rank == 1);
    CHECK(e.passage_id == top_before.at(e.query_id));
  }
}

TEST_CASE("rerank reports missing texts") {
  auto p = make_pipeline(small_config(), 17);
  std::vector<RunEntry> run = {{"q0000", "ghost", 1, 1.0, "t"}};
  CHECK_THROWS_WITH_AS(
      rerank(p.params, p.config, p.vocab, run, p.data.corpus, p.data.queries,
             8, "t"),
      doctest::Contains("ghost"), std::runtime_error);
}

TEST_CASE("reranking any permutation of the candidates is byte-identical") {
  auto p = make_pipeline(small_config(), 23);
  auto base = rerank(p.params, p.config, p.vocab, p.data.first_stage,
                     p.data.corpus, p.data.queries, 8, "m");
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto shuffled = perturb(p.data.first_stage, PerturbMode::kRandom,
                            p.data.qrels, seed);
    auto again = rerank(p.params, p.config, p.vocab, shuffled, p.data.corpus,
                        p.data.queries, 8, "m");
    CHECK(run_bytes(again) == run_bytes(base));
  }
}

TEST_CASE("pointwise mode equals solo scoring plus sort") {
  auto p = make_pipeline(small_config(), 29);
  p.config.interaction_mode = InteractionMode::kNone;

  auto grouped = [&] {
    std::map<std::string, std::vector<RunEntry>> g;
    for (const auto& e : p.data.first_stage) g[e.query_id].push_back(e);
    return g;
  }();
  auto corpus = text_index(p.data.corpus);
  auto queries = text_index(p.data.queries);

  auto reranked = rerank(p.params, p.config, p.vocab, p.data.first_stage,
                         p.data.corpus, p.data.queries, 8, "m");

  NoGradGuard guard;
  for (const auto& [qid, rows] : grouped) {
    std::vector<std::pair<std::string, std::string>> passages;
    for (const auto& row : rows) {
      passages.emplace_back(row.passage_id, corpus.at(row.passage_id));
    }
    std::sort(passages.begin(), passages.end());
    Index padded =
        encode_batch(queries.at(qid), passages, p.vocab).padded_length();

    // Solo scores at the batch's padded length, sorted like rerank sorts.
    std::vector<std::pair<std::string, double>> solo;
    for (const auto& pr : passages) {
      auto one = encode_batch(queries.at(qid), {pr}, p.vocab, padded);
      solo.emplace_back(pr.first,
                        score_relevance(p.params, one, p.config).values()(0));
    }
    std::sort(solo.begin(), solo.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });

    for (const auto& e : reranked) {
      if (e.query_id != qid) continue;
      const auto& expect = solo[static_cast<std::size_t>(e.rank - 1)];
      CHECK(e.passage_id == expect.first);
      CHECK(std::memcmp(&e.score, &expect.second, sizeof(double)) == 0);
    }
  }
}

TEST_CASE("perturbation modes") {
  auto data = generate_synthetic(small_config());

  auto original = perturb(data.first_stage, PerturbMode::kOriginal,
                          data.qrels, 9);
  auto grouped_before = [&] {
    std::map<std::string, std::vector<std::string>> g;
    for (const auto& e : data.first_stage) {
      auto& v = g[e.query_id];
      v.resize(std::max<std::size_t>(v.size(), static_cast<std::size_t>(e.rank)));
      v[static_cast<std::size_t>(e.rank - 1)] = e.passage_id;
    }
    return g;
  }();
  for (const auto& e : original) {
    CHECK(grouped_before.at(e.query_id)[static_cast<std::size_t>(e.rank - 1)] ==
          e.passage_id);
  }

  auto ideal = perturb(data.first_stage, PerturbMode::kIdeal, data.qrels, 9);
  CHECK_NOTHROW(validate_run(ideal));
  // Ideal order makes a relevance-sorted prefix: ndcg over all judged is 1.
  std::map<std::string, std::vector<std::string>> ideal_rankings;
  for (const auto& e : ideal) ideal_rankings[e.query_id].push_back(e.passage_id);
  for (auto& [qid, ranking] : ideal_rankings) {
    CHECK(ndcg_at_k(ranking, data.qrels, qid, 8) == 1.0);
  }

  auto reverse = perturb(data.first_stage, PerturbMode::kReverseIdeal,
                         data.qrels, 9);
  std::map<std::string, std::vector<std::string>> rev_rankings;
  for (const auto& e : reverse) rev_rankings[e.query_id].push_back(e.passage_id);
  for (auto& [qid, ranking] : rev_rankings) {
    auto expect = ideal_rankings.at(qid);
    std::reverse(expect.begin(), expect.end());
    CHECK(ranking == expect);
  }

  auto r1 = perturb(data.first_stage, PerturbMode::kRandom, data.qrels, 9);
  auto r2 = perturb(data.first_stage, PerturbMode::kRandom, data.qrels, 9);
  auto r3 = perturb(data.first_stage, PerturbMode::kRandom, data.qrels, 10);
  CHECK(r1 == r2);
  CHECK(r1 != r3);
  CHECK_NOTHROW(validate_run(r1));

  CHECK(perturb_mode_from_string("reverse_ideal") ==
        PerturbMode::kReverseIdeal);
  CHECK_THROWS_AS(perturb_mode_from_string("sideways"), std::invalid_argument);
}

TEST_CASE("rank change matrix on identity and reversal") {
  std::vector<RunEntry> before;
  for (int q = 0; q < 3; ++q) {
    for (Index r = 1; r <= 4; ++r) {
      before.push_back({"q" + std::to_string(q), "p" + std::to_string(r),
                        r, static_cast<double>(5 - r), "t"});
    }
  }
  auto identity = rank_change_matrix(before, before, 4);
  CHECK(identity.isApprox(Eigen::MatrixXd::Identity(4, 4)));

  std::vector<RunEntry> reversed;
  for (const auto& e : before) {
    reversed.push_back({e.query_id, e.passage_id, 5 - e.rank,
                        static_cast<double>(e.rank), "t"});
  }
  auto anti = rank_change_matrix(before, reversed, 4);
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 4; ++j) {
      CHECK(anti(i, j) == (i + j == 3 ? 1.0 : 0.0));
    }
  }
  // Rows sum to one when every query populates every rank.
  CHECK(anti.rowwise().sum().isApprox(Eigen::VectorXd::Ones(4)));

  std::vector<RunEntry> other = before;
  other[0].passage_id = "different";
  CHECK_THROWS_AS(rank_change_matrix(before, other, 4), std::runtime_error);
  std::vector<RunEntry> fewer(before.begin() + 4, before.end());
  CHECK_THROWS_AS(rank_change_matrix(before, fewer, 4), std::runtime_error);
}

TEST_CASE("rank change csv layout") {
  std::vector<RunEntry> run = {{"q", "a", 1, 2.0, "t"}, {"q", "b", 2, 1.0, "t"}};
  auto m = rank_change_matrix(run, run, 2);
  std::ostringstream os;
  write_rank_change_csv(os, m);
  CHECK(os.str() ==
        "rank,1,2\n"
        "1,1.000000,0.000000\n"
        "2,0.000000,1.000000\n");
}

TEST_CASE("loss name parsing") {
  CHECK(stage1_loss_from_string("info_nce") == Stage1Loss::kInfoNce);
  CHECK(stage1_loss_from_string("da_info_nce") == Stage1Loss::kDaInfoNce);
  CHECK_THROWS_AS(stage1_loss_from_string("bogus"), std::invalid_argument);
  CHECK(stage2_loss_from_string("rank_net") == Stage2Loss::kRankNet);
  CHECK(stage2_loss_from_string("na_rank_net") == Stage2Loss::kNaRankNet);
  CHECK_THROWS_AS(stage2_loss_from_string("bogus"), std::invalid_argument);
  CHECK(to_string(Stage1Loss::kDaInfoNce) == "da_info_nce");
  CHECK(to_string(Stage2Loss::kNaRankNet) == "na_rank_net");
  CHECK(to_string(PerturbMode::kReverseIdeal) == "reverse-ideal");
}
