// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include "setrank/encoder.hpp"
#include "setrank/rng.hpp"
#include "setrank/tokenize.hpp"

using namespace setrank;

namespace {

const std::vector<std::string> kPool = {
    "alpha", "beta",  "gamma", "delta", "epsilon", "zeta",  "eta",
    "theta", "iota",  "kappa", "lambda", "mu",     "nu",    "xi",
    "omicron", "pi",  "rho",   "sigma", "tau",     "upsilon"};

std::string random_text(Rng& rng, int words) {
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (i) out += ' ';
    out += kPool[static_cast<std::size_t>(rng.uniform_index(
        static_cast<Index>(kPool.size())))];
  }
  return out;
}

Vocab pool_vocab() {
  std::string all;
  for (const auto& w : kPool) {
    all += w;
    all += ' ';
  }
  return build_vocab({all}, 1);
}

ModelConfig small_config(const Vocab& v, InteractionMode mode) {
  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.model_dim = 16;
  c.ffn_dim = 32;
  c.vocab_size = v.size();
  c.max_positions = 64;
  c.interaction_mode = mode;
  return c;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.values().data(), b.values().data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("augment_keys_values shapes and content") {
  Rng rng(1);
  const Index L = 5, d = 4;
  std::vector<Tensor> ks, vs;
  for (int i = 0; i < 3; ++i) {
    Tensor k = Tensor::zeros({L, d});
    Tensor v = Tensor::zeros({L, d});
    for (Index e = 0; e < k.size(); ++e) {
      k.values_mut()[e] = rng.uniform(-1, 1);
      v.values_mut()[e] = rng.uniform(-1, 1);
    }
    ks.push_back(k);
    vs.push_back(v);
  }

  auto aug = augment_keys_values(ks, vs, 1);
  REQUIRE(aug.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(aug[i].first.rows() == L + 2);
    CHECK(aug[i].first.cols() == d);
    // first L rows are the sequence's own keys
    for (Index e = 0; e < L * d; ++e) {
      CHECK(aug[i].first.at(e) == ks[i].at(e));
    }
    // appended rows are the [INT]-position rows of the others, storage order
    std::size_t slot = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j == i) continue;
      for (Index c = 0; c < d; ++c) {
        CHECK(aug[i].first.at((L + static_cast<Index>(slot)) * d + c) ==
              ks[j].at(1 * d + c));
        CHECK(aug[i].second.at((L + static_cast<Index>(slot)) * d + c) ==
              vs[j].at(1 * d + c));
      }
      ++slot;
    }
  }

  // k=1 degenerates to the identity
  auto one = augment_keys_values({ks[0]}, {vs[0]}, 1);
  CHECK(bitwise_equal(one[0].first, ks[0]));
  CHECK(bitwise_equal(one[0].second, vs[0]));

  // mismatched shapes rejected
  std::vector<Tensor> bad = {ks[0], Tensor::zeros({L + 1, d})};
  std::vector<Tensor> bad_v = {vs[0], Tensor::zeros({L + 1, d})};
  CHECK_THROWS_AS(augment_keys_values(bad, bad_v, 1), std::invalid_argument);
}

TEST_CASE("augmenting commutes with permuting up to appended order") {
  Rng rng(2);
  const Index L = 4, d = 3;
  std::vector<Tensor> ks, vs;
  for (int i = 0; i < 4; ++i) {
    Tensor k = Tensor::zeros({L, d});
    Tensor v = Tensor::zeros({L, d});
    for (Index e = 0; e < k.size(); ++e) {
      k.values_mut()[e] = rng.uniform(-1, 1);
      v.values_mut()[e] = rng.uniform(-1, 1);
    }
    ks.push_back(k);
    vs.push_back(v);
  }
  std::vector<std::size_t> perm = {2, 0, 3, 1};
  std::vector<Tensor> pks, pvs;
  for (std::size_t p : perm) {
    pks.push_back(ks[p]);
    pvs.push_back(vs[p]);
  }
  auto direct = augment_keys_values(ks, vs, 1);
  auto permuted = augment_keys_values(pks, pvs, 1);
  for (std::size_t slot = 0; slot < perm.size(); ++slot) {
    const Tensor& a = permuted[slot].first;
    const Tensor& b = direct[perm[slot]].first;
    // own block identical, appended rows equal as a multiset
    for (Index e = 0; e < L * d; ++e) CHECK(a.at(e) == b.at(e));
    std::multiset<std::string> rows_a, rows_b;
    for (Index r = L; r < L + 3; ++r) {
      std::string ra, rb;
      for (Index c = 0; c < d; ++c) {
        ra += std::to_string(a.at(r * d + c)) + ",";
        rb += std::to_string(b.at(r * d + c)) + ",";
      }
      rows_a.insert(ra);
      rows_b.insert(rb);
    }
    CHECK(rows_a == rows_b);
  }
}

TEST_CASE("no interaction reproduces pointwise forwards bit for bit") {
  Vocab v = pool_vocab();
  ModelConfig cfg = small_config(v, InteractionMode::kNone);
  ModelParams params = init_params(cfg, 7);
  Rng rng(3);
  std::vector<std::pair<std::string, std::string>> passages = {
      {"p1", random_text(rng, 3)}, {"p2", random_text(rng, 6)}};
  EncodedBatch batch = encode_batch("alpha beta", passages, v);
  const Index L = batch.padded_length();

  NoGradGuard guard;
  auto together = encode(params, batch, cfg);
  for (std::size_t i = 0; i < passages.size(); ++i) {
    EncodedBatch solo = encode_batch("alpha beta", {passages[i]}, v, L);
    auto alone = encode(params, solo, cfg);
    CHECK(bitwise_equal(together[i], alone[0]));
  }

  Tensor solo_score =
      score_relevance(params, encode_batch("alpha beta", {passages[0]}, v, L),
                      cfg);
  Tensor batch_score = score_relevance(params, batch, cfg);
  CHECK(solo_score.at(0) == batch_score.at(0));
}

TEST_CASE("identical passages get identical outputs") {
  Vocab v = pool_vocab();
  ModelConfig cfg = small_config(v, InteractionMode::kIntToken);
  ModelParams params = init_params(cfg, 11);
  EncodedBatch batch =
      encode_batch("alpha", {{"a", "beta gamma"}, {"b", "beta gamma"}}, v);
  NoGradGuard guard;
  auto out = encode(params, batch, cfg);
  CHECK(bitwise_equal(out[0], out[1]));
  Tensor scores = score_relevance(params, batch, cfg);
  CHECK(scores.at(0) == scores.at(1));
  Tensor probs = score_duplicates(params, batch, cfg);
  CHECK(probs.at(0) == probs.at(1));
  for (Index i = 0; i < probs.size(); ++i) {
    CHECK(probs.at(i) > 0.0);
    CHECK(probs.at(i) < 1.0);
  }
}

TEST_CASE("permutation equivariance of scores") {
  Vocab v = pool_vocab();
  Rng rng(17);
  for (InteractionMode mode :
       {InteractionMode::kIntToken, InteractionMode::kClsToken}) {
    ModelConfig cfg = small_config(v, mode);
    ModelParams params = init_params(cfg, 1000 + rng.next_u64() % 100);
    std::vector<std::pair<std::string, std::string>> passages;
    for (int i = 0; i < 5; ++i) {
      passages.emplace_back("p" + std::to_string(i),
                            random_text(rng, 2 + static_cast<int>(
                                                     rng.uniform_index(5))));
    }
    NoGradGuard guard;
    Tensor base = score_relevance(
        params, encode_batch("beta delta", passages, v), cfg);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Index> perm(passages.size());
      for (std::size_t i = 0; i < perm.size(); ++i) {
        perm[i] = static_cast<Index>(i);
      }
      rng.shuffle(perm);
      std::vector<std::pair<std::string, std::string>> shuffled;
      for (Index p : perm) {
        shuffled.push_back(passages[static_cast<std::size_t>(p)]);
      }
      Tensor scores = score_relevance(
          params, encode_batch("beta delta", shuffled, v), cfg);
      for (std::size_t i = 0; i < perm.size(); ++i) {
        CHECK(std::abs(scores.at(static_cast<Index>(i)) -
                       base.at(perm[i])) <= 1e-9);
      }
    }
  }
}

TEST_CASE("appended row order does not change the output") {
  Vocab v = pool_vocab();
  ModelConfig cfg = small_config(v, InteractionMode::kIntToken);
  ModelParams params = init_params(cfg, 23);
  Rng rng(29);
  std::vector<std::pair<std::string, std::string>> passages;
  for (int i = 0; i < 6; ++i) {
    passages.emplace_back("p" + std::to_string(i), random_text(rng, 4));
  }
  EncodedBatch batch = encode_batch("gamma", passages, v);
  NoGradGuard guard;
  Tensor base = score_relevance(params, batch, cfg);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<Index> order = {0, 1, 2, 3, 4};
    rng.shuffle(order);
    EncodeOptions opt;
    opt.appended_order = &order;
    Tensor scores = score_relevance(params, batch, cfg, opt);
    for (Index i = 0; i < scores.size(); ++i) {
      CHECK(std::abs(scores.at(i) - base.at(i)) <= 1e-12);
    }
  }
}

TEST_CASE("cross-passage gradients exist only with interaction") {
  Vocab v = pool_vocab();
  // tokens chosen so passage 2 has words passage 1 lacks
  const std::string q = "alpha";
  std::vector<std::pair<std::string, std::string>> passages = {
      {"a", "beta beta"}, {"b", "kappa lambda"}};
  const Index kappa_id = v.id_of("kappa");
  const Index lambda_id = v.id_of("lambda");

  for (auto [mode, expect_nonzero] :
       {std::pair{InteractionMode::kIntToken, true},
        std::pair{InteractionMode::kNone, false}}) {
    ModelConfig cfg = small_config(v, mode);
    ModelParams params = init_params(cfg, 31);
    EncodedBatch batch = encode_batch(q, passages, v);
    params.zero_grads();
    Tensor scores = score_relevance(params, batch, cfg);
    Tensor pick = Tensor::from_data({2}, {1.0, 0.0});
    backward(sum(mul(scores, pick)));
    const ArrayX& g = params.token_embedding.grad();
    double mass = 0;
    for (Index c = 0; c < cfg.model_dim; ++c) {
      mass += std::abs(g[kappa_id * cfg.model_dim + c]);
      mass += std::abs(g[lambda_id * cfg.model_dim + c]);
    }
    if (expect_nonzero) {
      CHECK(mass > 0.0);
    } else {
      CHECK(mass == 0.0);
    }
  }
}

TEST_CASE("single exchange layer connects passages from layer one on") {
  Vocab v = pool_vocab();
  auto kappa_grad_mass = [&](Index exchange_layer) {
    ModelConfig cfg = small_config(v, InteractionMode::kIntToken);
    cfg.interaction_layer = exchange_layer;
    ModelParams params = init_params(cfg, 37);
    EncodedBatch batch =
        encode_batch("alpha", {{"a", "beta"}, {"b", "kappa"}}, v);
    params.zero_grads();
    Tensor scores = score_relevance(params, batch, cfg);
    Tensor pick = Tensor::from_data({2}, {1.0, 0.0});
    backward(sum(mul(scores, pick)));
    const ArrayX& g = params.token_embedding.grad();
    double mass = 0;
    for (Index c = 0; c < cfg.model_dim; ++c) {
      mass += std::abs(g[v.id_of("kappa") * cfg.model_dim + c]);
    }
    return mass;
  };
  // layer 0 exchanges raw [INT] states that carry no passage tokens yet
  CHECK(kappa_grad_mass(0) == 0.0);
  CHECK(kappa_grad_mass(1) > 0.0);

  ModelConfig bad = small_config(v, InteractionMode::kIntToken);
  bad.interaction_layer = 5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("attention cost formulas and instrumentation agree") {
  Vocab v = pool_vocab();
  ModelConfig cfg = small_config(v, InteractionMode::kIntToken);

  auto c1 = attention_cost(cfg, 1, 8);
  CHECK(c1.set_encoder_entries == 64);
  CHECK(c1.concat_entries == 64);

  auto big = attention_cost(cfg, 100, 289);
  // independent evaluation of the two counting rules
  CHECK(big.set_encoder_entries == 100LL * 289 * (289 + 99));
  CHECK(big.concat_entries == 28900LL * 28900);
  CHECK(static_cast<double>(big.concat_entries) /
            static_cast<double>(big.set_encoder_entries) >
        70.0);

  // instrumented encode matches the formula
  const Index k = 4, L = 16;
  std::vector<std::pair<std::string, std::string>> passages;
  for (Index i = 0; i < k; ++i) {
    passages.emplace_back("p" + std::to_string(i), "beta gamma delta");
  }
  EncodedBatch batch = encode_batch("alpha", passages, v, L);
  REQUIRE(batch.padded_length() == L);
  ModelParams params = init_params(cfg, 41);
  EncodeStats stats;
  EncodeOptions opt;
  opt.stats = &stats;
  NoGradGuard guard;
  encode(params, batch, cfg, opt);
  auto cost = attention_cost(cfg, k, L);
  CHECK(stats.attention_entries == cfg.layers * cost.set_encoder_entries);
}

TEST_CASE("encode rejects sequences beyond max_positions") {
  Vocab v = pool_vocab();
  ModelConfig cfg = small_config(v, InteractionMode::kIntToken);
  cfg.max_positions = 8;
  ModelParams params = init_params(cfg, 43);
  EncodedBatch batch = encode_batch(
      "alpha beta gamma delta", {{"a", "epsilon zeta eta theta iota"}}, v);
  CHECK_THROWS_AS(encode(params, batch, cfg), std::invalid_argument);
}

TEST_CASE("model checkpoints round-trip bit-exactly") {
  Vocab v = pool_vocab();
  ModelConfig cfg = small_config(v, InteractionMode::kClsToken);
  cfg.interaction_layer = 1;
  ModelParams params = init_params(cfg, 47);
  const std::string path = "test_model_ckpt.bin";
  save_model(path, params, cfg);
  auto [loaded, loaded_cfg] = load_model(path);
  std::remove(path.c_str());

  CHECK(loaded_cfg == cfg);
  auto orig_named = params.named_parameters();
  auto load_named = loaded.named_parameters();
  REQUIRE(orig_named.size() == load_named.size());
  for (std::size_t i = 0; i < orig_named.size(); ++i) {
    CHECK(orig_named[i].first == load_named[i].first);
    CHECK(bitwise_equal(orig_named[i].second, load_named[i].second));
  }

  EncodedBatch batch =
      encode_batch("alpha", {{"a", "beta gamma"}, {"b", "delta"}}, v);
  NoGradGuard guard;
  Tensor s1 = score_relevance(params, batch, cfg);
  Tensor s2 = score_relevance(loaded, batch, cfg);
  CHECK(bitwise_equal(s1, s2));
}

TEST_CASE("interaction mode names round-trip") {
  for (InteractionMode mode :
       {InteractionMode::kIntToken, InteractionMode::kClsToken,
        InteractionMode::kNone}) {
    CHECK(interaction_mode_from_string(to_string(mode)) == mode);
  }
  CHECK_THROWS_AS(interaction_mode_from_string("bogus"),
                  std::invalid_argument);
}
