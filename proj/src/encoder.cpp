// SPDX-License-Identifier: Apache-2.0
#include "setrank/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "setrank/rng.hpp"

namespace setrank {

InteractionMode interaction_mode_from_string(const std::string& name) {
  if (name == "int_token") return InteractionMode::kIntToken;
  if (name == "cls_token") return InteractionMode::kClsToken;
  if (name == "none") return InteractionMode::kNone;
  throw std::invalid_argument("unknown interaction mode '" + name + "'");
}

std::string to_string(InteractionMode mode) {
  switch (mode) {
    case InteractionMode::kIntToken: return "int_token";
    case InteractionMode::kClsToken: return "cls_token";
    case InteractionMode::kNone: return "none";
  }
  throw std::invalid_argument("unknown interaction mode value");
}

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || model_dim < 1 || ffn_dim < 1) {
    throw std::invalid_argument("ModelConfig: sizes must be positive");
  }
  if (model_dim % heads != 0) {
    throw std::invalid_argument(
        "ModelConfig: model_dim must be divisible by heads");
  }
  if (vocab_size < 5) {
    throw std::invalid_argument(
        "ModelConfig: vocab_size must cover the reserved ids");
  }
  if (max_positions < 1) {
    throw std::invalid_argument("ModelConfig: max_positions must be positive");
  }
  if (interaction_layer < -1 || interaction_layer >= layers) {
    throw std::invalid_argument(
        "ModelConfig: interaction_layer out of range");
  }
}

std::vector<Tensor> ModelParams::parameters() {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_parameters() {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("token_embedding", token_embedding);
  out.emplace_back("position_embedding", position_embedding);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerParams& lp = layers[l];
    out.emplace_back(p + "wq", lp.wq);
    out.emplace_back(p + "bq", lp.bq);
    out.emplace_back(p + "wk", lp.wk);
    out.emplace_back(p + "bk", lp.bk);
    out.emplace_back(p + "wv", lp.wv);
    out.emplace_back(p + "bv", lp.bv);
    out.emplace_back(p + "wo", lp.wo);
    out.emplace_back(p + "bo", lp.bo);
    out.emplace_back(p + "ffn_w1", lp.ffn_w1);
    out.emplace_back(p + "ffn_b1", lp.ffn_b1);
    out.emplace_back(p + "ffn_w2", lp.ffn_w2);
    out.emplace_back(p + "ffn_b2", lp.ffn_b2);
    out.emplace_back(p + "ln1_gamma", lp.ln1_gamma);
    out.emplace_back(p + "ln1_beta", lp.ln1_beta);
    out.emplace_back(p + "ln2_gamma", lp.ln2_gamma);
    out.emplace_back(p + "ln2_beta", lp.ln2_beta);
  }
  out.emplace_back("relevance.w", relevance_w);
  out.emplace_back("relevance.b", relevance_b);
  out.emplace_back("duplicate.w", duplicate_w);
  out.emplace_back("duplicate.b", duplicate_b);
  return out;
}

void ModelParams::zero_grads() {
  for (Tensor& t : parameters()) t.zero_grad();
}

namespace {

Tensor init_weight(Index rows, Index cols, Rng& rng) {
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(rows));
  Tensor t = Tensor::zeros({rows, cols}, true);
  for (Index i = 0; i < t.size(); ++i) {
    t.values_mut()[i] = rng.uniform(-bound, bound);
  }
  return t;
}

ModelParams make_params(const ModelConfig& config) {
  ModelParams p;
  const Index d = config.model_dim;
  p.token_embedding = Tensor::zeros({config.vocab_size, d}, true);
  p.position_embedding = Tensor::zeros({config.max_positions, d}, true);
  p.layers.resize(static_cast<std::size_t>(config.layers));
  for (LayerParams& lp : p.layers) {
    lp.wq = Tensor::zeros({d, d}, true);
    lp.bq = Tensor::zeros({d}, true);
    lp.wk = Tensor::zeros({d, d}, true);
    lp.bk = Tensor::zeros({d}, true);
    lp.wv = Tensor::zeros({d, d}, true);
    lp.bv = Tensor::zeros({d}, true);
    lp.wo = Tensor::zeros({d, d}, true);
    lp.bo = Tensor::zeros({d}, true);
    lp.ffn_w1 = Tensor::zeros({d, config.ffn_dim}, true);
    lp.ffn_b1 = Tensor::zeros({config.ffn_dim}, true);
    lp.ffn_w2 = Tensor::zeros({config.ffn_dim, d}, true);
    lp.ffn_b2 = Tensor::zeros({d}, true);
    lp.ln1_gamma = Tensor::full({d}, 1.0, true);
    lp.ln1_beta = Tensor::zeros({d}, true);
    lp.ln2_gamma = Tensor::full({d}, 1.0, true);
    lp.ln2_beta = Tensor::zeros({d}, true);
  }
  p.relevance_w = Tensor::zeros({d, 1}, true);
  p.relevance_b = Tensor::zeros({1}, true);
  p.duplicate_w = Tensor::zeros({d, 1}, true);
  p.duplicate_b = Tensor::zeros({1}, true);
  return p;
}

void fill_uniform(Tensor& t, Index fan_in, Rng& rng) {
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(fan_in));
  for (Index i = 0; i < t.size(); ++i) {
    t.values_mut()[i] = rng.uniform(-bound, bound);
  }
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ModelParams p = make_params(config);
  const Index d = config.model_dim;
  fill_uniform(p.token_embedding, d, rng);
  fill_uniform(p.position_embedding, d, rng);
  for (LayerParams& lp : p.layers) {
    fill_uniform(lp.wq, d, rng);
    fill_uniform(lp.wk, d, rng);
    fill_uniform(lp.wv, d, rng);
    fill_uniform(lp.wo, d, rng);
    fill_uniform(lp.ffn_w1, d, rng);
    fill_uniform(lp.ffn_w2, config.ffn_dim, rng);
  }
  fill_uniform(p.relevance_w, d, rng);
  fill_uniform(p.duplicate_w, d, rng);
  return p;
}

std::vector<std::pair<Tensor, Tensor>> augment_keys_values(
    const std::vector<Tensor>& keys, const std::vector<Tensor>& values,
    Index int_position, const std::vector<Index>* appended_order) {
  const std::size_t k = keys.size();
  if (k == 0 || values.size() != k) {
    throw std::invalid_argument(
        "augment_keys_values: need matching key and value lists");
  }
  const Index rows = keys[0].rows(), cols = keys[0].cols();
  for (std::size_t i = 0; i < k; ++i) {
    if (keys[i].rank() != 2 || values[i].rank() != 2 ||
        keys[i].rows() != rows || keys[i].cols() != cols ||
        values[i].rows() != rows || values[i].cols() != cols) {
      throw std::invalid_argument(
          "augment_keys_values: all K/V shapes must match");
    }
  }
  if (int_position < 0 || int_position >= rows) {
    throw std::invalid_argument("augment_keys_values: bad int_position");
  }
  if (appended_order && appended_order->size() != k - 1) {
    throw std::invalid_argument(
        "augment_keys_values: appended_order must have k-1 entries");
  }

  std::vector<std::pair<Tensor, Tensor>> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::size_t> others;
    others.reserve(k - 1);
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) others.push_back(j);
    }
    std::vector<Tensor> k_parts = {keys[i]};
    std::vector<Tensor> v_parts = {values[i]};
    for (std::size_t a = 0; a < others.size(); ++a) {
      std::size_t pick = a;
      if (appended_order) {
        const Index o = (*appended_order)[a];
        if (o < 0 || o >= static_cast<Index>(others.size())) {
          throw std::invalid_argument(
              "augment_keys_values: appended_order entry out of range");
        }
        pick = static_cast<std::size_t>(o);
      }
      const std::size_t j = others[pick];
      k_parts.push_back(slice_rows(keys[j], int_position, 1));
      v_parts.push_back(slice_rows(values[j], int_position, 1));
    }
    out.emplace_back(concat_rows(k_parts), concat_rows(v_parts));
  }
  return out;
}

namespace {

Tensor attention_mask(const InputSequence& seq, Index appended) {
  const Index L = seq.length();
  Tensor mask = Tensor::zeros({L, L + appended});
  ArrayX& m = mask.values_mut();
  for (Index i = 0; i < L; ++i) {
    for (Index j = 0; j < L; ++j) {
      m[i * (L + appended) + j] =
          seq.mask[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    }
    for (Index j = L; j < L + appended; ++j) {
      m[i * (L + appended) + j] = 1.0;  // foreign [INT]/[CLS] rows are real
    }
  }
  return mask;
}

}  // namespace

std::vector<Tensor> encode(const ModelParams& params,
                           const EncodedBatch& batch,
                           const ModelConfig& config,
                           const EncodeOptions& options) {
  config.validate();
  const Index k = batch.size();
  if (k == 0) {
    throw std::invalid_argument("encode: empty batch");
  }
  const Index L = batch.padded_length();
  if (L > config.max_positions) {
    throw std::invalid_argument(
        "encode: sequence length " + std::to_string(L) +
        " exceeds max_positions " + std::to_string(config.max_positions));
  }
  const Index d = config.model_dim;
  const Index head_dim = d / config.heads;

  std::vector<Tensor> xs;
  xs.reserve(static_cast<std::size_t>(k));
  for (const InputSequence& seq : batch.sequences) {
    Tensor tok = gather_rows(params.token_embedding, seq.token_ids);
    Tensor pos = gather_rows(params.position_embedding, seq.position_ids);
    xs.push_back(add(tok, pos));
  }

  // masks do not change across layers
  std::vector<Tensor> mask_plain, mask_aug;
  for (const InputSequence& seq : batch.sequences) {
    mask_plain.push_back(attention_mask(seq, 0));
  }

  for (Index layer = 0; layer < config.layers; ++layer) {
    const LayerParams& lp =
        params.layers[static_cast<std::size_t>(layer)];
    const bool exchange =
        config.interaction_mode != InteractionMode::kNone && k > 1 &&
        (config.interaction_layer == -1 || config.interaction_layer == layer);

    std::vector<Tensor> qs, ks, vs;
    qs.reserve(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) {
      const Tensor& x = xs[static_cast<std::size_t>(i)];
      qs.push_back(add_rowwise(matmul(x, lp.wq), lp.bq));
      ks.push_back(add_rowwise(matmul(x, lp.wk), lp.bk));
      vs.push_back(add_rowwise(matmul(x, lp.wv), lp.bv));
    }

    std::vector<std::pair<Tensor, Tensor>> kv;
    Index appended = 0;
    if (exchange) {
      const Index site =
          config.interaction_mode == InteractionMode::kIntToken ? 1 : 0;
      kv = augment_keys_values(ks, vs, site, options.appended_order);
      appended = k - 1;
      if (mask_aug.empty()) {
        for (const InputSequence& seq : batch.sequences) {
          mask_aug.push_back(attention_mask(seq, appended));
        }
      }
    } else {
      for (Index i = 0; i < k; ++i) {
        kv.emplace_back(ks[static_cast<std::size_t>(i)],
                        vs[static_cast<std::size_t>(i)]);
      }
    }

    for (Index i = 0; i < k; ++i) {
      const Tensor& mask =
          exchange ? mask_aug[static_cast<std::size_t>(i)]
                   : mask_plain[static_cast<std::size_t>(i)];
      if (options.stats) {
        options.stats->attention_entries +=
            static_cast<long long>(L) * (L + appended);
      }
      std::vector<Tensor> heads;
      heads.reserve(static_cast<std::size_t>(config.heads));
      for (Index h = 0; h < config.heads; ++h) {
        Tensor qh = slice_cols(qs[static_cast<std::size_t>(i)], h * head_dim,
                               head_dim);
        Tensor kh = slice_cols(kv[static_cast<std::size_t>(i)].first,
                               h * head_dim, head_dim);
        Tensor vh = slice_cols(kv[static_cast<std::size_t>(i)].second,
                               h * head_dim, head_dim);
        heads.push_back(attention(qh, kh, vh, mask, head_dim));
      }
      Tensor concat = concat_cols(heads);
      Tensor projected = add_rowwise(matmul(concat, lp.wo), lp.bo);
      Tensor after_attn =
          layer_norm(add(xs[static_cast<std::size_t>(i)], projected),
                     lp.ln1_gamma, lp.ln1_beta);
      Tensor hidden =
          gelu(add_rowwise(matmul(after_attn, lp.ffn_w1), lp.ffn_b1));
      Tensor ffn_out = add_rowwise(matmul(hidden, lp.ffn_w2), lp.ffn_b2);
      xs[static_cast<std::size_t>(i)] =
          layer_norm(add(after_attn, ffn_out), lp.ln2_gamma, lp.ln2_beta);
    }
  }
  return xs;
}

namespace {

Tensor head_scores(const Tensor& w, const Tensor& b,
                   const std::vector<Tensor>& embeddings) {
  std::vector<Tensor> per_seq;
  per_seq.reserve(embeddings.size());
  for (const Tensor& h : embeddings) {
    Tensor cls = slice_rows(h, 0, 1);
    per_seq.push_back(add_rowwise(matmul(cls, w), b));
  }
  return stack_scalars(per_seq);
}

}  // namespace

Tensor score_relevance(const ModelParams& params, const EncodedBatch& batch,
                       const ModelConfig& config,
                       const EncodeOptions& options) {
  std::vector<Tensor> hs = encode(params, batch, config, options);
  return head_scores(params.relevance_w, params.relevance_b, hs);
}

Tensor score_duplicates(const ModelParams& params, const EncodedBatch& batch,
                        const ModelConfig& config,
                        const EncodeOptions& options) {
  std::vector<Tensor> hs = encode(params, batch, config, options);
  return sigmoid(head_scores(params.duplicate_w, params.duplicate_b, hs));
}

AttentionCost attention_cost(const ModelConfig& config, Index k, Index L) {
  config.validate();
  if (k < 1 || L < 1) {
    throw std::invalid_argument("attention_cost: k and L must be positive");
  }
  AttentionCost cost;
  cost.set_encoder_entries =
      static_cast<long long>(k) * L * (L + k - 1);
  cost.concat_entries = static_cast<long long>(k) * L *
                        (static_cast<long long>(k) * L);
  return cost;
}

namespace {

constexpr std::size_t kConfigRecordLen = 9;

ArrayX config_to_vector(const ModelConfig& c) {
  ArrayX v(kConfigRecordLen);
  v << static_cast<Scalar>(c.layers), static_cast<Scalar>(c.heads),
      static_cast<Scalar>(c.model_dim), static_cast<Scalar>(c.ffn_dim),
      static_cast<Scalar>(c.vocab_size), static_cast<Scalar>(c.max_positions),
      c.dropout_rate, static_cast<Scalar>(static_cast<int>(c.interaction_mode)),
      static_cast<Scalar>(c.interaction_layer);
  return v;
}

ModelConfig config_from_vector(const ArrayX& v) {
  if (v.size() != static_cast<Index>(kConfigRecordLen)) {
    throw std::runtime_error("model checkpoint: malformed config record");
  }
  ModelConfig c;
  c.layers = static_cast<Index>(v[0]);
  c.heads = static_cast<Index>(v[1]);
  c.model_dim = static_cast<Index>(v[2]);
  c.ffn_dim = static_cast<Index>(v[3]);
  c.vocab_size = static_cast<Index>(v[4]);
  c.max_positions = static_cast<Index>(v[5]);
  c.dropout_rate = v[6];
  c.interaction_mode = static_cast<InteractionMode>(static_cast<int>(v[7]));
  c.interaction_layer = static_cast<Index>(v[8]);
  return c;
}

}  // namespace

std::vector<TensorRecord> params_to_records(ModelParams& params,
                                            const ModelConfig& config) {
  std::vector<TensorRecord> records;
  records.push_back(
      {"config", {static_cast<Index>(kConfigRecordLen)},
       config_to_vector(config)});
  for (auto& [name, t] : params.named_parameters()) {
    records.push_back({name, t.shape(), t.values()});
  }
  return records;
}

std::pair<ModelParams, ModelConfig> params_from_records(
    const std::vector<TensorRecord>& records) {
  const TensorRecord* config_rec = nullptr;
  std::unordered_map<std::string, const TensorRecord*> by_name;
  for (const TensorRecord& r : records) {
    if (r.name == "config") {
      config_rec = &r;
    } else {
      by_name[r.name] = &r;
    }
  }
  if (!config_rec) {
    throw std::runtime_error("model checkpoint: missing config record");
  }
  ModelConfig config = config_from_vector(config_rec->values);
  config.validate();
  ModelParams params = make_params(config);
  for (auto& [name, t] : params.named_parameters()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("model checkpoint: missing record '" + name +
                               "'");
    }
    if (it->second->shape != t.shape()) {
      throw std::runtime_error("model checkpoint: record '" + name +
                               "' has the wrong shape");
    }
    t.values_mut() = it->second->values;
  }
  return {std::move(params), config};
}

void save_model(const std::string& path, ModelParams& params,
                const ModelConfig& config) {
  save_records(path, params_to_records(params, config));
}

std::pair<ModelParams, ModelConfig> load_model(const std::string& path) {
  return params_from_records(load_records(path));
}

}  // namespace setrank
