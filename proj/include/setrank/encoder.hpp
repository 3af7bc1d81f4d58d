// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "setrank/checkpoint.hpp"
#include "setrank/tensor.hpp"
#include "setrank/tokenize.hpp"

namespace setrank {

/// Where foreign key/value rows come from when sequences exchange
/// information: the [INT] token, the [CLS] token (ablation), or nowhere
/// (independent pointwise forwards).
enum class InteractionMode { kIntToken, kClsToken, kNone };

InteractionMode interaction_mode_from_string(const std::string& name);
std::string to_string(InteractionMode mode);

struct ModelConfig {
  Index layers = 2;
  Index heads = 4;
  Index model_dim = 64;
  Index ffn_dim = 256;
  Index vocab_size = 0;
  Index max_positions = 512;
  Scalar dropout_rate = 0.0;  // kept at 0 for desk-scale training
  InteractionMode interaction_mode = InteractionMode::kIntToken;
  Index interaction_layer = -1;  // -1 = exchange at every layer, else one layer

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  Tensor ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

struct ModelParams {
  Tensor token_embedding;     // vocab_size x model_dim
  Tensor position_embedding;  // max_positions x model_dim
  std::vector<LayerParams> layers;
  Tensor relevance_w, relevance_b;  // model_dim x 1, 1
  Tensor duplicate_w, duplicate_b;  // model_dim x 1, 1

  std::vector<Tensor> parameters();
  std::vector<std::pair<std::string, Tensor>> named_parameters();
  void zero_grads();
};

/// Weight matrices uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero,
/// LayerNorm scale one / offset zero.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Appends the row at `int_position` of every other sequence's K (and V) to
/// each sequence's own K (and V). `appended_order`, when given, permutes the
/// k-1 appended rows the same way for every sequence; attention output is
/// insensitive to that order.
std::vector<std::pair<Tensor, Tensor>> augment_keys_values(
    const std::vector<Tensor>& keys, const std::vector<Tensor>& values,
    Index int_position, const std::vector<Index>* appended_order = nullptr);

struct EncodeStats {
  // (query, key) score-grid entries, summed over layers and sequences,
  // counted once per sequence per layer regardless of head count.
  long long attention_entries = 0;
};

struct EncodeOptions {
  const std::vector<Index>* appended_order = nullptr;
  EncodeStats* stats = nullptr;
};

/// Final contextual embeddings, one (padded_length x model_dim) tensor per
/// sequence. Post-norm transformer; foreign [INT]/[CLS] rows are appended to
/// post-projection K and V at every exchange layer.
std::vector<Tensor> encode(const ModelParams& params,
                           const EncodedBatch& batch,
                           const ModelConfig& config,
                           const EncodeOptions& options = {});

/// Linear head over each sequence's final [CLS] embedding; rank-1 tensor of
/// k scores.
Tensor score_relevance(const ModelParams& params, const EncodedBatch& batch,
                       const ModelConfig& config,
                       const EncodeOptions& options = {});

/// Sigmoid head over each sequence's final [CLS] embedding; rank-1 tensor of
/// k probabilities in (0, 1).
Tensor score_duplicates(const ModelParams& params, const EncodedBatch& batch,
                        const ModelConfig& config,
                        const EncodeOptions& options = {});

struct AttentionCost {
  long long set_encoder_entries = 0;  // k * L * (L + k - 1) per layer
  long long concat_entries = 0;       // (k * L)^2 per layer
};

/// Per-layer attention score-matrix sizes for k sequences of padded length
/// L: parallel encoding with appended foreign rows vs one concatenated
/// sequence.
AttentionCost attention_cost(const ModelConfig& config, Index k, Index L);

/// Checkpoint bridging. The records carry every parameter tensor plus a
/// "config" record; loading validates shapes against the embedded config.
std::vector<TensorRecord> params_to_records(ModelParams& params,
                                            const ModelConfig& config);
std::pair<ModelParams, ModelConfig> params_from_records(
    const std::vector<TensorRecord>& records);

void save_model(const std::string& path, ModelParams& params,
                const ModelConfig& config);
std::pair<ModelParams, ModelConfig> load_model(const std::string& path);

}  // namespace setrank
