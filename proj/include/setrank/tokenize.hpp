// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "setrank/tensor.hpp"

namespace setrank {

/// Word-level vocabulary with fixed reserved ids.
struct Vocab {
  static constexpr Index kPad = 0;
  static constexpr Index kCls = 1;
  static constexpr Index kInt = 2;
  static constexpr Index kSep = 3;
  static constexpr Index kUnk = 4;

  std::unordered_map<std::string, Index> token_to_id;
  std::vector<std::string> id_to_token;

  Index size() const { return static_cast<Index>(id_to_token.size()); }
  Index id_of(const std::string& token) const;
  const std::string& token_of(Index id) const;
  bool contains(const std::string& token) const {
    return token_to_id.count(token) > 0;
  }
};

/// Lowercased maximal alphanumeric runs; everything else separates tokens.
std::vector<std::string> tokenize_words(const std::string& text);

/// One encoded query/passage pair:
/// [CLS] [INT] q1..qm [SEP] d1..dn [SEP] then padding.
struct InputSequence {
  std::vector<Index> token_ids;
  std::vector<Index> position_ids;  // position_ids[i] == i
  std::vector<std::uint8_t> mask;   // 1 = real token, 0 = padding
  Index length() const { return static_cast<Index>(token_ids.size()); }
};

struct EncodedBatch {
  std::vector<InputSequence> sequences;  // equal padded lengths
  Index int_position = 1;
  std::vector<std::string> passage_ids;
  Index size() const { return static_cast<Index>(sequences.size()); }
  Index padded_length() const {
    return sequences.empty() ? 0 : sequences.front().length();
  }
};

inline constexpr Index kMaxQueryTokens = 32;
inline constexpr Index kMaxPassageTokens = 256;

Vocab build_vocab(const std::vector<std::string>& corpus, int min_count);

InputSequence encode_pair(const std::string& query, const std::string& passage,
                          const Vocab& vocab);

/// Encodes k passages against one query, padded to the longest sequence in
/// the batch (or `min_padded_length` if that is longer, which lets callers
/// compare batches of different sizes shape-for-shape).
EncodedBatch encode_batch(
    const std::string& query,
    const std::vector<std::pair<std::string, std::string>>& passages,
    const Vocab& vocab, Index min_padded_length = 0);

void save_vocab(std::ostream& out, const Vocab& vocab);
Vocab load_vocab(std::istream& in);
void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

}  // namespace setrank
