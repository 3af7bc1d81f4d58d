// SPDX-License-Identifier: Apache-2.0
#include "setrank/tokenize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace setrank {

namespace {

const std::vector<std::string> kReserved = {"[PAD]", "[CLS]", "[INT]",
                                            "[SEP]", "[UNK]"};

}  // namespace

Index Vocab::id_of(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(Index id) const {
  if (id < 0 || id >= size()) {
    throw std::invalid_argument("Vocab::token_of: id out of range");
  }
  return id_to_token[static_cast<std::size_t>(id)];
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Vocab build_vocab(const std::vector<std::string>& corpus, int min_count) {
  if (corpus.empty()) {
    throw std::invalid_argument("build_vocab: empty corpus");
  }
  std::map<std::string, long> counts;  // ordered: ids independent of doc order
  for (const std::string& doc : corpus) {
    for (std::string& w : tokenize_words(doc)) counts[w] += 1;
  }
  Vocab vocab;
  vocab.id_to_token = kReserved;
  for (Index i = 0; i < static_cast<Index>(kReserved.size()); ++i) {
    vocab.token_to_id[kReserved[static_cast<std::size_t>(i)]] = i;
  }
  for (const auto& [word, count] : counts) {
    if (count >= min_count) {
      vocab.token_to_id[word] = vocab.size();
      vocab.id_to_token.push_back(word);
    }
  }
  return vocab;
}

InputSequence encode_pair(const std::string& query, const std::string& passage,
                          const Vocab& vocab) {
  std::vector<std::string> q = tokenize_words(query);
  std::vector<std::string> d = tokenize_words(passage);
  if (static_cast<Index>(q.size()) > kMaxQueryTokens) {
    q.resize(kMaxQueryTokens);
  }
  if (static_cast<Index>(d.size()) > kMaxPassageTokens) {
    d.resize(kMaxPassageTokens);
  }
  InputSequence seq;
  seq.token_ids.reserve(q.size() + d.size() + 4);
  seq.token_ids.push_back(Vocab::kCls);
  seq.token_ids.push_back(Vocab::kInt);
  for (const std::string& w : q) seq.token_ids.push_back(vocab.id_of(w));
  seq.token_ids.push_back(Vocab::kSep);
  for (const std::string& w : d) seq.token_ids.push_back(vocab.id_of(w));
  seq.token_ids.push_back(Vocab::kSep);
  const Index n = seq.length();
  seq.position_ids.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    seq.position_ids[static_cast<std::size_t>(i)] = i;
  }
  seq.mask.assign(static_cast<std::size_t>(n), 1);
  return seq;
}

EncodedBatch encode_batch(
    const std::string& query,
    const std::vector<std::pair<std::string, std::string>>& passages,
    const Vocab& vocab, Index min_padded_length) {
  if (passages.empty()) {
    throw std::invalid_argument("encode_batch: no passages");
  }
  EncodedBatch batch;
  Index max_len = min_padded_length;
  for (const auto& [id, text] : passages) {
    batch.sequences.push_back(encode_pair(query, text, vocab));
    batch.passage_ids.push_back(id);
    max_len = std::max(max_len, batch.sequences.back().length());
  }
  for (InputSequence& seq : batch.sequences) {
    for (Index i = seq.length(); i < max_len; ++i) {
      seq.token_ids.push_back(Vocab::kPad);
      seq.position_ids.push_back(i);
      seq.mask.push_back(0);
    }
  }
  return batch;
}

void save_vocab(std::ostream& out, const Vocab& vocab) {
  for (Index id = 0; id < vocab.size(); ++id) {
    out << vocab.token_of(id) << '\t' << id << '\n';
  }
  if (!out) throw std::runtime_error("save_vocab: write failed");
}

Vocab load_vocab(std::istream& in) {
  std::vector<std::pair<Index, std::string>> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error("load_vocab: missing tab in line '" + line +
                               "'");
    }
    entries.emplace_back(static_cast<Index>(std::stoll(line.substr(tab + 1))),
                         line.substr(0, tab));
  }
  std::sort(entries.begin(), entries.end());
  Vocab vocab;
  for (const auto& [id, token] : entries) {
    if (id != vocab.size()) {
      throw std::runtime_error("load_vocab: ids are not dense from 0");
    }
    vocab.token_to_id[token] = id;
    vocab.id_to_token.push_back(token);
  }
  for (std::size_t i = 0; i < kReserved.size(); ++i) {
    if (vocab.id_to_token.size() <= i || vocab.id_to_token[i] != kReserved[i]) {
      throw std::runtime_error("load_vocab: reserved ids are damaged");
    }
  }
  return vocab;
}

void save_vocab(const std::string& path, const Vocab& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_vocab: cannot open '" + path + "'");
  save_vocab(out, vocab);
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_vocab: cannot open '" + path + "'");
  return load_vocab(in);
}

}  // namespace setrank
