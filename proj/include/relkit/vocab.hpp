#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "relkit/error.hpp"

namespace relkit {

inline std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

// Token table with three reserved ids. [CLS] is pinned to 0; corpus text is
// never allowed to contain the reserved surface forms.
class Vocab {
 public:
  static constexpr int kCls = 0;
  static constexpr int kPad = 1;
  static constexpr int kUnk = 2;
  static constexpr int kReserved = 3;

  Vocab() : tokens_{"[CLS]", "[PAD]", "[UNK]"} {
    for (int i = 0; i < kReserved; ++i) index_.emplace(tokens_[i], i);
  }

  // Dense ids in sorted token order, independent of sample order.
  static Vocab from_tokens(const std::vector<std::string>& corpus_tokens) {
    std::set<std::string> uniq(corpus_tokens.begin(), corpus_tokens.end());
    Vocab v;
    for (const auto& tok : uniq) v.append(tok);
    return v;
  }

  // Ids assigned in the given order; tokens must already be unique. Used
  // when an existing id assignment must be reproduced exactly.
  static Vocab from_ordered(const std::vector<std::string>& ordered_tokens) {
    Vocab v;
    for (const auto& tok : ordered_tokens) v.append(tok);
    return v;
  }

  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // File format: one non-reserved token per line; line number is the id
  // after the 3 reserved ids.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("vocab: cannot open " + path + " for writing");
    for (std::size_t i = kReserved; i < tokens_.size(); ++i) out << tokens_[i] << "\n";
  }

  static Vocab load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("vocab: cannot open " + path);
    Vocab v;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      v.append(line);
    }
    return v;
  }

  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (const auto& tok : tokens_) {
      for (char c : tok) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
      }
      h ^= static_cast<unsigned char>('\n');
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  void append(const std::string& token) {
    if (token == "[CLS]" || token == "[PAD]" || token == "[UNK]") {
      throw ParseError("vocab: reserved token in corpus text: " + token);
    }
    if (!index_.emplace(token, static_cast<int>(tokens_.size())).second) {
      throw ParseError("vocab: duplicate token " + token);
    }
    tokens_.push_back(token);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Token ids with [CLS] at position 0; trailing [PAD] up to the requested
// length. valid_len counts the non-pad prefix.
struct TokenSequence {
  std::vector<int> ids;
  int valid_len = 0;

  int length() const { return static_cast<int>(ids.size()); }
};

// Maps pre-split tokens, prepends [CLS], truncates to l_max (including the
// [CLS] slot) and pads to pad_to when that is longer. Callers that carry
// entity spans must check truncation did not cut a span.
inline TokenSequence encode_tokens(const std::vector<std::string>& tokens,
                                   const Vocab& vocab, int l_max, int pad_to = 0) {
  if (l_max < 2) throw Error("encode_tokens: l_max must be at least 2");
  TokenSequence seq;
  seq.ids.push_back(Vocab::kCls);
  for (const auto& tok : tokens) {
    if (static_cast<int>(seq.ids.size()) >= l_max) break;
    seq.ids.push_back(vocab.id(tok));
  }
  seq.valid_len = static_cast<int>(seq.ids.size());
  const int target = std::min(std::max(pad_to, seq.valid_len), l_max);
  seq.ids.resize(static_cast<std::size_t>(target), Vocab::kPad);
  return seq;
}

inline TokenSequence tokenize(const std::string& text, const Vocab& vocab, int l_max,
                              int pad_to = 0) {
  const auto tokens = split_whitespace(text);
  if (tokens.empty()) throw Error("tokenize: empty text");
  return encode_tokens(tokens, vocab, l_max, pad_to);
}

}  // namespace relkit
