#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tempgen/corpus.hpp"

namespace tempgen::tokenizer {

using TokenId = int;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kFirstTag = 4;  // the six special tags follow, in SpecialTag order
inline constexpr TokenId kFirstContent = 10;

// Whitespace-token vocabulary with a fixed reserved prefix.
class Vocab {
 public:
  Vocab();  // reserved tokens only

  // Appends tokens in the given order; duplicates and reserved strings are skipped.
  static Vocab from_tokens(const std::vector<std::string>& content);

  std::size_t size() const { return id_to_token_.size(); }
  bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }
  TokenId id(const std::string& token) const;  // kUnk when absent
  const std::string& token(TokenId id) const;   // throws on out-of-range ids

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  bool operator==(const Vocab& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  void add(const std::string& token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

// Counts document tokens and slot names; keeps those with count >= min_freq
// ordered by descending frequency, then lexicographically. Tokens in `always`
// (e.g. numeric slot names, the merged separator) are appended afterwards
// regardless of frequency.
Vocab build_vocab(const corpus::Dataset& dataset, int min_freq,
                  const std::vector<std::string>& always = {});

}  // namespace tempgen::tokenizer
