#include "tempgen/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "tempgen/error.hpp"
#include "tempgen/tags.hpp"

namespace tempgen::tokenizer {

Vocab::Vocab() {
  for (auto t : {kPadToken, kBosToken, kEosToken, kUnkToken}) add(std::string(t));
  for (auto t : kTagStrings) add(std::string(t));
}

void Vocab::add(const std::string& token) {
  if (token_to_id_.count(token)) return;
  token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& content) {
  Vocab v;
  for (const auto& t : content)
    if (!t.empty() && !is_reserved_token(t)) v.add(t);
  return v;
}

TokenId Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw DataError("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                    std::to_string(id_to_token_.size()));
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    TokenId i = id(t);
    // PAD/BOS/EOS are framing symbols added by later stages, never by encode.
    if (i < kUnk) i = kUnk;
    ids.push_back(i);
  }
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write vocabulary file '" + path + "'");
  for (const auto& t : id_to_token_) out << t << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  Vocab reserved;
  if (lines.size() < reserved.size())
    throw DataError("vocabulary file '" + path + "' lacks the reserved tokens");
  for (std::size_t i = 0; i < reserved.size(); ++i)
    if (lines[i] != reserved.id_to_token_[i])
      throw DataError("vocabulary file '" + path + "': line " + std::to_string(i + 1) +
                      " should hold reserved token " + reserved.id_to_token_[i]);
  Vocab v;
  for (std::size_t i = reserved.size(); i < lines.size(); ++i) {
    if (lines[i].empty() || v.contains(lines[i]))
      throw DataError("vocabulary file '" + path + "': empty or duplicate token on line " +
                      std::to_string(i + 1));
    v.add(lines[i]);
  }
  return v;
}

Vocab build_vocab(const corpus::Dataset& dataset, int min_freq, const std::vector<std::string>& always) {
  std::map<std::string, long> counts;
  for (const auto& doc : dataset.docs) {
    for (const auto& t : doc.tokens) ++counts[t];
    for (const auto& tpl : doc.templates)
      for (const auto& slot : tpl.slots) ++counts[slot.slot_name];
  }
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size() + always.size());
  for (auto& [tok, _] : kept) tokens.push_back(tok);
  tokens.insert(tokens.end(), always.begin(), always.end());
  return Vocab::from_tokens(tokens);
}

}  // namespace tempgen::tokenizer
