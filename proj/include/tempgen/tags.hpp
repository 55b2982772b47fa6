#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace tempgen {

enum class SpecialTag { SOT, EOT, SOSN, EOSN, SOE, EOE };

inline constexpr std::array<std::string_view, 6> kTagStrings{"<SOT>",  "<EOT>", "<SOSN>",
                                                             "<EOSN>", "<SOE>", "<EOE>"};

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";

inline std::string_view tag_string(SpecialTag tag) { return kTagStrings[static_cast<int>(tag)]; }

inline std::optional<SpecialTag> as_tag(std::string_view token) {
  for (std::size_t i = 0; i < kTagStrings.size(); ++i)
    if (kTagStrings[i] == token) return static_cast<SpecialTag>(i);
  return std::nullopt;
}

// Tokens that may never appear in document text.
inline bool is_reserved_token(std::string_view token) {
  return as_tag(token).has_value() || token == kPadToken || token == kBosToken ||
         token == kEosToken || token == kUnkToken;
}

}  // namespace tempgen
