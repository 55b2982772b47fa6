#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tempgen/corpus.hpp"
#include "tempgen/tags.hpp"

namespace tempgen::codec {

enum class SlotNameStyle { Semantic, Numeric };
enum class SlotLayout { PerEntity, MergedPerRole };

struct MentionPolicy {
  enum class Kind { First, SeededRandom };
  Kind kind = Kind::First;
  std::uint64_t seed = 0;

  static MentionPolicy first() { return {}; }
  static MentionPolicy seeded(std::uint64_t seed) { return {Kind::SeededRandom, seed}; }
};

struct CodecConfig {
  SlotNameStyle slot_name_style = SlotNameStyle::Semantic;
  SlotLayout slot_layout = SlotLayout::PerEntity;
  MentionPolicy mention_policy;
  std::vector<std::string> role_order;
  std::string merged_separator = ";";
  // Reject slot names missing from role_order instead of dropping them.
  bool strict = true;
};

// Token list where tags are represented by their literal strings
// ("<SOT>", ...). Document tokens can never collide with them.
using TemplateSequence = std::vector<std::string>;

std::string render(const TemplateSequence& seq);         // single-space join
TemplateSequence split_rendered(const std::string& text);  // whitespace split

// "<ROLE_1>" for index 0.
std::string numeric_slot_name(std::size_t index);

// One SOT..EOT block per template. Slots are ordered by role_order then by
// first-mention position; relation templates are ordered by the earliest
// first mention among their entities. REE emits the document's single
// template. Templates that would contain no slot are omitted.
TemplateSequence encode_targets(const corpus::Document& doc,
                                const std::vector<corpus::GoldTemplate>& templates,
                                corpus::TaskKind task, const CodecConfig& cfg);

struct ParsedSlot {
  std::string slot_name;
  std::vector<std::string> values;

  bool operator==(const ParsedSlot&) const = default;
};

struct ParsedTemplate {
  std::vector<ParsedSlot> slots;

  bool operator==(const ParsedTemplate&) const = default;
};

enum class WarningKind { UnclosedTag, OrphanTag, EmptySlotName, UnknownSlotName, TruncatedTemplate };

std::string to_string(WarningKind kind);

struct ParseWarning {
  WarningKind kind;
  std::size_t position;  // token index where the repair applies

  bool operator==(const ParseWarning&) const = default;
};

struct ParseResult {
  std::vector<ParsedTemplate> templates;
  std::vector<ParseWarning> warnings;
};

// Total parser. Repairs, each reported as one warning:
//  - a missing EOSN / EOE / EOT is closed at the next tag or at the end
//    of the sequence (UnclosedTag);
//  - a run of words outside any slot, a stray closing tag, a SOSN outside a
//    template, a SOE not preceded by a slot name (its span is dropped) and a
//    slot name never followed by a value are dropped (OrphanTag);
//  - SOSN immediately followed by EOSN drops the slot (EmptySlotName);
//  - templates left without complete slots are dropped (TruncatedTemplate).
// Without a config, every SOE..EOE span becomes one value and names are
// kept verbatim.
ParseResult parse(const TemplateSequence& seq);

// Same grammar, but numeric names are mapped back through role_order, names
// outside role_order are dropped (UnknownSlotName) and merged slot values are
// split at the separator.
ParseResult parse(const TemplateSequence& seq, const CodecConfig& cfg);

// Inverse of parse: writes well-formed sequences. With a config, names are
// re-encoded in its style and multiple values share one SOE..EOE span
// separated by the merged separator; without one, each value gets its own
// slot sequence.
TemplateSequence serialize(const std::vector<ParsedTemplate>& templates,
                           const CodecConfig* cfg = nullptr);

// Lowercase, collapse internal whitespace, trim.
std::string normalize_surface(const std::string& text);

// Maps generated value strings back onto the document. Each distinct
// (normalized) value of a slot becomes a singleton entity whose mention is
// the earliest matching token span, or a span-less mention if none matches.
std::vector<corpus::SlotFill> ground(const ParsedTemplate& parsed, const corpus::Document& doc);

}  // namespace tempgen::codec
