#include "tempgen/template_codec.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "tempgen/error.hpp"
#include "tempgen/rng.hpp"

namespace tempgen::codec {

using corpus::Document;
using corpus::Entity;
using corpus::GoldTemplate;
using corpus::Mention;
using corpus::TaskKind;

std::string render(const TemplateSequence& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += seq[i];
  }
  return out;
}

TemplateSequence split_rendered(const std::string& text) {
  TemplateSequence seq;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) seq.push_back(tok);
  return seq;
}

std::string numeric_slot_name(std::size_t index) { return "<ROLE_" + std::to_string(index + 1) + ">"; }

std::string to_string(WarningKind kind) {
  switch (kind) {
    case WarningKind::UnclosedTag: return "UnclosedTag";
    case WarningKind::OrphanTag: return "OrphanTag";
    case WarningKind::EmptySlotName: return "EmptySlotName";
    case WarningKind::UnknownSlotName: return "UnknownSlotName";
    case WarningKind::TruncatedTemplate: return "TruncatedTemplate";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void append_tag(TemplateSequence& seq, SpecialTag tag) { seq.emplace_back(tag_string(tag)); }

void append_tokens(TemplateSequence& seq, const Document& doc, const Mention& m) {
  for (int i = m.start; i < m.end; ++i) seq.push_back(doc.tokens[static_cast<std::size_t>(i)]);
}

class MentionChooser {
 public:
  MentionChooser(const MentionPolicy& policy, const std::string& doc_id)
      : policy_(policy), rng_(mix_seed(policy.seed, fnv1a(doc_id))) {}

  const Mention& choose(const Entity& e) {
    if (policy_.kind == MentionPolicy::Kind::SeededRandom)
      return e.mentions[uniform_index(rng_, e.mentions.size())];
    const Mention* best = &e.mentions.front();
    for (const auto& m : e.mentions)
      if (m.start < best->start || (m.start == best->start && m.end < best->end)) best = &m;
    return *best;
  }

 private:
  MentionPolicy policy_;
  Rng rng_;
};

struct SlotItem {
  std::size_t role_rank;
  int first_position;
  std::size_t order;  // original position, stabilizes ties
  std::string name;
  const Entity* entity;
};

std::optional<std::size_t> role_rank(const CodecConfig& cfg, const std::string& name) {
  auto it = std::find(cfg.role_order.begin(), cfg.role_order.end(), name);
  if (it == cfg.role_order.end()) return std::nullopt;
  return static_cast<std::size_t>(it - cfg.role_order.begin());
}

void encode_template(TemplateSequence& out, const Document& doc, const GoldTemplate& tpl,
                     const CodecConfig& cfg, MentionChooser& chooser) {
  std::vector<SlotItem> items;
  for (const auto& slot : tpl.slots) {
    auto rank = role_rank(cfg, slot.slot_name);
    if (!rank) {
      if (cfg.strict)
        throw DataError("document '" + doc.doc_id + "': slot name '" + slot.slot_name +
                        "' missing from role order");
      continue;
    }
    for (const auto& ent : slot.entities)
      items.push_back({*rank, ent.first_position(), items.size(), slot.slot_name, &ent});
  }
  if (items.empty()) return;
  std::sort(items.begin(), items.end(), [](const SlotItem& a, const SlotItem& b) {
    return std::tie(a.role_rank, a.first_position, a.order) <
           std::tie(b.role_rank, b.first_position, b.order);
  });

  auto emit_name = [&](const SlotItem& item) {
    append_tag(out, SpecialTag::SOSN);
    out.push_back(cfg.slot_name_style == SlotNameStyle::Numeric ? numeric_slot_name(item.role_rank)
                                                                : item.name);
    append_tag(out, SpecialTag::EOSN);
  };

  append_tag(out, SpecialTag::SOT);
  if (cfg.slot_layout == SlotLayout::PerEntity) {
    for (const auto& item : items) {
      emit_name(item);
      append_tag(out, SpecialTag::SOE);
      append_tokens(out, doc, chooser.choose(*item.entity));
      append_tag(out, SpecialTag::EOE);
    }
  } else {
    for (std::size_t i = 0; i < items.size();) {
      std::size_t j = i;
      while (j < items.size() && items[j].role_rank == items[i].role_rank) ++j;
      emit_name(items[i]);
      append_tag(out, SpecialTag::SOE);
      for (std::size_t k = i; k < j; ++k) {
        if (k > i) out.push_back(cfg.merged_separator);
        append_tokens(out, doc, chooser.choose(*items[k].entity));
      }
      append_tag(out, SpecialTag::EOE);
      i = j;
    }
  }
  append_tag(out, SpecialTag::EOT);
}

}  // namespace

TemplateSequence encode_targets(const Document& doc, const std::vector<GoldTemplate>& templates,
                                TaskKind task, const CodecConfig& cfg) {
  TemplateSequence out;
  if (templates.empty()) return out;
  MentionChooser chooser(cfg.mention_policy, doc.doc_id);
  if (task == TaskKind::REE) {
    encode_template(out, doc, templates.front(), cfg, chooser);
    return out;
  }
  std::vector<std::size_t> order(templates.size());
  std::vector<int> first(templates.size());
  for (std::size_t t = 0; t < templates.size(); ++t) {
    order[t] = t;
    int best = INT32_MAX;
    for (const auto& slot : templates[t].slots)
      for (const auto& ent : slot.entities) best = std::min(best, ent.first_position());
    first[t] = best;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return first[a] < first[b]; });
  for (std::size_t t : order) encode_template(out, doc, templates[t], cfg, chooser);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class State { Outside, InTemplate, InName, AfterName, InValue, OrphanValue };

class Parser {
 public:
  explicit Parser(const CodecConfig* cfg) : cfg_(cfg) {}

  ParseResult run(const TemplateSequence& seq) {
    for (std::size_t i = 0; i < seq.size(); ++i) step(seq[i], i);
    finish(seq.size());
    return std::move(result_);
  }

 private:
  void warn(WarningKind kind, std::size_t pos) { result_.warnings.push_back({kind, pos}); }

  void step(const std::string& token, std::size_t pos) {
    auto tag = as_tag(token);
    if (!tag) {
      word(token, pos);
      return;
    }
    orphan_run_ = false;
    if (state_ == State::OrphanValue) {
      state_ = orphan_return_;
      if (*tag == SpecialTag::EOE) return;
    }
    if (state_ == State::InName && *tag != SpecialTag::EOSN) {
      warn(WarningKind::UnclosedTag, pos);
      end_name(pos);
    }
    switch (*tag) {
      case SpecialTag::SOT:
        if (state_ != State::Outside) {
          close_slot(pos);
          warn(WarningKind::UnclosedTag, pos);
          end_template(pos);
        }
        state_ = State::InTemplate;
        break;
      case SpecialTag::EOT:
        if (state_ == State::Outside) {
          warn(WarningKind::OrphanTag, pos);
          break;
        }
        close_slot(pos);
        end_template(pos);
        state_ = State::Outside;
        break;
      case SpecialTag::SOSN:
        if (state_ == State::Outside) {
          warn(WarningKind::OrphanTag, pos);
          break;
        }
        close_slot(pos);
        name_.clear();
        values_.clear();
        name_pos_ = pos;
        state_ = State::InName;
        break;
      case SpecialTag::EOSN:
        if (state_ != State::InName) {
          warn(WarningKind::OrphanTag, pos);
          break;
        }
        end_name(pos);
        break;
      case SpecialTag::SOE:
        if (state_ == State::AfterName) {
          state_ = State::InValue;
          break;
        }
        if (state_ == State::InValue) {
          warn(WarningKind::UnclosedTag, pos);
          commit_slot();
          state_ = State::InTemplate;
        }
        warn(WarningKind::OrphanTag, pos);
        orphan_return_ = state_;
        state_ = State::OrphanValue;
        break;
      case SpecialTag::EOE:
        if (state_ != State::InValue) {
          warn(WarningKind::OrphanTag, pos);
          break;
        }
        commit_slot();
        state_ = State::InTemplate;
        break;
    }
  }

  void word(const std::string& token, std::size_t pos) {
    switch (state_) {
      case State::InName:
        name_.push_back(token);
        break;
      case State::InValue:
        values_.push_back(token);
        break;
      case State::OrphanValue:
        break;
      default:
        if (!orphan_run_) warn(WarningKind::OrphanTag, pos);
        orphan_run_ = true;
        return;
    }
    orphan_run_ = false;
  }

  void end_name(std::size_t pos) {
    if (name_.empty()) warn(WarningKind::EmptySlotName, pos);
    state_ = State::AfterName;
  }

  // Leaves slot context before a structural tag.
  void close_slot(std::size_t pos) {
    if (state_ == State::AfterName) {
      if (!name_.empty()) warn(WarningKind::OrphanTag, name_pos_);
    } else if (state_ == State::InValue) {
      warn(WarningKind::UnclosedTag, pos);
      commit_slot();
    }
    state_ = State::InTemplate;
  }

  void commit_slot() {
    if (name_.empty()) return;  // already reported as EmptySlotName
    std::string raw;
    for (std::size_t i = 0; i < name_.size(); ++i) raw += (i ? " " : "") + name_[i];
    auto name = resolve_name(raw);
    if (!name) {
      warn(WarningKind::UnknownSlotName, name_pos_);
      return;
    }
    ParsedSlot slot;
    slot.slot_name = *name;
    const bool merged = cfg_ && cfg_->slot_layout == SlotLayout::MergedPerRole;
    std::string current;
    bool any = false;
    for (const auto& v : values_) {
      if (merged && v == cfg_->merged_separator) {
        if (any) slot.values.push_back(current);
        current.clear();
        any = false;
        continue;
      }
      current += (any ? " " : "") + v;
      any = true;
    }
    if (any) slot.values.push_back(current);
    current_.slots.push_back(std::move(slot));
  }

  std::optional<std::string> resolve_name(const std::string& raw) const {
    if (!cfg_ || cfg_->role_order.empty()) return raw;
    const auto& roles = cfg_->role_order;
    if (cfg_->slot_name_style == SlotNameStyle::Numeric) {
      for (std::size_t i = 0; i < roles.size(); ++i)
        if (raw == numeric_slot_name(i)) return roles[i];
      return std::nullopt;
    }
    if (std::find(roles.begin(), roles.end(), raw) != roles.end()) return raw;
    return std::nullopt;
  }

  void end_template(std::size_t pos) {
    if (current_.slots.empty())
      warn(WarningKind::TruncatedTemplate, pos);
    else
      result_.templates.push_back(std::move(current_));
    current_ = {};
  }

  void finish(std::size_t end) {
    if (state_ == State::OrphanValue) state_ = orphan_return_;
    if (state_ == State::InName) {
      warn(WarningKind::UnclosedTag, end);
      end_name(end);
    }
    if (state_ == State::Outside) return;
    close_slot(end);
    warn(WarningKind::UnclosedTag, end);
    end_template(end);
  }

  const CodecConfig* cfg_;
  ParseResult result_;
  State state_ = State::Outside;
  State orphan_return_ = State::Outside;
  bool orphan_run_ = false;
  ParsedTemplate current_;
  std::vector<std::string> name_;
  std::vector<std::string> values_;
  std::size_t name_pos_ = 0;
};

}  // namespace

ParseResult parse(const TemplateSequence& seq) { return Parser(nullptr).run(seq); }

ParseResult parse(const TemplateSequence& seq, const CodecConfig& cfg) { return Parser(&cfg).run(seq); }

TemplateSequence serialize(const std::vector<ParsedTemplate>& templates, const CodecConfig* cfg) {
  TemplateSequence out;
  auto append_words = [&](const std::string& text) {
    for (auto& w : split_rendered(text)) out.push_back(std::move(w));
  };
  auto name_token = [&](const std::string& name) {
    if (!cfg || cfg->slot_name_style == SlotNameStyle::Semantic) return name;
    auto rank = role_rank(*cfg, name);
    if (!rank) throw DataError("slot name '" + name + "' missing from role order");
    return numeric_slot_name(*rank);
  };
  auto emit_slot = [&](const std::string& name, const std::vector<std::string>& values) {
    append_tag(out, SpecialTag::SOSN);
    append_words(name_token(name));
    append_tag(out, SpecialTag::EOSN);
    append_tag(out, SpecialTag::SOE);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out.push_back(cfg ? cfg->merged_separator : ";");
      append_words(values[i]);
    }
    append_tag(out, SpecialTag::EOE);
  };
  const bool merged = cfg && cfg->slot_layout == SlotLayout::MergedPerRole;
  for (const auto& tpl : templates) {
    append_tag(out, SpecialTag::SOT);
    for (const auto& slot : tpl.slots) {
      if (merged || slot.values.size() <= 1) {
        emit_slot(slot.slot_name, slot.values);
      } else {
        for (const auto& v : slot.values) emit_slot(slot.slot_name, {v});
      }
    }
    append_tag(out, SpecialTag::EOT);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grounding

std::string normalize_surface(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::vector<corpus::SlotFill> ground(const ParsedTemplate& parsed, const Document& doc) {
  std::vector<std::string> norm_tokens;
  norm_tokens.reserve(doc.tokens.size());
  for (const auto& t : doc.tokens) norm_tokens.push_back(normalize_surface(t));

  std::vector<corpus::SlotFill> out;
  std::map<std::string, std::size_t> slot_index;
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& slot : parsed.slots) {
    auto [it, inserted] = slot_index.emplace(slot.slot_name, out.size());
    if (inserted) out.push_back({slot.slot_name, {}});
    auto& fill = out[it->second];
    for (const auto& value : slot.values) {
      const std::string norm = normalize_surface(value);
      if (norm.empty() || !seen[slot.slot_name].insert(norm).second) continue;
      const auto words = split_rendered(norm);
      Mention m;
      m.surface = value;
      const std::size_t k = words.size();
      for (std::size_t s = 0; s + k <= norm_tokens.size(); ++s) {
        if (std::equal(words.begin(), words.end(), norm_tokens.begin() + static_cast<std::ptrdiff_t>(s))) {
          m.start = static_cast<int>(s);
          m.end = static_cast<int>(s + k);
          m.surface = doc.span_text(m.start, m.end);
          break;
        }
      }
      Entity e;
      e.entity_type = slot.slot_name;
      e.mentions.push_back(std::move(m));
      fill.entities.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace tempgen::codec
