#include "tempgen/corpus.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "tempgen/error.hpp"
#include "tempgen/rng.hpp"
#include "tempgen/tags.hpp"

namespace tempgen::corpus {

using nlohmann::ordered_json;

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::REE: return "ree";
    case TaskKind::BinaryRE: return "binary-re";
    case TaskKind::FourAryRE: return "4ary-re";
  }
  return "?";
}

TaskKind parse_task(const std::string& name) {
  if (name == "ree") return TaskKind::REE;
  if (name == "binary-re") return TaskKind::BinaryRE;
  if (name == "4ary-re") return TaskKind::FourAryRE;
  throw ConfigError("unknown task '" + name + "' (expected ree, binary-re or 4ary-re)");
}

int relation_arity(TaskKind task) {
  switch (task) {
    case TaskKind::REE: return 0;
    case TaskKind::BinaryRE: return 2;
    case TaskKind::FourAryRE: return 4;
  }
  return 0;
}

int Entity::first_position() const {
  int best = INT_MAX;
  for (const auto& m : mentions)
    if (m.has_span()) best = std::min(best, m.start);
  return best;
}

std::string Document::span_text(int start, int end) const {
  std::string out;
  for (int i = start; i < end; ++i) {
    if (i > start) out += ' ';
    out += tokens[static_cast<std::size_t>(i)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

[[noreturn]] void invalid(const std::string& doc_id, const std::string& what) {
  throw DataError("document '" + doc_id + "': " + what);
}

void validate_document(const Document& doc, TaskKind task) {
  if (doc.doc_id.empty()) throw DataError("document with empty doc_id");
  if (doc.tokens.empty()) invalid(doc.doc_id, "tokens must be non-empty");
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    const auto& tok = doc.tokens[i];
    if (tok.empty()) invalid(doc.doc_id, "tokens[" + std::to_string(i) + "] is empty");
    if (tok.find_first_of(" \t\r\n") != std::string::npos)
      invalid(doc.doc_id, "tokens[" + std::to_string(i) + "] contains whitespace");
    if (is_reserved_token(tok))
      invalid(doc.doc_id, "tokens[" + std::to_string(i) + "] is a reserved token " + tok);
  }
  const int n = static_cast<int>(doc.tokens.size());
  const int arity = relation_arity(task);
  if (task == TaskKind::REE && doc.templates.size() != 1)
    invalid(doc.doc_id, "REE documents carry exactly one template, found " +
                            std::to_string(doc.templates.size()));
  for (std::size_t t = 0; t < doc.templates.size(); ++t) {
    const auto& tpl = doc.templates[t];
    const std::string where = "templates[" + std::to_string(t) + "]";
    if (arity > 0 && static_cast<int>(tpl.slots.size()) != arity)
      invalid(doc.doc_id, where + " has " + std::to_string(tpl.slots.size()) +
                              " slots, expected " + std::to_string(arity));
    for (std::size_t s = 0; s < tpl.slots.size(); ++s) {
      const auto& slot = tpl.slots[s];
      const std::string swhere = where + ".slots[" + std::to_string(s) + "]";
      if (slot.slot_name.empty()) invalid(doc.doc_id, swhere + ".name is empty");
      if (slot.slot_name.find_first_of(" \t\r\n") != std::string::npos)
        invalid(doc.doc_id, swhere + ".name contains whitespace");
      if (arity > 0 && slot.entities.size() != 1)
        invalid(doc.doc_id, swhere + " must hold exactly one entity");
      for (std::size_t e = 0; e < slot.entities.size(); ++e) {
        const auto& ent = slot.entities[e];
        const std::string ewhere = swhere + ".entities[" + std::to_string(e) + "]";
        if (ent.mentions.empty()) invalid(doc.doc_id, ewhere + ".mentions is empty");
        if (arity > 0 && ent.entity_type != slot.slot_name)
          invalid(doc.doc_id, ewhere + ".type must equal the slot name");
        for (std::size_t m = 0; m < ent.mentions.size(); ++m) {
          const auto& men = ent.mentions[m];
          const std::string mwhere = ewhere + ".mentions[" + std::to_string(m) + "]";
          if (!(0 <= men.start && men.start < men.end && men.end <= n))
            invalid(doc.doc_id, mwhere + " span [" + std::to_string(men.start) + ", " +
                                    std::to_string(men.end) + ") outside document of " +
                                    std::to_string(n) + " tokens");
          if (men.surface != doc.span_text(men.start, men.end))
            invalid(doc.doc_id, mwhere + ".surface does not match its token span");
        }
      }
    }
  }
}

}  // namespace

void validate(const Dataset& dataset) {
  std::unordered_set<std::string> seen;
  for (const auto& doc : dataset.docs) {
    validate_document(doc, dataset.task);
    if (!seen.insert(doc.doc_id).second) invalid(doc.doc_id, "duplicate doc_id");
  }
}

// ---------------------------------------------------------------------------
// JSON-Lines I/O

namespace {

struct FieldChecker {
  const LoadOptions& opts;
  std::vector<std::string>* warnings;
  std::size_t line_no;

  void check(const ordered_json& obj, std::initializer_list<const char*> allowed,
             const std::string& where) const {
    for (const auto& [key, _] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (ok) continue;
      const std::string msg = "line " + std::to_string(line_no) + ": unknown field '" + key +
                              "' in " + where;
      if (opts.strict) throw DataError(msg);
      if (warnings) warnings->push_back(msg);
    }
  }
};

template <typename T>
T get_field(const ordered_json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw DataError("line " + std::to_string(line_no) + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": field '" + key +
                    "' has the wrong type");
  }
}

const ordered_json& get_array(const ordered_json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_array())
    throw DataError("line " + std::to_string(line_no) + ": field '" + key +
                    "' must be an array");
  return *it;
}

void require_object(const ordered_json& j, const std::string& where, std::size_t line_no) {
  if (!j.is_object())
    throw DataError("line " + std::to_string(line_no) + ": " + where + " must be an object");
}

Document parse_record(const ordered_json& rec, const FieldChecker& fc) {
  const std::size_t ln = fc.line_no;
  require_object(rec, "record", ln);
  fc.check(rec, {"doc_id", "tokens", "templates"}, "record");
  Document doc;
  doc.doc_id = get_field<std::string>(rec, "doc_id", ln);
  doc.tokens = get_field<std::vector<std::string>>(rec, "tokens", ln);
  const int n = static_cast<int>(doc.tokens.size());
  if (rec.contains("templates")) {
    for (const auto& jt : get_array(rec, "templates", ln)) {
      require_object(jt, "template", ln);
      fc.check(jt, {"slots"}, "template");
      GoldTemplate tpl;
      for (const auto& js : get_array(jt, "slots", ln)) {
        require_object(js, "slot", ln);
        fc.check(js, {"name", "entities"}, "slot");
        SlotFill slot;
        slot.slot_name = get_field<std::string>(js, "name", ln);
        for (const auto& je : get_array(js, "entities", ln)) {
          require_object(je, "entity", ln);
          fc.check(je, {"type", "mentions"}, "entity");
          Entity ent;
          ent.entity_type =
              je.contains("type") ? get_field<std::string>(je, "type", ln) : slot.slot_name;
          for (const auto& jm : get_array(je, "mentions", ln)) {
            require_object(jm, "mention", ln);
            fc.check(jm, {"start", "end"}, "mention");
            Mention m;
            m.start = get_field<int>(jm, "start", ln);
            m.end = get_field<int>(jm, "end", ln);
            if (!(0 <= m.start && m.start < m.end && m.end <= n))
              invalid(doc.doc_id, "line " + std::to_string(ln) + ": mention span [" +
                                      std::to_string(m.start) + ", " + std::to_string(m.end) +
                                      ") outside document of " + std::to_string(n) + " tokens");
            m.surface = doc.span_text(m.start, m.end);
            ent.mentions.push_back(std::move(m));
          }
          slot.entities.push_back(std::move(ent));
        }
        tpl.slots.push_back(std::move(slot));
      }
      doc.templates.push_back(std::move(tpl));
    }
  }
  return doc;
}

}  // namespace

Dataset read_dataset(std::istream& in, TaskKind task, const LoadOptions& opts,
                     std::vector<std::string>* warnings) {
  Dataset ds;
  ds.task = task;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    FieldChecker fc{opts, warnings, line_no};
    ds.docs.push_back(parse_record(rec, fc));
  }
  validate(ds);
  return ds;
}

Dataset load_dataset(const std::string& path, TaskKind task, const LoadOptions& opts,
                     std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  return read_dataset(in, task, opts, warnings);
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& doc : dataset.docs) {
    ordered_json rec;
    rec["doc_id"] = doc.doc_id;
    rec["tokens"] = doc.tokens;
    ordered_json templates = ordered_json::array();
    for (const auto& tpl : doc.templates) {
      ordered_json slots = ordered_json::array();
      for (const auto& slot : tpl.slots) {
        ordered_json ents = ordered_json::array();
        for (const auto& ent : slot.entities) {
          ordered_json mentions = ordered_json::array();
          for (const auto& m : ent.mentions)
            mentions.push_back(ordered_json{{"start", m.start}, {"end", m.end}});
          ents.push_back(ordered_json{{"type", ent.entity_type}, {"mentions", mentions}});
        }
        slots.push_back(ordered_json{{"name", slot.slot_name}, {"entities", ents}});
      }
      templates.push_back(ordered_json{{"slots", slots}});
    }
    rec["templates"] = templates;
    out << rec.dump() << '\n';
  }
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write dataset file '" + path + "'");
  write_dataset(out, dataset);
}

// ---------------------------------------------------------------------------
// Synthetic corpora

namespace {

constexpr std::array<const char*, 12> kEntitySyllables{"ba", "de", "ki", "lo", "mu", "ra",
                                                       "se", "to", "vi", "zu", "na", "pe"};
constexpr std::array<const char*, 10> kFillerSyllables{"an", "el", "is", "or", "um",
                                                       "et", "ad", "ix", "op", "ul"};
constexpr std::array<const char*, 8> kCueSyllables{"vor", "tal", "gen", "mis",
                                                   "pra", "dul", "kes", "fon"};
constexpr int kCuesPerSlot = 3;

template <std::size_t N>
std::string compose(std::size_t index, const std::array<const char*, N>& table, int syllables) {
  std::string word;
  for (int i = 0; i < syllables; ++i) {
    word = table[index % N] + word;
    index /= N;
  }
  return word;
}

// Entity words alternate consonant-vowel, filler words start with a vowel and
// cue words contain consonant clusters, so the three vocabularies never
// collide, even case-insensitively.
std::string entity_word(int i) {
  std::string w = compose(static_cast<std::size_t>(i), kEntitySyllables, 3);
  w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}
std::string filler_word(int i) { return compose(static_cast<std::size_t>(i), kFillerSyllables, 3); }
std::string cue_word(int i) { return compose(static_cast<std::size_t>(i), kCueSyllables, 2); }

bool bad_range(const IntRange& r, int min_lo) { return r.lo < min_lo || r.hi < r.lo; }

int max_planted_tokens(const SynthConfig& cfg) {
  const int mention_tokens = 1 + cfg.mention_len.hi;
  const int slots = static_cast<int>(cfg.slot_inventory.size());
  if (cfg.task == TaskKind::REE)
    return slots * cfg.entities_per_slot.hi * cfg.mention_repeat.hi * mention_tokens;
  const int arity = relation_arity(cfg.task);
  const int rel = cfg.relation_count.hi;
  return rel * (1 + arity * mention_tokens) + rel * arity * cfg.mention_repeat.hi * mention_tokens;
}

struct PlantedEntity {
  int slot = 0;                     // index into slot_inventory
  std::vector<std::string> words;   // surface tokens
  std::vector<Mention> mentions;
};

// A chunk is either a planted span (cue + entity words) or a relation
// sentence made of several such spans; entity_refs records where each
// entity's words start inside the chunk.
struct Chunk {
  std::vector<std::string> tokens;
  std::vector<std::pair<int, int>> entity_refs;  // (entity index, offset of first word)
};

class DocBuilder {
 public:
  DocBuilder(const SynthConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {}

  int new_entity(int slot) {
    PlantedEntity ent;
    ent.slot = slot;
    for (int attempt = 0;; ++attempt) {
      const int len = uniform_int(rng_, cfg_.mention_len.lo, cfg_.mention_len.hi);
      std::vector<std::string> words;
      int lo = 0, hi = cfg_.entity_vocab_size - 1;
      if (cfg_.typed_lexicon) {
        const int slots = static_cast<int>(cfg_.slot_inventory.size());
        lo = slot * cfg_.entity_vocab_size / slots;
        hi = (slot + 1) * cfg_.entity_vocab_size / slots - 1;
      }
      for (int i = 0; i < len; ++i) words.push_back(entity_word(uniform_int(rng_, lo, hi)));
      if (surfaces_.insert(join(words)).second || attempt > 1000) {
        ent.words = std::move(words);
        break;
      }
    }
    entities_.push_back(std::move(ent));
    return static_cast<int>(entities_.size()) - 1;
  }

  void append_mention(Chunk& chunk, int entity) {
    const auto& ent = entities_[static_cast<std::size_t>(entity)];
    chunk.tokens.push_back(cue_word(ent.slot * kCuesPerSlot + uniform_int(rng_, 0, kCuesPerSlot - 1)));
    chunk.entity_refs.emplace_back(entity, static_cast<int>(chunk.tokens.size()));
    chunk.tokens.insert(chunk.tokens.end(), ent.words.begin(), ent.words.end());
  }

  void add_solo_mention(int entity) {
    Chunk c;
    append_mention(c, entity);
    chunks_.push_back(std::move(c));
  }

  void add_chunk(Chunk c) { chunks_.push_back(std::move(c)); }

  int planted_tokens() const {
    int n = 0;
    for (const auto& c : chunks_) n += static_cast<int>(c.tokens.size());
    return n;
  }

  // Shuffles chunks among filler tokens and records mention spans.
  std::vector<std::string> assemble(int doc_len) {
    const int filler = doc_len - planted_tokens();
    std::vector<int> items;  // >= 0 chunk index, -1 filler token
    for (std::size_t i = 0; i < chunks_.size(); ++i) items.push_back(static_cast<int>(i));
    items.insert(items.end(), static_cast<std::size_t>(filler), -1);
    shuffle(items, rng_);
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(doc_len));
    for (int item : items) {
      if (item < 0) {
        tokens.push_back(filler_word(uniform_int(rng_, 0, cfg_.filler_vocab_size - 1)));
        continue;
      }
      const Chunk& c = chunks_[static_cast<std::size_t>(item)];
      const int base = static_cast<int>(tokens.size());
      tokens.insert(tokens.end(), c.tokens.begin(), c.tokens.end());
      for (const auto& [entity, offset] : c.entity_refs) {
        auto& ent = entities_[static_cast<std::size_t>(entity)];
        Mention m;
        m.start = base + offset;
        m.end = m.start + static_cast<int>(ent.words.size());
        m.surface = join(ent.words);
        ent.mentions.push_back(std::move(m));
      }
    }
    for (auto& ent : entities_)
      std::sort(ent.mentions.begin(), ent.mentions.end(),
                [](const Mention& a, const Mention& b) { return a.start < b.start; });
    return tokens;
  }

  Entity make_entity(int index) const {
    const auto& pe = entities_[static_cast<std::size_t>(index)];
    Entity e;
    e.mentions = pe.mentions;
    e.entity_type = cfg_.slot_inventory[static_cast<std::size_t>(pe.slot)];
    return e;
  }

  const std::vector<PlantedEntity>& entities() const { return entities_; }

 private:
  static std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
    return s;
  }

  const SynthConfig& cfg_;
  Rng& rng_;
  std::vector<PlantedEntity> entities_;
  std::vector<Chunk> chunks_;
  std::set<std::string> surfaces_;
};

Document make_ree_document(const SynthConfig& cfg, Rng& rng, const std::string& doc_id) {
  DocBuilder b(cfg, rng);
  const int slots = static_cast<int>(cfg.slot_inventory.size());
  std::vector<std::vector<int>> per_slot(static_cast<std::size_t>(slots));
  for (int s = 0; s < slots; ++s) {
    const int n = uniform_int(rng, cfg.entities_per_slot.lo, cfg.entities_per_slot.hi);
    for (int i = 0; i < n; ++i) per_slot[static_cast<std::size_t>(s)].push_back(b.new_entity(s));
  }
  for (const auto& ents : per_slot)
    for (int e : ents) {
      const int reps = uniform_int(rng, cfg.mention_repeat.lo, cfg.mention_repeat.hi);
      for (int r = 0; r < reps; ++r) b.add_solo_mention(e);
    }
  const int doc_len = uniform_int(rng, cfg.doc_len.lo, cfg.doc_len.hi);
  Document doc;
  doc.doc_id = doc_id;
  doc.tokens = b.assemble(doc_len);
  GoldTemplate tpl;
  for (int s = 0; s < slots; ++s) {
    SlotFill slot;
    slot.slot_name = cfg.slot_inventory[static_cast<std::size_t>(s)];
    for (int e : per_slot[static_cast<std::size_t>(s)]) slot.entities.push_back(b.make_entity(e));
    tpl.slots.push_back(std::move(slot));
  }
  doc.templates.push_back(std::move(tpl));
  return doc;
}

Document make_re_document(const SynthConfig& cfg, Rng& rng, const std::string& doc_id) {
  DocBuilder b(cfg, rng);
  const int arity = relation_arity(cfg.task);
  const int n_types = static_cast<int>(cfg.slot_inventory.size());
  std::vector<std::vector<int>> by_type(static_cast<std::size_t>(n_types));
  auto pick_entity = [&](int type) {
    auto& pool = by_type[static_cast<std::size_t>(type)];
    if (!pool.empty() && uniform_real(rng) < 0.5)
      return pool[uniform_index(rng, pool.size())];
    pool.push_back(b.new_entity(type));
    return pool.back();
  };

  const int n_rel = uniform_int(rng, cfg.relation_count.lo, cfg.relation_count.hi);
  std::set<std::vector<int>> seen;
  std::vector<std::vector<int>> relations;
  for (int r = 0, attempts = 0; r < n_rel && attempts < 50 * n_rel; ++attempts) {
    std::vector<int> types;
    if (arity == 4) {
      types = {0, 1, 2, 3};
    } else {
      int a = uniform_int(rng, 0, n_types - 1);
      int c = uniform_int(rng, 0, n_types - 2);
      if (c >= a) ++c;
      types = {std::min(a, c), std::max(a, c)};
    }
    std::vector<int> members;
    for (int t : types) members.push_back(pick_entity(t));
    if (!seen.insert(members).second) continue;
    relations.push_back(members);
    ++r;
  }

  for (const auto& members : relations) {
    Chunk c;
    c.tokens.push_back(cue_word(n_types * kCuesPerSlot));  // relation marker
    for (int e : members) b.append_mention(c, e);
    b.add_chunk(std::move(c));
  }
  for (std::size_t e = 0; e < b.entities().size(); ++e) {
    const int reps = uniform_int(rng, cfg.mention_repeat.lo, cfg.mention_repeat.hi) - 1;
    for (int r = 0; r < reps; ++r) b.add_solo_mention(static_cast<int>(e));
  }

  const int doc_len = uniform_int(rng, cfg.doc_len.lo, cfg.doc_len.hi);
  Document doc;
  doc.doc_id = doc_id;
  doc.tokens = b.assemble(doc_len);
  for (const auto& members : relations) {
    GoldTemplate tpl;
    for (int e : members) {
      SlotFill slot;
      slot.slot_name = cfg.slot_inventory[static_cast<std::size_t>(b.entities()[static_cast<std::size_t>(e)].slot)];
      slot.entities.push_back(b.make_entity(e));
      tpl.slots.push_back(std::move(slot));
    }
    doc.templates.push_back(std::move(tpl));
  }
  return doc;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.n_docs < 0) throw ConfigError("synth: n_docs must be non-negative");
  if (bad_range(cfg.doc_len, 1)) throw ConfigError("synth: invalid doc_len range");
  if (bad_range(cfg.entities_per_slot, 0)) throw ConfigError("synth: invalid entities_per_slot range");
  if (bad_range(cfg.mention_repeat, 1)) throw ConfigError("synth: invalid mention_repeat range");
  if (bad_range(cfg.mention_len, 1)) throw ConfigError("synth: invalid mention_len range");
  if (bad_range(cfg.relation_count, 0)) throw ConfigError("synth: invalid relation_count range");
  if (!(cfg.distractor_ratio >= 0.0 && cfg.distractor_ratio <= 1.0))
    throw ConfigError("synth: distractor_ratio must lie in [0, 1]");
  if (cfg.slot_inventory.empty()) throw ConfigError("synth: slot inventory is empty");
  const int max_slots = static_cast<int>(kCueSyllables.size() * kCueSyllables.size()) / kCuesPerSlot - 1;
  if (static_cast<int>(cfg.slot_inventory.size()) > max_slots)
    throw ConfigError("synth: at most " + std::to_string(max_slots) + " slot names supported");
  std::set<std::string> names(cfg.slot_inventory.begin(), cfg.slot_inventory.end());
  if (names.size() != cfg.slot_inventory.size()) throw ConfigError("synth: duplicate slot names");
  for (const auto& n : names)
    if (n.empty() || n.find_first_of(" \t\r\n") != std::string::npos || is_reserved_token(n))
      throw ConfigError("synth: invalid slot name '" + n + "'");
  if (cfg.task == TaskKind::BinaryRE && cfg.slot_inventory.size() < 2)
    throw ConfigError("synth: binary relations need at least 2 entity types");
  if (cfg.task == TaskKind::FourAryRE && cfg.slot_inventory.size() < 4)
    throw ConfigError("synth: 4-ary relations need at least 4 entity types");
  if (cfg.entity_vocab_size < 1 || cfg.entity_vocab_size > 12 * 12 * 12)
    throw ConfigError("synth: entity_vocab_size must lie in [1, 1728]");
  if (cfg.typed_lexicon && cfg.entity_vocab_size < static_cast<int>(cfg.slot_inventory.size()))
    throw ConfigError("synth: typed_lexicon needs entity_vocab_size >= number of slot names");
  if (cfg.filler_vocab_size < 1 || cfg.filler_vocab_size > 1000)
    throw ConfigError("synth: filler_vocab_size must lie in [1, 1000]");
  const int planted = max_planted_tokens(cfg);
  const double budget = (1.0 - cfg.distractor_ratio) * cfg.doc_len.lo;
  if (planted > budget + 1e-9)
    throw ConfigError("synth: infeasible config, up to " + std::to_string(planted) +
                      " planted tokens but only " + std::to_string(static_cast<int>(budget)) +
                      " non-filler positions in the shortest document");
}

Dataset synth_generate(const SynthConfig& cfg) {
  validate(cfg);
  Dataset ds;
  ds.task = cfg.task;
  Rng rng(cfg.seed);
  for (int i = 0; i < cfg.n_docs; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06d", i);
    ds.docs.push_back(cfg.task == TaskKind::REE ? make_ree_document(cfg, rng, id)
                                                : make_re_document(cfg, rng, id));
  }
  validate(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting

Split split(const Dataset& dataset, const std::array<double, 3>& fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split: every fraction must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ConfigError("split: fractions must sum to 1");
  const std::size_t n = dataset.size();
  if (n < 3) throw DataError("split: need at least 3 documents, got " + std::to_string(n));

  std::array<std::size_t, 3> sizes{};
  sizes[0] = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  sizes[1] = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
  for (std::size_t i = 0; i < 2; ++i) sizes[i] = std::clamp<std::size_t>(sizes[i], 1, n - 2);
  if (sizes[0] + sizes[1] > n - 1) sizes[0] = n - 1 - sizes[1];
  sizes[2] = n - sizes[0] - sizes[1];

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);

  Split out;
  std::array<Dataset*, 3> parts{&out.train, &out.dev, &out.test};
  std::size_t pos = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                 order.begin() + static_cast<std::ptrdiff_t>(pos + sizes[p]));
    pos += sizes[p];
    std::sort(idx.begin(), idx.end());
    parts[p]->task = dataset.task;
    for (std::size_t i : idx) parts[p]->docs.push_back(dataset.docs[i]);
  }
  return out;
}

}  // namespace tempgen::corpus
