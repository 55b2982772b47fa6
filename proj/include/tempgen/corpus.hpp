#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tempgen::corpus {

enum class TaskKind { REE, BinaryRE, FourAryRE };

std::string to_string(TaskKind task);
TaskKind parse_task(const std::string& name);  // "ree", "binary-re", "4ary-re"

// Number of slots per template for relation tasks, 0 for REE.
int relation_arity(TaskKind task);

// A contiguous token span [start, end). Predicted mentions produced by
// grounding may be span-less, in which case start == end == -1.
struct Mention {
  int start = -1;
  int end = -1;
  std::string surface;

  bool has_span() const { return start >= 0; }
};

struct Entity {
  std::vector<Mention> mentions;
  std::string entity_type;

  // Smallest mention start, or INT_MAX for span-less entities.
  int first_position() const;
};

struct SlotFill {
  std::string slot_name;
  std::vector<Entity> entities;
};

struct GoldTemplate {
  std::vector<SlotFill> slots;
};

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<GoldTemplate> templates;

  // Space-joined tokens[start, end).
  std::string span_text(int start, int end) const;
};

struct Dataset {
  TaskKind task = TaskKind::REE;
  std::vector<Document> docs;

  std::size_t size() const { return docs.size(); }
  bool empty() const { return docs.empty(); }
};

struct LoadOptions {
  bool strict = false;  // reject unknown JSON fields instead of warning
};

// Reads a JSON-Lines dataset. Throws DataError naming the line number on
// malformed JSON and the doc_id on invariant violations. Mention surfaces are
// computed from the token spans.
Dataset load_dataset(const std::string& path, TaskKind task, const LoadOptions& opts = {},
                     std::vector<std::string>* warnings = nullptr);
Dataset read_dataset(std::istream& in, TaskKind task, const LoadOptions& opts = {},
                     std::vector<std::string>* warnings = nullptr);

void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::string& path, const Dataset& dataset);

// Checks every structural invariant; throws DataError on the first violation.
void validate(const Dataset& dataset);

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct SynthConfig {
  TaskKind task = TaskKind::REE;
  int n_docs = 100;
  IntRange doc_len{100, 140};
  // Roles for REE, entity types for relation tasks.
  std::vector<std::string> slot_inventory{"PerpInd", "PerpOrg", "Target", "Victim", "Weapon"};
  IntRange entities_per_slot{0, 2};
  IntRange mention_repeat{1, 2};
  IntRange mention_len{1, 2};
  // Minimum fraction of each document made of filler tokens.
  double distractor_ratio = 0.4;
  IntRange relation_count{1, 3};
  int entity_vocab_size = 1000;
  int filler_vocab_size = 400;
  // Each slot name draws its entity words from its own slice of the entity
  // lexicon, so word identity also signals the role.
  bool typed_lexicon = false;
  std::uint64_t seed = 7;
};

void validate(const SynthConfig& cfg);

// Generates documents whose role-cued entity mentions are planted verbatim
// among filler tokens. Deterministic under cfg.seed.
Dataset synth_generate(const SynthConfig& cfg);

struct Split {
  Dataset train;
  Dataset dev;
  Dataset test;
};

// Seeded partition. Documents keep their original relative order inside
// each part.
Split split(const Dataset& dataset, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace tempgen::corpus
