#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tempgen/corpus.hpp"

namespace tempgen::eval {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Counts {
  long correct = 0;
  long predicted = 0;
  long gold = 0;

  Counts& operator+=(const Counts& o) {
    correct += o.correct;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

// P = correct/predicted, R = correct/gold, 0 on a zero denominator, except
// that an empty prediction against an empty gold side scores 1/1/1.
PRF to_prf(const Counts& c);

// Maximum-score injective assignment between rows and columns.
struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), ascending by row
  double total = 0.0;                       // summed in row order
};

using ScoreMatrix = std::vector<std::vector<double>>;

// Hungarian algorithm on a score matrix with m rows and n columns; returns
// min(m, n) pairs. Among optimal assignments the lexicographically smallest
// row->column vector wins, with "unassigned" ordered after every column.
Assignment kuhn_munkres(const ScoreMatrix& scores);

// Normalized, sorted, de-duplicated mention strings of one entity.
using MentionSet = std::vector<std::string>;

MentionSet mention_set(const corpus::Entity& entity);
MentionSet make_mention_set(std::vector<std::string> surfaces);

using RoleEntities = std::map<std::string, std::vector<MentionSet>>;

struct RoleScore {
  std::string role;
  Counts counts;
  PRF prf;
};

struct CeafReport {
  std::vector<RoleScore> roles;  // in role-inventory order
  Counts micro_counts;
  PRF micro;
};

// CEAF-REE for one document: per role, a predicted entity is correct when
// its mention set is a subset of the gold entity it is aligned to. Duplicate
// predicted entities are merged first. Roles outside `roles` throw in strict
// mode and are ignored otherwise.
CeafReport ceaf_ree(const RoleEntities& pred, const RoleEntities& gold,
                    const std::vector<std::string>& roles, bool strict = true);

// Sums per-document role counts and recomputes PRF from the pooled counts.
class CeafAccumulator {
 public:
  explicit CeafAccumulator(std::vector<std::string> roles);
  void add(const CeafReport& doc_report);
  CeafReport report() const;

 private:
  std::vector<std::string> roles_;
  std::vector<Counts> counts_;
};

struct RelationMember {
  int entity = 0;  // index into the side's entity list
  std::string type;
};

using Relation = std::vector<RelationMember>;

struct RelationSide {
  std::vector<MentionSet> entities;
  std::vector<Relation> relations;
};

// Predicted entities are aligned to gold entities by maximum total shared
// mentions (Kuhn-Munkres; zero-overlap pairs stay unaligned). A predicted
// relation is correct when, mapped through that alignment, it equals a gold
// relation member-for-member including types. Relations are compared as
// sets. Gold relations must all have `arity` members (DataError otherwise);
// predictions of another arity count as incorrect.
Counts relation_counts(const RelationSide& pred, const RelationSide& gold, int arity);
PRF relation_f1(const RelationSide& pred, const RelationSide& gold, int arity);

struct SignificanceResult {
  double delta = 0.0;    // metric(A) - metric(B) on the full set
  double p_value = 1.0;  // fraction of resamples with metric(A) - metric(B) <= 0
  int resamples = 0;
  std::uint64_t seed = 0;
};

// Paired bootstrap over documents; the metric is the mean per-document score.
SignificanceResult paired_bootstrap(std::span<const double> a, std::span<const double> b,
                                    int resamples = 10000, std::uint64_t seed = 0);

// Same, with micro-F1 over pooled per-document counts as the metric.
SignificanceResult paired_bootstrap(std::span<const Counts> a, std::span<const Counts> b,
                                    int resamples = 10000, std::uint64_t seed = 0);

}  // namespace tempgen::eval
