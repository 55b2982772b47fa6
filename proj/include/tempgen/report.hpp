#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempgen/corpus.hpp"
#include "tempgen/decoding.hpp"
#include "tempgen/evaluation.hpp"
#include "tempgen/template_codec.hpp"

namespace tempgen::eval {

// Gold entities of a REE document keyed by role.
RoleEntities gold_role_entities(const corpus::Document& doc);

// Union over every predicted template, grounded on the document.
RoleEntities predicted_role_entities(const std::vector<codec::ParsedTemplate>& templates,
                                     const corpus::Document& doc);

RelationSide gold_relations(const corpus::Document& doc);
RelationSide predicted_relations(const std::vector<codec::ParsedTemplate>& templates, const corpus::Document& doc);

// Slot names of the dataset: cfg.role_order when given, else every gold
// slot name in sorted order.
std::vector<std::string> role_inventory(const corpus::Dataset& gold, const codec::CodecConfig& cfg);

struct DocScore {
  std::string doc_id;
  Counts counts;
  std::size_t parse_warnings = 0;
};

struct EvalReport {
  corpus::TaskKind task = corpus::TaskKind::REE;
  std::vector<RoleScore> roles;  // REE only
  Counts micro_counts;
  PRF micro;
  std::vector<DocScore> docs;  // gold order
  std::size_t parse_warnings = 0;
  std::size_t missing_predictions = 0;
};

// Parses each prediction with the codec, grounds it on its document and
// scores. Documents without a prediction are scored as empty output;
// predictions naming unknown documents throw DataError.
EvalReport evaluate(const corpus::Dataset& gold, const std::vector<decoding::Prediction>& preds,
                    const codec::CodecConfig& cfg);

// Micro-F1 pooled over the report's documents.
double f1_of(const EvalReport& r);

nlohmann::ordered_json report_json(const EvalReport& r, const std::optional<SignificanceResult>& sig = std::nullopt);

// One row in the layout REE | Binary RE | 4-ary RE (P, R, F1 in percent);
// columns of other tasks show "-".
std::string report_table(const EvalReport& r, const std::string& system = "TempGen");

}  // namespace tempgen::eval
