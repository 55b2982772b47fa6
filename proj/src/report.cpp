#include "tempgen/report.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "tempgen/error.hpp"

namespace tempgen::eval {

using nlohmann::ordered_json;

RoleEntities gold_role_entities(const corpus::Document& doc) {
  RoleEntities out;
  for (const auto& t : doc.templates)
    for (const auto& slot : t.slots) {
      auto& list = out[slot.slot_name];
      for (const auto& e : slot.entities) list.push_back(mention_set(e));
    }
  return out;
}

RoleEntities predicted_role_entities(const std::vector<codec::ParsedTemplate>& templates,
                                     const corpus::Document& doc) {
  RoleEntities out;
  for (const auto& t : templates)
    for (const auto& fill : codec::ground(t, doc)) {
      auto& list = out[fill.slot_name];
      for (const auto& e : fill.entities) list.push_back(mention_set(e));
    }
  return out;
}

namespace {

int entity_index(std::vector<MentionSet>& entities, MentionSet m) {
  for (std::size_t i = 0; i < entities.size(); ++i)
    if (entities[i] == m) return static_cast<int>(i);
  entities.push_back(std::move(m));
  return static_cast<int>(entities.size()) - 1;
}

}  // namespace

RelationSide gold_relations(const corpus::Document& doc) {
  RelationSide side;
  for (const auto& t : doc.templates) {
    Relation r;
    for (const auto& slot : t.slots)
      for (const auto& e : slot.entities) r.push_back({entity_index(side.entities, mention_set(e)), slot.slot_name});
    side.relations.push_back(std::move(r));
  }
  return side;
}

RelationSide predicted_relations(const std::vector<codec::ParsedTemplate>& templates, const corpus::Document& doc) {
  RelationSide side;
  for (const auto& t : templates) {
    Relation r;
    for (const auto& fill : codec::ground(t, doc))
      for (const auto& e : fill.entities) {
        MentionSet m = mention_set(e);
        if (m.empty()) continue;
        r.push_back({entity_index(side.entities, std::move(m)), fill.slot_name});
      }
    if (!r.empty()) side.relations.push_back(std::move(r));
  }
  return side;
}

std::vector<std::string> role_inventory(const corpus::Dataset& gold, const codec::CodecConfig& cfg) {
  if (!cfg.role_order.empty()) return cfg.role_order;
  std::set<std::string> names;
  for (const auto& d : gold.docs)
    for (const auto& t : d.templates)
      for (const auto& s : t.slots) names.insert(s.slot_name);
  return {names.begin(), names.end()};
}

EvalReport evaluate(const corpus::Dataset& gold, const std::vector<decoding::Prediction>& preds,
                    const codec::CodecConfig& cfg) {
  std::map<std::string, const decoding::Prediction*> by_id;
  for (const auto& p : preds) by_id[p.doc_id] = &p;
  std::set<std::string> gold_ids;
  for (const auto& d : gold.docs) gold_ids.insert(d.doc_id);
  for (const auto& [id, _] : by_id)
    if (!gold_ids.count(id)) throw DataError("prediction for unknown doc_id '" + id + "'");

  EvalReport rep;
  rep.task = gold.task;
  const auto roles = role_inventory(gold, cfg);
  codec::CodecConfig parse_cfg = cfg;
  parse_cfg.role_order = roles;
  CeafAccumulator acc(roles);
  const int arity = corpus::relation_arity(gold.task);

  for (const auto& doc : gold.docs) {
    DocScore ds;
    ds.doc_id = doc.doc_id;
    codec::ParseResult parsed;
    auto it = by_id.find(doc.doc_id);
    if (it == by_id.end())
      ++rep.missing_predictions;
    else
      parsed = codec::parse(it->second->output_tokens, parse_cfg);
    ds.parse_warnings = parsed.warnings.size();
    rep.parse_warnings += ds.parse_warnings;
    if (gold.task == corpus::TaskKind::REE) {
      const CeafReport r = ceaf_ree(predicted_role_entities(parsed.templates, doc), gold_role_entities(doc), roles, false);
      acc.add(r);
      ds.counts = r.micro_counts;
    } else {
      ds.counts = relation_counts(predicted_relations(parsed.templates, doc), gold_relations(doc), arity);
      rep.micro_counts += ds.counts;
    }
    rep.docs.push_back(std::move(ds));
  }
  if (gold.task == corpus::TaskKind::REE) {
    const CeafReport r = acc.report();
    rep.roles = r.roles;
    rep.micro_counts = r.micro_counts;
  }
  rep.micro = to_prf(rep.micro_counts);
  return rep;
}

double f1_of(const EvalReport& r) { return r.micro.f1; }

namespace {

ordered_json prf_json(const PRF& p, const Counts& c) {
  return ordered_json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
                      {"correct", c.correct},     {"predicted", c.predicted}, {"gold", c.gold}};
}

}  // namespace

ordered_json report_json(const EvalReport& r, const std::optional<SignificanceResult>& sig) {
  ordered_json j;
  j["task"] = corpus::to_string(r.task);
  j["documents"] = r.docs.size();
  j["micro"] = prf_json(r.micro, r.micro_counts);
  if (r.task == corpus::TaskKind::REE) {
    ordered_json roles = ordered_json::object();
    for (const auto& rs : r.roles) roles[rs.role] = prf_json(rs.prf, rs.counts);
    j["roles"] = roles;
  } else {
    j["arity"] = corpus::relation_arity(r.task);
  }
  j["parse_warnings"] = r.parse_warnings;
  j["missing_predictions"] = r.missing_predictions;
  if (sig)
    j["significance"] = ordered_json{
        {"delta", sig->delta}, {"p_value", sig->p_value}, {"resamples", sig->resamples}, {"seed", sig->seed}};
  return j;
}

std::string report_table(const EvalReport& r, const std::string& system) {
  auto cell = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "                 |          REE          |       Binary RE       |        4-ary RE\n";
  out << "Model            |  Prec.   Rec.     F1  |  Prec.   Rec.     F1  |  Prec.   Rec.     F1\n";
  std::string name = system;
  name.resize(16, ' ');
  out << name << " |";
  for (auto task : {corpus::TaskKind::REE, corpus::TaskKind::BinaryRE, corpus::TaskKind::FourAryRE}) {
    if (task == r.task)
      out << ' ' << cell(r.micro.precision) << ' ' << cell(r.micro.recall) << ' ' << cell(r.micro.f1) << "  |";
    else
      out << "      -      -      -  |";
  }
  std::string s = out.str();
  s.pop_back();
  s += '\n';
  if (r.task == corpus::TaskKind::REE && !r.roles.empty()) {
    s += "\nRole             |  Prec.   Rec.     F1\n";
    for (const auto& rs : r.roles) {
      std::string role = rs.role;
      role.resize(16, ' ');
      s += role + " | " + cell(rs.prf.precision) + ' ' + cell(rs.prf.recall) + ' ' + cell(rs.prf.f1) + '\n';
    }
  }
  return s;
}

}  // namespace tempgen::eval
