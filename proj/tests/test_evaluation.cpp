#include <doctest.h>

#include "support.hpp"
#include "tempgen/error.hpp"
#include "tempgen/evaluation.hpp"
#include "tempgen/report.hpp"
#include "tempgen/rng.hpp"

using namespace tempgen;
using namespace tempgen::eval;

namespace {

ScoreMatrix random_matrix(Rng& rng, int m, int n, int levels) {
  ScoreMatrix s(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(n)));
  for (auto& row : s)
    for (double& x : row) x = levels > 0 ? uniform_int(rng, 0, levels) : uniform_real(rng);
  return s;
}

std::vector<int> as_vector(const Assignment& a, int m) {
  std::vector<int> v(static_cast<std::size_t>(m), -1);
  for (auto [r, c] : a.pairs) v[static_cast<std::size_t>(r)] = c;
  return v;
}

// Entities drawn from a small pool of mention strings so subsets and
// overlaps are common.
std::vector<MentionSet> random_entities(Rng& rng, int count) {
  static const std::vector<std::string> pool{"a", "b", "c", "d", "e", "f"};
  std::vector<MentionSet> out;
  for (int i = 0; i < count; ++i) {
    std::vector<std::string> ms;
    const int k = uniform_int(rng, 1, 3);
    for (int j = 0; j < k; ++j) ms.push_back(pool[uniform_index(rng, pool.size())]);
    out.push_back(make_mention_set(ms));
  }
  return out;
}

}  // namespace

TEST_CASE("kuhn_munkres: hand cases") {
  const auto id = kuhn_munkres({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CHECK(id.total == 3.0);
  CHECK(id.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}, {2, 2}});
  const auto one = kuhn_munkres({{0.4}});
  CHECK(one.pairs == std::vector<std::pair<int, int>>{{0, 0}});
  CHECK(one.total == 0.4);
  CHECK(kuhn_munkres({}).pairs.empty());
  CHECK(kuhn_munkres({{}, {}}).pairs.empty());
}

TEST_CASE("kuhn_munkres equals exhaustive search, including the tie rule") {
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = uniform_int(rng, 1, 6), n = uniform_int(rng, 1, 6);
    const auto s = random_matrix(rng, m, n, trial % 3 == 0 ? 0 : 2);
    const auto a = kuhn_munkres(s);
    CHECK(a.total == testing::brute_force_max(s));
    CHECK(static_cast<int>(a.pairs.size()) == std::min(m, n));
    CHECK(as_vector(a, m) == testing::brute_force_alignment(s));
  }
}

TEST_CASE("to_prf: zero denominators and the empty-empty case") {
  const PRF empty = to_prf({0, 0, 0});
  CHECK(empty.f1 == 1.0);
  const PRF none = to_prf({0, 0, 3});
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
  const PRF half = to_prf({1, 2, 2});
  CHECK(half.precision == 0.5);
  CHECK(half.f1 == 0.5);
}

TEST_CASE("ceaf_ree: identity, subset and superset") {
  const std::vector<std::string> roles{"Victim", "Weapon"};
  RoleEntities gold{{"Victim", {make_mention_set({"Todd Ray Wilson", "Wilson"})}},
                    {"Weapon", {make_mention_set({"machinegun"})}}};
  const auto same = ceaf_ree(gold, gold, roles);
  for (const auto& r : same.roles) CHECK(r.prf.f1 == 1.0);
  CHECK(same.micro.f1 == 1.0);

  RoleEntities subset{{"Victim", {make_mention_set({"Wilson"})}}};
  CHECK(ceaf_ree(subset, gold, roles).roles[0].counts == Counts{1, 1, 1});

  RoleEntities g2{{"Victim", {make_mention_set({"Wilson"})}}};
  RoleEntities superset{{"Victim", {make_mention_set({"Wilson", "the victim"})}}};
  CHECK(ceaf_ree(superset, g2, roles).roles[0].counts == Counts{0, 1, 1});

  RoleEntities stray{{"Target", {make_mention_set({"x"})}}};
  CHECK_THROWS_AS(ceaf_ree(stray, gold, roles), DataError);
  CHECK(ceaf_ree(stray, gold, roles, false).micro_counts == Counts{0, 0, 2});
}

TEST_CASE("ceaf_ree: duplicate predictions cannot raise precision") {
  const std::vector<std::string> roles{"Victim"};
  RoleEntities gold{{"Victim", {make_mention_set({"Wilson"})}}};
  RoleEntities once{{"Victim", {make_mention_set({"Wilson"})}}};
  RoleEntities twice{{"Victim", {make_mention_set({"wilson"}), make_mention_set({"Wilson"})}}};
  const auto a = ceaf_ree(once, gold, roles), b = ceaf_ree(twice, gold, roles);
  CHECK(b.micro.precision <= a.micro.precision);
  CHECK(b.micro_counts == testing::brute_force_ceaf(twice, gold, roles));
}

TEST_CASE("ceaf_ree equals the brute-force oracle on random instances") {
  Rng rng(7);
  const std::vector<std::string> roles{"A", "B"};
  for (int trial = 0; trial < 200; ++trial) {
    RoleEntities pred, gold;
    for (const auto& r : roles) {
      pred[r] = random_entities(rng, uniform_int(rng, 0, 5));
      gold[r] = random_entities(rng, uniform_int(rng, 0, 5));
    }
    CHECK(ceaf_ree(pred, gold, roles).micro_counts == testing::brute_force_ceaf(pred, gold, roles));
  }
}

TEST_CASE("ceaf accumulator pools counts") {
  const std::vector<std::string> roles{"Victim"};
  CeafAccumulator acc(roles);
  RoleEntities gold{{"Victim", {make_mention_set({"x"})}}};
  RoleEntities wrong{{"Victim", {make_mention_set({"y"})}}};
  acc.add(ceaf_ree(gold, gold, roles));
  acc.add(ceaf_ree(wrong, gold, roles));
  const auto r = acc.report();
  CHECK(r.micro_counts == Counts{1, 2, 2});
  CHECK(r.micro.f1 == 0.5);
}

TEST_CASE("relation_f1: identity and flipped type") {
  RelationSide gold;
  gold.entities = {make_mention_set({"BERT"}), make_mention_set({"SQuAD"})};
  gold.relations = {{{0, "Method"}, {1, "Material"}}};
  CHECK(relation_f1(gold, gold, 2).f1 == 1.0);

  RelationSide flipped = gold;
  flipped.relations = {{{0, "Method"}, {1, "Method"}}};
  CHECK(relation_counts(flipped, gold, 2) == Counts{0, 1, 1});

  RelationSide wrong_arity = gold;
  wrong_arity.relations = {{{0, "Method"}}};
  CHECK(relation_counts(wrong_arity, gold, 2) == Counts{0, 1, 1});
  CHECK_THROWS_AS(relation_counts(gold, gold, 3), DataError);
}

TEST_CASE("relation_f1 equals the brute-force oracle on random instances") {
  Rng rng(11);
  static const std::vector<std::string> types{"T1", "T2"};
  auto relations = [&](int entities, int count, int arity, bool exact_arity) {
    std::vector<Relation> out;
    if (entities == 0) return out;
    for (int i = 0; i < count; ++i) {
      Relation r;
      const int a = exact_arity ? arity : uniform_int(rng, 1, arity + 1);
      for (int j = 0; j < a; ++j)
        r.push_back({uniform_int(rng, 0, entities - 1), types[uniform_index(rng, types.size())]});
      out.push_back(r);
    }
    return out;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const int arity = trial % 2 == 0 ? 2 : 4;
    RelationSide pred, gold;
    pred.entities = random_entities(rng, uniform_int(rng, 0, 5));
    gold.entities = random_entities(rng, uniform_int(rng, 1, 5));
    // distinct members so gold relations keep their arity
    gold.relations.clear();
    for (const auto& r : relations(static_cast<int>(gold.entities.size()), uniform_int(rng, 0, 4), arity, true)) {
      testing::MemberSet s = testing::members(r);
      if (static_cast<int>(s.size()) != arity) continue;
      Relation dedup;
      for (const auto& [e, t] : s) dedup.push_back({e, t});
      gold.relations.push_back(dedup);
    }
    pred.relations = relations(static_cast<int>(pred.entities.size()), uniform_int(rng, 0, 4), arity, false);
    INFO("trial " << trial);
    CHECK(relation_counts(pred, gold, arity) == testing::brute_force_relations(pred, gold, arity));
  }
}

TEST_CASE("paired bootstrap: identical systems and a dominant one") {
  const std::vector<double> a{0.5, 0.7, 0.2, 0.9};
  const auto same = paired_bootstrap(a, a, 500, 3);
  CHECK(same.delta == 0.0);
  CHECK(same.p_value == 1.0);

  const std::vector<double> b{0.4, 0.6, 0.1, 0.8};
  const auto dom = paired_bootstrap(a, b, 500, 3);
  CHECK(dom.delta == doctest::Approx(0.1));
  CHECK(dom.p_value == 0.0);

  const std::vector<double> mixed{0.9, 0.1, 0.3, 0.5};
  const auto r1 = paired_bootstrap(a, mixed, 800, 9), r2 = paired_bootstrap(a, mixed, 800, 9);
  CHECK(r1.p_value == r2.p_value);
  CHECK(r1.p_value >= 0.0);
  CHECK(r1.p_value <= 1.0);

  const std::vector<Counts> ca{{1, 2, 2}, {2, 2, 3}}, cb{{0, 2, 2}, {1, 2, 3}};
  CHECK(paired_bootstrap(ca, ca, 200, 1).p_value == 1.0);
  CHECK(paired_bootstrap(ca, cb, 200, 1).p_value == 0.0);
  CHECK_THROWS(paired_bootstrap(a, std::vector<double>{1.0}, 10, 1));
}

TEST_CASE("evaluate: gold rendered as predictions scores 1 everywhere") {
  for (auto task : {corpus::TaskKind::REE, corpus::TaskKind::BinaryRE, corpus::TaskKind::FourAryRE}) {
    corpus::SynthConfig sc;
    sc.task = task;
    sc.n_docs = 25;
    sc.entities_per_slot = {1, 2};
    sc.doc_len = {200, 240};
    const auto ds = corpus::synth_generate(sc);
    codec::CodecConfig cfg;
    cfg.role_order = sc.slot_inventory;
    std::vector<decoding::Prediction> preds;
    for (const auto& d : ds.docs)
      preds.push_back({d.doc_id, codec::encode_targets(d, d.templates, task, cfg), 0.0});
    const auto rep = evaluate(ds, preds, cfg);
    CHECK(rep.micro.f1 == 1.0);
    CHECK(rep.parse_warnings == 0);
    for (const auto& r : rep.roles) CHECK(r.prf.f1 == 1.0);
    CHECK(report_table(rep).find("100.00") != std::string::npos);

    const auto blank = evaluate(ds, {}, cfg);
    CHECK(blank.missing_predictions == ds.size());
    CHECK(blank.micro.recall == 0.0);
    preds.push_back({"no-such-doc", {}, 0.0});
    CHECK_THROWS_AS(evaluate(ds, preds, cfg), DataError);
  }
}
