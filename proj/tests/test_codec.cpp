#include <doctest.h>

#include <algorithm>
#include <map>

#include "codec_fixtures.hpp"
#include "tempgen/corpus.hpp"
#include "tempgen/error.hpp"
#include "tempgen/template_codec.hpp"

using namespace tempgen;
using namespace tempgen::codec;

namespace {

corpus::Document fig2_doc() {
  corpus::Document d;
  d.doc_id = "fig2";
  d.tokens = {"a", "group", "of", "terrorists", "attacked", "the", "Machinegun", "of", "Wilson"};
  corpus::GoldTemplate t;
  corpus::SlotFill perp{"PerpInd", {}};
  perp.entities.push_back({{{1, 4, "group of terrorists"}}, "PerpInd"});
  corpus::SlotFill victim{"Victim", {}};
  victim.entities.push_back({{{8, 9, "Wilson"}}, "Victim"});
  t.slots = {victim, perp};
  d.templates.push_back(t);
  return d;
}

CodecConfig fig2_config() {
  CodecConfig c;
  c.role_order = {"PerpInd", "PerpOrg", "Target", "Victim", "Weapon"};
  return c;
}

using SlotValues = std::vector<std::pair<std::string, std::string>>;

// Sorted (slot, value) pairs of each template.
std::vector<SlotValues> flatten(const std::vector<ParsedTemplate>& ts) {
  std::vector<SlotValues> out;
  for (const auto& t : ts) {
    SlotValues v;
    for (const auto& s : t.slots)
      for (const auto& x : s.values) v.emplace_back(s.slot_name, x);
    std::sort(v.begin(), v.end());
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Expected pairs straight from the annotation, rendering each entity by its
// earliest mention; templates without entities vanish.
std::vector<SlotValues> expected_first(const corpus::Document& d) {
  std::vector<SlotValues> out;
  for (const auto& t : d.templates) {
    SlotValues v;
    for (const auto& s : t.slots)
      for (const auto& e : s.entities) {
        const auto& m = *std::min_element(e.mentions.begin(), e.mentions.end(),
                                          [](const auto& a, const auto& b) { return a.start < b.start; });
        v.emplace_back(s.slot_name, m.surface);
      }
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CodecConfig> all_configs(const std::vector<std::string>& roles) {
  std::vector<CodecConfig> out;
  for (auto style : {SlotNameStyle::Semantic, SlotNameStyle::Numeric})
    for (auto layout : {SlotLayout::PerEntity, SlotLayout::MergedPerRole})
      for (auto policy : {MentionPolicy::first(), MentionPolicy::seeded(17)}) {
        CodecConfig c;
        c.slot_name_style = style;
        c.slot_layout = layout;
        c.mention_policy = policy;
        c.role_order = roles;
        out.push_back(c);
      }
  return out;
}

}  // namespace

TEST_CASE("encode: REE example with a PerpInd entity") {
  const auto seq = encode_targets(fig2_doc(), fig2_doc().templates, corpus::TaskKind::REE, fig2_config());
  CHECK(render(seq) ==
        "<SOT> <SOSN> PerpInd <EOSN> <SOE> group of terrorists <EOE> <SOSN> Victim <EOSN> <SOE> Wilson <EOE> <EOT>");
}

TEST_CASE("encode: zero templates give an empty sequence") {
  auto d = fig2_doc();
  CHECK(encode_targets(d, {}, corpus::TaskKind::BinaryRE, fig2_config()).empty());
}

TEST_CASE("encode: numeric names follow role order") {
  CodecConfig c = fig2_config();
  c.slot_name_style = SlotNameStyle::Numeric;
  const auto seq = encode_targets(fig2_doc(), fig2_doc().templates, corpus::TaskKind::REE, c);
  CHECK(render(seq) ==
        "<SOT> <SOSN> <ROLE_1> <EOSN> <SOE> group of terrorists <EOE> <SOSN> <ROLE_4> <EOSN> <SOE> Wilson <EOE> <EOT>");
  CHECK(numeric_slot_name(1) == "<ROLE_2>");
  const auto parsed = parse(seq, c);
  CHECK(parsed.warnings.empty());
  CHECK(parsed.templates.at(0).slots.at(0).slot_name == "PerpInd");
  CHECK(parsed.templates.at(0).slots.at(1).slot_name == "Victim");
}

TEST_CASE("encode: strict mode rejects names outside role order") {
  CodecConfig c = fig2_config();
  c.role_order = {"PerpInd"};
  CHECK_THROWS_AS(encode_targets(fig2_doc(), fig2_doc().templates, corpus::TaskKind::REE, c), DataError);
  c.strict = false;
  CHECK_NOTHROW(encode_targets(fig2_doc(), fig2_doc().templates, corpus::TaskKind::REE, c));
}

TEST_CASE("encode: merged layout joins a role's entities") {
  corpus::Document d = fig2_doc();
  d.templates[0].slots[0].entities.push_back({{{6, 7, "Machinegun"}}, "Victim"});
  CodecConfig c = fig2_config();
  c.slot_layout = SlotLayout::MergedPerRole;
  const auto seq = encode_targets(d, d.templates, corpus::TaskKind::REE, c);
  CHECK(render(seq) ==
        "<SOT> <SOSN> PerpInd <EOSN> <SOE> group of terrorists <EOE> <SOSN> Victim <EOSN> <SOE> Machinegun ; Wilson "
        "<EOE> <EOT>");
  const auto parsed = parse(seq, c);
  CHECK(parsed.warnings.empty());
  CHECK(parsed.templates.at(0).slots.at(1).values == std::vector<std::string>{"Machinegun", "Wilson"});
}

TEST_CASE("round trip over synthetic annotations and every codec config") {
  for (auto task : {corpus::TaskKind::REE, corpus::TaskKind::BinaryRE, corpus::TaskKind::FourAryRE}) {
    corpus::SynthConfig sc;
    sc.task = task;
    sc.n_docs = 40;
    sc.seed = 3;
    sc.mention_repeat = {1, 3};
    sc.doc_len = {200, 240};
    sc.distractor_ratio = 0.2;
    const auto ds = corpus::synth_generate(sc);
    for (const auto& cfg : all_configs(sc.slot_inventory))
      for (const auto& d : ds.docs) {
        const auto parsed = parse(encode_targets(d, d.templates, task, cfg), cfg);
        REQUIRE(parsed.warnings.empty());
        if (cfg.mention_policy.kind == MentionPolicy::Kind::First) {
          CHECK(flatten(parsed.templates) == expected_first(d));
        } else {
          // each value must be one of its entity's surfaces
          std::multimap<std::string, std::string> allowed;
          for (const auto& t : d.templates)
            for (const auto& s : t.slots)
              for (const auto& e : s.entities)
                for (const auto& m : e.mentions) allowed.emplace(s.slot_name, m.surface);
          std::size_t values = 0, expected = 0;
          for (const auto& t : parsed.templates)
            for (const auto& s : t.slots)
              for (const auto& v : s.values) {
                ++values;
                auto [lo, hi] = allowed.equal_range(s.slot_name);
                CHECK(std::any_of(lo, hi, [&](const auto& kv) { return kv.second == v; }));
              }
          for (const auto& t : expected_first(d)) expected += t.size();
          CHECK(values == expected);
        }
      }
  }
}

TEST_CASE("parse: malformed fixtures produce the documented repairs") {
  for (const auto& f : testing::parse_fixtures()) {
    INFO(f.name);
    CodecConfig cfg;
    cfg.role_order = f.role_order;
    const auto seq = split_rendered(f.text);
    const auto r = f.role_order.empty() ? parse(seq) : parse(seq, cfg);
    CHECK(r.templates == f.templates);
    std::vector<WarningKind> kinds;
    for (const auto& w : r.warnings) {
      kinds.push_back(w.kind);
      CHECK(w.position <= seq.size());
    }
    CHECK(kinds == f.warnings);
  }
}

TEST_CASE("parse is idempotent at the structured level") {
  for (const auto& f : testing::parse_fixtures()) {
    INFO(f.name);
    const auto first = parse(split_rendered(f.text));
    const auto again = parse(serialize(first.templates));
    CHECK(again.templates == first.templates);
    CHECK(again.warnings.empty());
  }
}

TEST_CASE("ground: earliest normalized match, span-less otherwise, duplicates merged") {
  const auto d = fig2_doc();
  ParsedTemplate t{{{"Weapon", {"machinegun", "MACHINEGUN", "rocket"}}, {"Victim", {"of"}}}};
  const auto fills = ground(t, d);
  REQUIRE(fills.size() == 2);
  REQUIRE(fills[0].entities.size() == 2);
  CHECK(fills[0].entities[0].mentions[0].start == 6);
  CHECK(fills[0].entities[0].mentions[0].end == 7);
  CHECK_FALSE(fills[0].entities[1].mentions[0].has_span());
  CHECK(fills[0].entities[1].mentions[0].surface == "rocket");
  CHECK(fills[1].entities[0].mentions[0].start == 2);  // first "of"
}

TEST_CASE("normalize_surface") {
  CHECK(normalize_surface("  Todd   Ray\tWilson ") == "todd ray wilson");
  CHECK(normalize_surface("") == "");
}
