#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tempgen/corpus.hpp"
#include "tempgen/tags.hpp"
#include "tempgen/tokenizer.hpp"

using namespace tempgen;
using namespace tempgen::tokenizer;

namespace {

corpus::Dataset tiny_corpus() {
  corpus::Document d;
  d.doc_id = "d";
  d.tokens = {"a", "b", "a", "a"};
  d.templates.emplace_back();
  corpus::Dataset ds;
  ds.docs.push_back(d);
  return ds;
}

}  // namespace

TEST_CASE("build_vocab: frequency threshold") {
  const Vocab v = build_vocab(tiny_corpus(), 2);
  CHECK(v.contains("a"));
  CHECK_FALSE(v.contains("b"));
  CHECK(v.size() == static_cast<std::size_t>(kFirstContent) + 1);
}

TEST_CASE("build_vocab: reserved ids and every tag present") {
  const Vocab v = build_vocab(tiny_corpus(), 100);
  CHECK(v.size() == static_cast<std::size_t>(kFirstContent));
  CHECK(v.id(std::string(kPadToken)) == kPad);
  for (std::size_t i = 0; i < kTagStrings.size(); ++i)
    CHECK(v.id(std::string(kTagStrings[i])) == kFirstTag + static_cast<TokenId>(i));
}

TEST_CASE("build_vocab: deterministic, frequency then lexicographic") {
  corpus::SynthConfig cfg;
  cfg.n_docs = 30;
  const auto ds = corpus::synth_generate(cfg);
  const Vocab a = build_vocab(ds, 1), b = build_vocab(ds, 1);
  CHECK(a == b);

  corpus::Dataset ties = tiny_corpus();
  ties.docs[0].tokens = {"z", "y", "y", "x"};
  const Vocab t = build_vocab(ties, 1);
  CHECK(t.id("y") == kFirstContent);
  CHECK(t.id("x") == kFirstContent + 1);
  CHECK(t.id("z") == kFirstContent + 2);
}

TEST_CASE("encode/decode round trip and OOV handling") {
  const Vocab v = build_vocab(tiny_corpus(), 1);
  const std::vector<std::string> seq{"<SOT>", "a", "b", "<EOT>"};
  CHECK(v.decode(v.encode(seq)) == seq);
  CHECK(v.encode(std::vector<std::string>{"never-seen"}) == std::vector<TokenId>{kUnk});
  CHECK_THROWS(v.decode(std::vector<TokenId>{static_cast<TokenId>(v.size())}));
  for (TokenId id : v.encode(seq)) {
    CHECK(id != kPad);
    CHECK(id != kBos);
    CHECK(id != kEos);
  }
}

TEST_CASE("save/load keeps ids") {
  corpus::SynthConfig cfg;
  cfg.n_docs = 10;
  const Vocab v = build_vocab(corpus::synth_generate(cfg), 1, {"<ROLE_1>", ";"});
  const auto path = (std::filesystem::temp_directory_path() / "tempgen_vocab_test.txt").string();
  v.save(path);
  CHECK(Vocab::load(path) == v);
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == std::string(kPadToken));
  std::filesystem::remove(path);
}
