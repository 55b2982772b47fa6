#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>

#include "support.hpp"
#include "tempgen/decoding.hpp"
#include "tempgen/rng.hpp"

using namespace tempgen;
using namespace tempgen::decoding;

namespace {

// Next-token distributions looked up by prefix; token 0 is EOS.
struct TableModel {
  using State = std::vector<int>;
  std::function<std::vector<double>(const State&)> probs;
  mutable std::map<State, std::vector<double>> cache;

  State start() const { return {}; }
  std::span<const double> log_probs(const State& s) const {
    auto it = cache.find(s);
    if (it == cache.end()) {
      std::vector<double> lp;
      for (double p : probs(s)) lp.push_back(std::log(p));
      it = cache.emplace(s, lp).first;
    }
    return it->second;
  }
  void advance(State& s, int token) const { s.push_back(token); }
  int eos() const { return 0; }
};

static_assert(StepModel<TableModel>);

TableModel random_model(std::uint64_t seed, int vocab) {
  TableModel m;
  m.probs = [seed, vocab](const std::vector<int>& prefix) {
    std::uint64_t h = seed;
    for (int t : prefix) h = h * 1000003u + static_cast<std::uint64_t>(t) + 1;
    Rng rng(h);
    std::vector<double> p(static_cast<std::size_t>(vocab));
    double z = 0.0;
    for (double& x : p) z += (x = 0.05 + uniform_real(rng));
    for (double& x : p) x /= z;
    return p;
  };
  return m;
}

// Best finished sequence of at most max_len tokens (plus EOS) by enumeration.
double best_logprob(const TableModel& m, int max_len) {
  double best = -std::numeric_limits<double>::infinity();
  std::function<void(std::vector<int>&, double)> rec = [&](std::vector<int>& prefix, double lp) {
    auto d = m.log_probs(prefix);
    best = std::max(best, lp + d[0]);
    if (static_cast<int>(prefix.size()) == max_len) return;
    for (std::size_t t = 1; t < d.size(); ++t) {
      prefix.push_back(static_cast<int>(t));
      rec(prefix, lp + d[t]);
      prefix.pop_back();
    }
  };
  std::vector<int> empty;
  rec(empty, 0.0);
  return best;
}

}  // namespace

TEST_CASE("beam search beats greedy on a toy where greedy is myopic") {
  TableModel m;
  m.probs = [](const std::vector<int>& p) -> std::vector<double> {
    if (p.empty()) return {1e-9, 0.6, 0.4 - 1e-9};
    if (p == std::vector<int>{1}) return {0.34, 0.33, 0.33};
    if (p == std::vector<int>{2}) return {0.9, 0.05, 0.05};
    return {1.0 - 2e-9, 1e-9, 1e-9};
  };
  const Hypothesis g = greedy(m, 3);
  CHECK(g.tokens == std::vector<int>{1});
  CHECK(g.logprob == doctest::Approx(std::log(0.6 * 0.34)));

  const Hypothesis b = beam_search(m, {2, 3, 0.0});
  CHECK(b.finished);
  CHECK(b.tokens == std::vector<int>{2});
  CHECK(b.logprob == doctest::Approx(best_logprob(m, 3)).epsilon(1e-12));
  CHECK(b.logprob > g.logprob);
}

TEST_CASE("width 1 beam equals greedy; wider beams stay under the enumerated optimum") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const TableModel m = random_model(seed, 4);
    const Hypothesis g = greedy(m, 5);
    const Hypothesis b1 = beam_search(m, {1, 5, 0.0});
    CHECK(b1.tokens == g.tokens);
    CHECK(b1.logprob == g.logprob);
    CHECK(b1.finished == g.finished);
    const Hypothesis b4 = beam_search(m, {4, 5, 0.0});
    if (b4.finished) CHECK(b4.logprob <= best_logprob(m, 5) + 1e-12);
  }
}

TEST_CASE("EOS first gives an empty output") {
  TableModel m;
  m.probs = [](const std::vector<int>&) { return std::vector<double>{1.0, 0.0, 0.0}; };
  CHECK(greedy(m, 10).tokens.empty());
  CHECK(greedy(m, 10).finished);
  CHECK(beam_search(m, {3, 10, 0.0}).tokens.empty());
}

TEST_CASE("max_out_len caps unfinished output") {
  TableModel m;
  m.probs = [](const std::vector<int>&) { return std::vector<double>{0.1, 0.9}; };
  const Hypothesis g = greedy(m, 4);
  CHECK(g.tokens.size() == 4);
  CHECK_FALSE(g.finished);
  CHECK(beam_search(m, {2, 4, 0.0}).tokens.size() <= 4);
}

namespace {

struct Setup {
  model::ModelConfig cfg;
  model::Params<float> params;
  tokenizer::Vocab vocab;
  corpus::Document doc;
};

Setup setup() {
  corpus::SynthConfig sc;
  sc.n_docs = 3;
  sc.doc_len = {30, 40};
  sc.entities_per_slot = {0, 1};
  sc.mention_repeat = {1, 1};
  sc.mention_len = {1, 1};
  sc.entity_vocab_size = 20;
  sc.filler_vocab_size = 30;
  const auto ds = corpus::synth_generate(sc);
  Setup s;
  s.vocab = tokenizer::build_vocab(ds, 1);
  s.cfg = testing::tiny_config();
  s.cfg.vocab_size = static_cast<int>(s.vocab.size());
  s.cfg.max_src_len = 64;
  s.cfg.max_tgt_len = 24;
  s.params = model::init(s.cfg, 6);
  s.doc = ds.docs[0];
  return s;
}

}  // namespace

TEST_CASE("copy model: beam 1 is greedy and log-probabilities are self-consistent") {
  const Setup s = setup();
  const auto src = source_ids(s.doc, s.vocab, s.cfg.max_src_len);
  for (const auto& copy : {copy::CopyConfig::topk(1), copy::CopyConfig::off()}) {
    const CopyModel m(s.params, s.cfg, copy, src);
    const Hypothesis g = greedy(m, 12);
    const Hypothesis b1 = beam_search(m, {1, 12, 0.0});
    CHECK(b1.tokens == g.tokens);
    CHECK(b1.logprob == g.logprob);

    const Hypothesis b = beam_search(m, {4, 12, 0.0});
    const double re = sequence_logprob(s.params, s.cfg, copy, src, b.tokens, b.finished);
    CHECK(std::abs(re - b.logprob) <= 1e-3 * std::max(1.0, std::abs(re)));
  }
}

TEST_CASE("generate, source truncation and prediction files") {
  const Setup s = setup();
  CHECK(source_ids(s.doc, s.vocab, 5).size() == 5);
  CHECK(default_max_out_len(corpus::TaskKind::REE) > 0);

  const DecodeOptions opt{2, 10, 0.0};
  const auto preds = generate_all(s.params, s.cfg, copy::CopyConfig::topk(1), s.vocab, {s.doc, s.doc}, opt);
  REQUIRE(preds.size() == 2);
  CHECK(preds[0].doc_id == s.doc.doc_id);
  CHECK(preds[0].output_tokens == preds[1].output_tokens);
  CHECK(preds[0].output_tokens.size() <= 10);
  const auto single = generate(s.params, s.cfg, copy::CopyConfig::topk(1), s.vocab, s.doc, opt);
  CHECK(single.output_tokens == preds[0].output_tokens);
  CHECK(single.logprob == preds[0].logprob);

  const auto path = (std::filesystem::temp_directory_path() / "tempgen_preds_test.jsonl").string();
  save_predictions(path, preds);
  const auto back = load_predictions(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].output_tokens == preds[1].output_tokens);
  CHECK(back[1].logprob == preds[1].logprob);
  std::filesystem::remove(path);
}
