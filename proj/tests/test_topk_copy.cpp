#include <doctest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "tempgen/topk_copy.hpp"

using namespace tempgen;
using namespace tempgen::copy;
using tempgen::testing::tiny_config;
using tempgen::testing::TinyExample;
using M = Mat<double>;

TEST_CASE("head_scores: absolute row-block sums") {
  M wo(4, 2);
  wo << 1, 1, 1, 1, 0, 0, 0, 0;
  CHECK(head_scores(wo, 2) == std::vector<double>{4.0, 0.0});
  M one(2, 2);
  one << 1, -1, -2, 0.5;
  CHECK(head_scores(one, 1) == std::vector<double>{4.5});
  CHECK(head_scores(M(M::Zero(6, 3)), 3) == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("select_topk: argmax, boundary and tie rule") {
  CHECK(select_topk(std::vector<double>{4, 0}, 1) == std::vector<int>{0});
  CHECK(select_topk(std::vector<double>{1, 3, 2}, 3) == std::vector<int>{0, 1, 2});
  CHECK(select_topk(std::vector<double>{2, 2, 1}, 1) == std::vector<int>{0});
  CHECK(select_topk(std::vector<double>{1, 5, 1, 5}, 3) == std::vector<int>{0, 1, 3});
  CHECK_THROWS_AS(CopyConfig::topk(0).validate(8), ConfigError);
  CHECK_THROWS_AS(CopyConfig::topk(9).validate(8), ConfigError);
  CHECK(default_k(12) == 10);
  CHECK(default_k(8) == 6);
  CHECK(default_k(1) == 1);
}

TEST_CASE("copy_distribution: head means") {
  M alpha(2, 2);
  alpha << 1, 0, 0, 1;
  const M both = copy_distribution<double>(alpha, 2, std::vector<int>{0, 1});
  CHECK(both(0, 0) == 0.5);
  CHECK(both(0, 1) == 0.5);
  M skew(2, 2);
  skew << 0.9, 0.1, 0.3, 0.7;
  const M single = copy_distribution<double>(skew, 2, std::vector<int>{0});
  CHECK(single(0, 0) == 0.9);
  CHECK(single(0, 1) == 0.1);
}

TEST_CASE("scatter: repeated ids pool their mass") {
  M p(1, 3);
  p << 0.2, 0.5, 0.3;
  const M v = scatter_to_vocab<double>(p, std::vector<int>{5, 9, 5}, 12);
  CHECK(v(0, 5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(v(0, 9) == 0.5);
  CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-15));
  const M id = scatter_to_vocab<double>(p, std::vector<int>{0, 1, 2}, 3);
  CHECK(id == p);
}

TEST_CASE("generation_prob and mixture") {
  RowVec<double> e(2), s(2);
  e << 0, 0;
  s << 5, -3;
  CHECK(generation_prob<double>(e, s) == 0.5);
  e << std::log(3.0), 0;
  s << 1, 7;
  CHECK(generation_prob<double>(e, s) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(generation_prob<double>(RowVec<double>::Zero(3), s), DataError);

  M pv(1, 2), pc(1, 2), pg(1, 1);
  pv << 0.8, 0.2;
  pc << 0.2, 0.8;
  pg << 0.25;
  const M f = final_distribution<double>(pv, pc, pg);
  CHECK(f(0, 0) == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(f(0, 1) == doctest::Approx(0.65).epsilon(1e-15));
  pg << 1.0;
  CHECK(final_distribution<double>(pv, pc, pg) == pv);
  pg << 0.5;
  CHECK(final_distribution<double>(pv, pv, pg) == pv);
}

TEST_CASE("nll_loss: hand cases and the floor") {
  M ones = M::Zero(3, 4);
  ones(0, 1) = ones(1, 2) = ones(2, 3) = 1.0;
  CHECK(nll_loss<double>(ones, std::vector<int>{1, 2, 3}) == 0.0);
  const M uniform = M::Constant(2, 7, 1.0 / 7);
  CHECK(nll_loss<double>(uniform, std::vector<int>{0, 6}) == doctest::Approx(std::log(7.0)));
  M two(2, 2);
  two << 0.5, 0.5, 0.75, 0.25;
  CHECK(nll_loss<double>(two, std::vector<int>{0, 1}) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-15));
  long clamped = 0;
  const double l = nll_loss<double>(ones, std::vector<int>{0, 2, 3}, &clamped);
  CHECK(clamped == 1);
  CHECK(l == doctest::Approx(-std::log(kProbFloor) / 3));
  // negative targets are padding
  CHECK(nll_loss<double>(two, std::vector<int>{0, -1}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("head report lines") {
  std::ostringstream out;
  write_head_report(out, std::vector<double>{1.5, 2.0}, std::vector<int>{1});
  CHECK(out.str() == "0\t1.5\t0\n1\t2\t1\n");
}

namespace {

struct Losses {
  double loss;
  M p_final;
};

Losses run(const model::Params<double>& params, const model::ModelConfig& cfg, const CopyConfig& copy) {
  const TinyExample ex;
  autograd::Graph<double> g(false);
  const auto bound = model::bind(g, params, false);
  const auto trace = model::forward(g, bound, cfg, ex.src, ex.tgt_in);
  const auto heads = copy_heads(params, cfg, copy);
  const auto out = copy_loss(g, trace, ex.src, ex.targets, copy, heads, cfg.vocab_size);
  Losses r{g.scalar(out.loss), {}};
  if (copy.enabled()) {
    r.p_final = g.value(out.p_final);
    CHECK(nll_loss<double>(r.p_final, ex.targets) == doctest::Approx(r.loss).epsilon(1e-12));
  }
  return r;
}

}  // namespace

TEST_CASE("TopK with k = h equals Naive bit for bit") {
  auto cfg = tiny_config();
  cfg.n_heads = 4;
  const auto params = model::cast<double>(model::init(cfg, 8));
  const auto a = run(params, cfg, CopyConfig::topk(4));
  const auto b = run(params, cfg, CopyConfig::naive());
  CHECK(a.loss == b.loss);
  CHECK(a.p_final == b.p_final);
}

TEST_CASE("Off equals plain cross entropy of the logits") {
  const auto cfg = tiny_config();
  const auto params = model::cast<double>(model::init(cfg, 8));
  const TinyExample ex;
  autograd::Graph<double> g(false);
  const auto trace = model::forward(g, model::bind(g, params, false), cfg, ex.src, ex.tgt_in);
  const M& logits = g.value(trace.logits);
  double expected = 0.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double mx = logits.row(t).maxCoeff();
    const double lse = mx + std::log((logits.row(t).array() - mx).exp().sum());
    expected += lse - logits(t, ex.targets[static_cast<std::size_t>(t)]);
  }
  expected /= static_cast<double>(logits.rows());
  CHECK(std::abs(run(params, cfg, CopyConfig::off()).loss - expected) <= 1e-7);
}

TEST_CASE("final distributions normalize") {
  const auto cfg = tiny_config();
  const auto params = model::cast<double>(model::init(cfg, 30));
  for (const auto& copy : {CopyConfig::topk(1), CopyConfig::naive()}) {
    const auto r = run(params, cfg, copy);
    for (Eigen::Index t = 0; t < r.p_final.rows(); ++t) CHECK(std::abs(r.p_final.row(t).sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("step_distribution matches the teacher-forced final distribution") {
  const auto cfg = tiny_config();
  const auto params = model::init(cfg, 12);
  const TinyExample ex;
  const auto copy = CopyConfig::topk(1);
  const auto heads = copy_heads(params, cfg, copy);
  autograd::Graph<float> g(false);
  const auto trace = model::forward(g, model::bind(g, params, false), cfg, ex.src, ex.tgt_in);
  const auto out = copy_loss(g, trace, ex.src, ex.targets, copy, heads, cfg.vocab_size);
  const Mat<float>& pf = g.value(out.p_final);

  const auto enc = model::encode_source(params, cfg, ex.src);
  auto st = model::initial_state(cfg);
  for (std::size_t t = 0; t < ex.tgt_in.size(); ++t) {
    model::step(params, cfg, enc, st, ex.tgt_in[t]);
    const RowVec<float> d = step_distribution(enc, st, copy, heads, cfg.n_heads);
    CHECK((d - pf.row(static_cast<Eigen::Index>(t))).cwiseAbs().maxCoeff() <= 1e-5f);
  }
}
