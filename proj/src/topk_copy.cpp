#include "tempgen/topk_copy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "tempgen/error.hpp"

namespace tempgen::copy {

void CopyConfig::validate(int heads) const {
  if (mode == Mode::TopK && (k < 1 || k > heads))
    throw ConfigError("copy k=" + std::to_string(k) + " outside [1, " + std::to_string(heads) + "]");
}

std::string to_string(CopyConfig::Mode mode) {
  switch (mode) {
    case CopyConfig::Mode::TopK: return "topk";
    case CopyConfig::Mode::Naive: return "naive";
    case CopyConfig::Mode::Off: return "off";
  }
  return "?";
}

CopyConfig::Mode parse_mode(const std::string& name) {
  if (name == "topk") return CopyConfig::Mode::TopK;
  if (name == "naive") return CopyConfig::Mode::Naive;
  if (name == "off") return CopyConfig::Mode::Off;
  throw ConfigError("unknown copy mode '" + name + "'");
}

int default_k(int heads) { return heads == 12 ? 10 : std::max(1, heads - 2); }

namespace {

template <typename T>
std::vector<double> scores_impl(const Mat<T>& wo, int heads) {
  if (heads < 1 || wo.rows() % heads != 0)
    throw DataError("head_scores: W^O rows " + std::to_string(wo.rows()) + " not divisible by " +
                    std::to_string(heads));
  const Eigen::Index dv = wo.rows() / heads;
  std::vector<double> s(static_cast<std::size_t>(heads), 0.0);
  for (int h = 0; h < heads; ++h) {
    double acc = 0.0;
    const auto block = wo.middleRows(h * dv, dv);
    for (Eigen::Index i = 0; i < block.rows(); ++i)
      for (Eigen::Index j = 0; j < block.cols(); ++j) acc += std::abs(static_cast<double>(block(i, j)));
    s[static_cast<std::size_t>(h)] = acc;
  }
  return s;
}

}  // namespace

std::vector<double> head_scores(const Mat<float>& wo, int heads) { return scores_impl(wo, heads); }
std::vector<double> head_scores(const Mat<double>& wo, int heads) { return scores_impl(wo, heads); }

std::vector<int> select_topk(std::span<const double> scores, int k) {
  const int h = static_cast<int>(scores.size());
  if (k < 1 || k > h) throw ConfigError("select_topk: k=" + std::to_string(k) + " outside [1, " + std::to_string(h) + "]");
  std::vector<int> order(static_cast<std::size_t>(h));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

template <typename T>
std::vector<int> copy_heads(const model::Params<T>& params, const model::ModelConfig& cfg, const CopyConfig& copy) {
  switch (copy.mode) {
    case CopyConfig::Mode::Off: return {};
    case CopyConfig::Mode::Naive: {
      std::vector<int> all(static_cast<std::size_t>(cfg.n_heads));
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    case CopyConfig::Mode::TopK: break;
  }
  copy.validate(cfg.n_heads);
  return select_topk(head_scores(params.at(model::copy_wo_name(cfg)), cfg.n_heads), copy.k);
}

template std::vector<int> copy_heads<float>(const model::Params<float>&, const model::ModelConfig&, const CopyConfig&);
template std::vector<int> copy_heads<double>(const model::Params<double>&, const model::ModelConfig&, const CopyConfig&);

void write_head_report(std::ostream& out, std::span<const double> scores, std::span<const int> selected) {
  for (std::size_t h = 0; h < scores.size(); ++h) {
    const bool sel = std::find(selected.begin(), selected.end(), static_cast<int>(h)) != selected.end();
    out << h << '\t' << scores[h] << '\t' << (sel ? 1 : 0) << '\n';
  }
}

template <typename T>
Mat<T> copy_distribution(const Mat<T>& alpha, int heads, std::span<const int> selected) {
  if (selected.empty()) throw ConfigError("copy_distribution: copy is disabled");
  if (heads < 1 || alpha.rows() % heads != 0) throw DataError("copy_distribution: bad alpha shape");
  for (int h : selected)
    if (h < 0 || h >= heads) throw DataError("copy_distribution: head index out of range");
  return kernels::head_mean<T>(alpha, heads, selected);
}

template Mat<float> copy_distribution<float>(const Mat<float>&, int, std::span<const int>);
template Mat<double> copy_distribution<double>(const Mat<double>&, int, std::span<const int>);

template <typename T>
double nll_loss(const Mat<T>& p_final, std::span<const int> targets, long* clamped) {
  double total = 0.0;
  long n = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (targets[t] < 0) continue;
    double p = static_cast<double>(p_final(static_cast<Eigen::Index>(t), targets[t]));
    if (!(p > kProbFloor)) {
      p = kProbFloor;
      if (clamped) ++*clamped;
    }
    total -= std::log(p);
    ++n;
  }
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

template double nll_loss<float>(const Mat<float>&, std::span<const int>, long*);
template double nll_loss<double>(const Mat<double>&, std::span<const int>, long*);

template <typename T>
LossOutput copy_loss(autograd::Graph<T>& g, const model::Trace<T>& trace, std::span<const int> src_ids,
                     std::span<const int> targets, const CopyConfig& copy, std::span<const int> heads,
                     Eigen::Index vocab) {
  LossOutput out;
  if (!copy.enabled()) {
    out.loss = g.cross_entropy(trace.logits, targets);
    return out;
  }
  const int h_total = static_cast<int>(g.value(trace.cross_probs).rows() / g.value(trace.logits).rows());
  autograd::Var p_copy = g.head_mean(trace.cross_probs, h_total, heads);
  autograd::Var p_copy_vocab = g.scatter_columns(p_copy, src_ids, vocab);
  autograd::Var p_vocab = g.softmax_rows(trace.logits);
  autograd::Var enc_mean = g.masked_row_mean(trace.enc_out, trace.src_valid);
  autograd::Var p_gen = g.generation_probs(trace.dec_out, enc_mean);
  out.p_final = g.mixture(p_gen, p_vocab, p_copy_vocab);
  out.loss = g.nll(out.p_final, targets, static_cast<T>(kProbFloor), &out.clamped);
  return out;
}

template LossOutput copy_loss<float>(autograd::Graph<float>&, const model::Trace<float>&, std::span<const int>,
                                     std::span<const int>, const CopyConfig&, std::span<const int>, Eigen::Index);
template LossOutput copy_loss<double>(autograd::Graph<double>&, const model::Trace<double>&, std::span<const int>,
                                      std::span<const int>, const CopyConfig&, std::span<const int>, Eigen::Index);

RowVec<float> step_distribution(const model::EncodedSource& enc, const model::DecoderState& state,
                                const CopyConfig& copy, std::span<const int> heads, int heads_total) {
  Mat<float> logits = state.logits;
  Mat<float> p_vocab = kernels::softmax_rows<float>(logits);
  if (!copy.enabled()) return p_vocab.row(0);
  Mat<float> p_copy = kernels::head_mean<float>(state.cross_probs, heads_total, heads);
  Mat<float> p_copy_vocab = kernels::scatter_columns<float>(p_copy, enc.src, p_vocab.cols());
  Mat<float> p_gen(1, 1);
  p_gen(0, 0) = kernels::sigmoid<float>(state.dec_out.dot(enc.enc_mean));
  return kernels::mixture<float>(p_gen, p_vocab, p_copy_vocab).row(0);
}

}  // namespace tempgen::copy
