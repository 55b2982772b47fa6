#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tempgen/autograd.hpp"
#include "tempgen/error.hpp"
#include "tempgen/model.hpp"
#include "tempgen/tensor.hpp"

namespace tempgen::copy {

struct CopyConfig {
  enum class Mode { TopK, Naive, Off };
  Mode mode = Mode::TopK;
  int k = 0;  // TopK only

  static CopyConfig topk(int k) { return {Mode::TopK, k}; }
  static CopyConfig naive() { return {Mode::Naive, 0}; }
  static CopyConfig off() { return {Mode::Off, 0}; }

  bool enabled() const { return mode != Mode::Off; }
  void validate(int heads) const;  // throws ConfigError

  bool operator==(const CopyConfig&) const = default;
};

std::string to_string(CopyConfig::Mode mode);
CopyConfig::Mode parse_mode(const std::string& name);  // "topk", "naive", "off"

// 10 for 12 heads, otherwise heads - 2 (at least 1).
int default_k(int heads);

inline constexpr double kProbFloor = 1e-12;

// score_i = sum of |W^O| over row block i (d_v rows per head).
std::vector<double> head_scores(const Mat<float>& wo, int heads);
std::vector<double> head_scores(const Mat<double>& wo, int heads);

// The k highest scores; ties go to the lower head index. Result ascending.
std::vector<int> select_topk(std::span<const double> scores, int k);

// Heads averaged into P_copy for this config: the top-k set, or every head
// for Naive. Empty for Off.
template <typename T>
std::vector<int> copy_heads(const model::Params<T>& params, const model::ModelConfig& cfg, const CopyConfig& copy);

// `head_index<TAB>score<TAB>selected` lines in head order.
void write_head_report(std::ostream& out, std::span<const double> scores, std::span<const int> selected);

// ---- plain functions over one or more steps --------------------------------

// alpha: stacked (heads * steps) x n cross-attention probabilities.
template <typename T>
Mat<T> copy_distribution(const Mat<T>& alpha, int heads, std::span<const int> selected);

template <typename T>
Mat<T> scatter_to_vocab(const Mat<T>& p_copy, std::span<const int> src_ids, Eigen::Index vocab) {
  return kernels::scatter_columns<T>(p_copy, src_ids, vocab);
}

template <typename T>
T generation_prob(const RowVec<T>& enc_mean, const RowVec<T>& state) {
  if (enc_mean.size() != state.size()) throw DataError("generation_prob: dimension mismatch");
  return kernels::sigmoid<T>(enc_mean.dot(state));
}

template <typename T>
Mat<T> final_distribution(const Mat<T>& p_vocab, const Mat<T>& p_copy_vocab, const Mat<T>& p_gen) {
  return kernels::mixture<T>(p_gen, p_vocab, p_copy_vocab);
}

// Mean over targets >= 0 of -log max(P[t, y_t], floor); clamps are counted.
template <typename T>
double nll_loss(const Mat<T>& p_final, std::span<const int> targets, long* clamped = nullptr);

// ---- graph level -------------------------------------------------------------

struct LossOutput {
  autograd::Var loss;
  autograd::Var p_final;  // invalid in Off mode
  long clamped = 0;
};

// Teacher-forced loss on a trace. Off: cross entropy over the logits.
// Otherwise NLL of p_gen * P_vocab + (1 - p_gen) * scattered P_copy with
// P_copy averaged over `heads`.
template <typename T>
LossOutput copy_loss(autograd::Graph<T>& g, const model::Trace<T>& trace, std::span<const int> src_ids,
                     std::span<const int> targets, const CopyConfig& copy, std::span<const int> heads,
                     Eigen::Index vocab);

// Final distribution for one decoding step from an incremental state.
RowVec<float> step_distribution(const model::EncodedSource& enc, const model::DecoderState& state,
                                const CopyConfig& copy, std::span<const int> heads, int heads_total);

}  // namespace tempgen::copy
