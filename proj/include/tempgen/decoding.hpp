#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tempgen/corpus.hpp"
#include "tempgen/model.hpp"
#include "tempgen/tokenizer.hpp"
#include "tempgen/topk_copy.hpp"

namespace tempgen::decoding {

// Anything that can start a hypothesis, report next-token log-probabilities
// for it, and extend it by one token.
template <typename M>
concept StepModel = requires(const M& m, typename M::State& s, int token) {
  { m.start() } -> std::same_as<typename M::State>;
  { m.log_probs(s) } -> std::convertible_to<std::span<const double>>;
  m.advance(s, token);
  { m.eos() } -> std::convertible_to<int>;
};

struct Hypothesis {
  std::vector<int> tokens;  // without EOS
  double logprob = 0.0;     // cumulative, including the EOS step when finished
  bool finished = false;
};

inline int argmax(std::span<const double> lp) {
  int best = 0;
  for (std::size_t i = 1; i < lp.size(); ++i)
    if (lp[i] > lp[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// Argmax at every step, ties to the lower id; at most max_out_len steps.
template <StepModel M>
Hypothesis greedy(const M& model, int max_out_len) {
  Hypothesis h;
  auto state = model.start();
  for (int t = 0; t < max_out_len; ++t) {
    std::span<const double> lp = model.log_probs(state);
    const int tok = argmax(lp);
    h.logprob += lp[static_cast<std::size_t>(tok)];
    if (tok == model.eos()) {
      h.finished = true;
      return h;
    }
    h.tokens.push_back(tok);
    if (t + 1 < max_out_len) model.advance(state, tok);
  }
  return h;
}

struct BeamOptions {
  int width = 4;
  int max_out_len = 256;
  double length_penalty = 0.0;  // finished score = logprob / length^alpha
};

inline double beam_score(const Hypothesis& h, double alpha) {
  if (alpha == 0.0) return h.logprob;
  const double len = static_cast<double>(h.tokens.size() + (h.finished ? 1 : 0));
  return h.logprob / std::pow(std::max(1.0, len), alpha);
}

template <StepModel M>
Hypothesis beam_search(const M& model, const BeamOptions& opt) {
  using State = typename M::State;
  struct Live {
    Hypothesis hyp;
    State state;
  };
  struct Candidate {
    double logprob;
    int parent;
    int token;
  };
  const int width = std::max(1, opt.width);
  std::vector<Live> beam;
  beam.push_back({Hypothesis{}, model.start()});
  std::vector<Hypothesis> finished;

  for (int t = 0; t < opt.max_out_len && !beam.empty(); ++t) {
    std::vector<Candidate> cands;
    for (int b = 0; b < static_cast<int>(beam.size()); ++b) {
      std::span<const double> lp = model.log_probs(beam[static_cast<std::size_t>(b)].state);
      // the best `width` tokens of each hypothesis suffice
      std::vector<int> ids(lp.size());
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
      const auto keep = std::min<std::size_t>(static_cast<std::size_t>(width), ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(), [&](int a, int c) {
        return lp[static_cast<std::size_t>(a)] > lp[static_cast<std::size_t>(c)] ||
               (lp[static_cast<std::size_t>(a)] == lp[static_cast<std::size_t>(c)] && a < c);
      });
      for (std::size_t i = 0; i < keep; ++i)
        cands.push_back({beam[static_cast<std::size_t>(b)].hyp.logprob + lp[static_cast<std::size_t>(ids[i])], b, ids[i]});
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& c) { return a.logprob > c.logprob; });

    std::vector<Live> next;
    for (const Candidate& c : cands) {
      if (static_cast<int>(next.size()) >= width) break;
      const Live& parent = beam[static_cast<std::size_t>(c.parent)];
      if (c.token == model.eos()) {
        Hypothesis h = parent.hyp;
        h.logprob = c.logprob;
        h.finished = true;
        finished.push_back(std::move(h));
        if (static_cast<int>(finished.size()) >= width) break;
        continue;
      }
      Live child{parent.hyp, parent.state};
      child.hyp.tokens.push_back(c.token);
      child.hyp.logprob = c.logprob;
      if (t + 1 < opt.max_out_len) model.advance(child.state, c.token);
      next.push_back(std::move(child));
    }
    beam = std::move(next);
    if (static_cast<int>(finished.size()) >= width) break;
    if (opt.length_penalty == 0.0 && !finished.empty() && !beam.empty()) {
      // scores only fall from here on
      double best_fin = -std::numeric_limits<double>::infinity();
      for (const auto& f : finished) best_fin = std::max(best_fin, f.logprob);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& l : beam) best_live = std::max(best_live, l.hyp.logprob);
      if (best_fin >= best_live) break;
    }
  }

  const std::vector<Hypothesis>* pool = &finished;
  std::vector<Hypothesis> unfinished;
  if (finished.empty()) {
    for (auto& l : beam) unfinished.push_back(std::move(l.hyp));
    pool = &unfinished;
  }
  if (pool->empty()) return Hypothesis{};
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool->size(); ++i)
    if (beam_score((*pool)[i], opt.length_penalty) > beam_score((*pool)[best], opt.length_penalty)) best = i;
  return (*pool)[best];
}

// The trained model with its copy head, bound to one source document.
class CopyModel {
 public:
  struct State {
    model::DecoderState dec;
    std::vector<double> log_probs;
  };

  CopyModel(const model::Params<float>& params, const model::ModelConfig& cfg, const copy::CopyConfig& copy,
            std::span<const int> src);

  State start() const;
  std::span<const double> log_probs(const State& s) const { return s.log_probs; }
  void advance(State& s, int token) const;
  int eos() const { return tokenizer::kEos; }

  const std::vector<int>& heads() const { return heads_; }

 private:
  void refresh(State& s) const;

  const model::Params<float>& params_;
  const model::ModelConfig& cfg_;
  copy::CopyConfig copy_;
  std::vector<int> heads_;
  model::EncodedSource enc_;
};

// Truncates the source to max_src_len when needed.
std::vector<int> source_ids(const corpus::Document& doc, const tokenizer::Vocab& vocab, int max_src_len);

struct DecodeOptions {
  int beam = 4;  // 1 means greedy
  int max_out_len = 256;
  double length_penalty = 0.0;
};

int default_max_out_len(corpus::TaskKind task);

struct Prediction {
  std::string doc_id;
  std::vector<std::string> output_tokens;
  double logprob = 0.0;
};

Prediction generate(const model::Params<float>& params, const model::ModelConfig& cfg, const copy::CopyConfig& copy,
                    const tokenizer::Vocab& vocab, const corpus::Document& doc, const DecodeOptions& opt);

// Documents are decoded in parallel (TEMPGEN_THREADS workers); output order
// follows the input.
std::vector<Prediction> generate_all(const model::Params<float>& params, const model::ModelConfig& cfg,
                                     const copy::CopyConfig& copy, const tokenizer::Vocab& vocab,
                                     const std::vector<corpus::Document>& docs, const DecodeOptions& opt);

// JSON Lines {doc_id, output_tokens, logprob}.
void write_predictions(std::ostream& out, const std::vector<Prediction>& preds);
void save_predictions(const std::string& path, const std::vector<Prediction>& preds);
std::vector<Prediction> load_predictions(const std::string& path);

// Independent recomputation of log P(tokens [+ EOS]) by a teacher-forced
// forward pass.
double sequence_logprob(const model::Params<float>& params, const model::ModelConfig& cfg,
                        const copy::CopyConfig& copy, std::span<const int> src, std::span<const int> tokens,
                        bool with_eos);

}  // namespace tempgen::decoding
