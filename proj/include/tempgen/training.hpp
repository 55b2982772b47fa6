#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempgen/corpus.hpp"
#include "tempgen/model.hpp"
#include "tempgen/template_codec.hpp"
#include "tempgen/tokenizer.hpp"
#include "tempgen/topk_copy.hpp"

namespace tempgen::training {

struct TrainConfig {
  double lr = 5e-5;
  double weight_decay = 1e-5;
  int batch_size = 1;
  int epochs = 30;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;  // <= 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  copy::CopyConfig copy = copy::CopyConfig::topk(6);
  codec::CodecConfig codec;
  // Training targets render each entity with a seeded random mention
  // instead of codec.mention_policy.
  bool sample_mentions = true;
  int checkpoint_every = 0;  // epochs; 0 keeps only best and last
  bool dev_eval = true;

  void validate() const;  // throws ConfigError
};

struct Example {
  std::string doc_id;
  std::vector<int> src;
  std::vector<int> tgt_in;   // BOS + target
  std::vector<int> targets;  // target + EOS
};

struct EncodeCounters {
  long skipped = 0;
  long truncated = 0;
};

// Truncates the source to max_src_len; skips (returns nullopt) when the
// target plus its EOS does not fit in max_tgt_len. Counters are bumped.
std::optional<Example> truncate_or_skip(const std::string& doc_id, std::vector<int> src,
                                        const std::vector<int>& target, int max_src_len, int max_tgt_len,
                                        EncodeCounters& counters);

std::vector<Example> make_examples(const corpus::Dataset& data, const tokenizer::Vocab& vocab,
                                   const codec::CodecConfig& codec, const model::ModelConfig& cfg,
                                   EncodeCounters& counters);

// Mean per-example loss and summed gradients (already divided by the batch
// size). Examples run in parallel; the reduction follows example order.
struct BatchResult {
  double loss = 0.0;
  long clamped = 0;
  model::Params<float> grads;
};

BatchResult batch_gradients(const model::Params<float>& params, const model::ModelConfig& cfg,
                            const copy::CopyConfig& copy, const std::vector<const Example*>& batch, double dropout,
                            std::uint64_t dropout_seed);

// Loss of one example with dropout off.
double example_loss(const model::Params<float>& params, const model::ModelConfig& cfg, const copy::CopyConfig& copy,
                    const Example& ex);

class AdamW {
 public:
  AdamW(double lr, double weight_decay, double beta1, double beta2, double eps)
      : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {}

  // p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
  void step(model::Params<float>& params, const model::Params<float>& grads);
  long steps() const { return t_; }

 private:
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
  model::Params<float> m_, v_;
};

// Scales grads so their global L2 norm is at most max_norm; returns the
// norm before scaling.
double clip_grad_norm(model::Params<float>& grads, double max_norm);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> dev_metric;
  long skipped = 0;
  long truncated = 0;
  double wallclock_s = 0.0;
};

nlohmann::ordered_json to_json(const EpochRecord& r);

struct TrainResult {
  model::Params<float> params;       // after the last epoch
  model::Params<float> best_params;  // best dev metric (last epoch without dev)
  int best_epoch = 0;
  std::optional<double> best_dev;
  std::vector<EpochRecord> history;
  long clamped = 0;
};

struct TrainIO {
  std::string out_dir;  // empty: nothing written
  std::function<void(const EpochRecord&)> on_epoch;
};

// AdamW on teacher-forced NLL. Writes metrics.jsonl, best.ckpt, last.ckpt
// (and epoch-N.ckpt when checkpoint_every > 0) into out_dir. A non-finite
// loss aborts with RuntimeFailure after writing the last good parameters.
TrainResult train(const corpus::Dataset& train_set, const corpus::Dataset& dev_set, const tokenizer::Vocab& vocab,
                  const model::ModelConfig& cfg, const TrainConfig& tc, const TrainIO& io = {},
                  const model::Params<float>* initial = nullptr);

// Greedy-decoded micro F1 (CEAF-REE or relation F1) on a dataset.
double dev_metric(const model::Params<float>& params, const model::ModelConfig& cfg, const copy::CopyConfig& copy,
                  const tokenizer::Vocab& vocab, const corpus::Dataset& dev, const codec::CodecConfig& codec);

}  // namespace tempgen::training
