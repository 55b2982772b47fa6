#include "tempgen/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "tempgen/decoding.hpp"
#include "tempgen/error.hpp"
#include "tempgen/parallel.hpp"
#include "tempgen/report.hpp"
#include "tempgen/rng.hpp"

namespace tempgen::training {

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("train config: " + msg);
  };
  need(lr >= 0.0 && std::isfinite(lr), "lr must be non-negative");
  need(weight_decay >= 0.0, "weight_decay must be non-negative");
  need(batch_size >= 1, "batch_size must be positive");
  need(epochs >= 0, "epochs must be non-negative");
  need(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must be in [0, 1)");
  need(adam_eps > 0.0, "adam_eps must be positive");
  need(checkpoint_every >= 0, "checkpoint_every must be non-negative");
}

std::optional<Example> truncate_or_skip(const std::string& doc_id, std::vector<int> src,
                                        const std::vector<int>& target, int max_src_len, int max_tgt_len,
                                        EncodeCounters& counters) {
  if (static_cast<int>(target.size()) + 1 > max_tgt_len) {
    ++counters.skipped;
    return std::nullopt;
  }
  if (static_cast<int>(src.size()) > max_src_len) {
    src.resize(static_cast<std::size_t>(max_src_len));
    ++counters.truncated;
  }
  Example ex;
  ex.doc_id = doc_id;
  ex.src = std::move(src);
  ex.tgt_in.push_back(tokenizer::kBos);
  ex.tgt_in.insert(ex.tgt_in.end(), target.begin(), target.end());
  ex.targets = target;
  ex.targets.push_back(tokenizer::kEos);
  return ex;
}

std::vector<Example> make_examples(const corpus::Dataset& data, const tokenizer::Vocab& vocab,
                                   const codec::CodecConfig& codec, const model::ModelConfig& cfg,
                                   EncodeCounters& counters) {
  std::vector<Example> out;
  for (const auto& doc : data.docs) {
    const auto seq = codec::encode_targets(doc, doc.templates, data.task, codec);
    auto ex = truncate_or_skip(doc.doc_id, vocab.encode(doc.tokens), vocab.encode(seq), cfg.max_src_len,
                               cfg.max_tgt_len, counters);
    if (ex) out.push_back(std::move(*ex));
  }
  return out;
}

namespace {

struct ExampleGrad {
  double loss = 0.0;
  long clamped = 0;
  model::Params<float> grads;
};

ExampleGrad example_gradients(const model::Params<float>& params, const model::ModelConfig& cfg,
                              const copy::CopyConfig& copy, std::span<const int> heads, const Example& ex,
                              double dropout, std::uint64_t seed) {
  autograd::Graph<float> g(true);
  auto bound = model::bind(g, params, true);
  auto trace = model::forward(g, bound, cfg, ex.src, ex.tgt_in, model::ForwardOptions{dropout, seed});
  auto out = copy::copy_loss(g, trace, ex.src, ex.targets, copy, heads, cfg.vocab_size);
  ExampleGrad r;
  r.loss = static_cast<double>(g.scalar(out.loss));
  r.clamped = out.clamped;
  if (!std::isfinite(r.loss)) return r;
  g.backward(out.loss);
  model::collect_gradients(g, bound, r.grads);
  return r;
}

}  // namespace

BatchResult batch_gradients(const model::Params<float>& params, const model::ModelConfig& cfg,
                            const copy::CopyConfig& copy, const std::vector<const Example*>& batch, double dropout,
                            std::uint64_t dropout_seed) {
  const auto heads = copy::copy_heads(params, cfg, copy);
  std::vector<ExampleGrad> per(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    per[i] = example_gradients(params, cfg, copy, heads, *batch[i], dropout, mix_seed(dropout_seed, i));
  });
  BatchResult r;
  const float inv = 1.0f / static_cast<float>(batch.size());
  for (auto& e : per) {
    r.loss += e.loss;
    r.clamped += e.clamped;
    for (auto& [name, gm] : e.grads) {
      auto it = r.grads.find(name);
      if (it == r.grads.end())
        r.grads.emplace(name, gm * inv);
      else
        it->second += gm * inv;
    }
  }
  r.loss /= static_cast<double>(batch.size());
  return r;
}

double example_loss(const model::Params<float>& params, const model::ModelConfig& cfg, const copy::CopyConfig& copy,
                    const Example& ex) {
  autograd::Graph<float> g(false);
  auto bound = model::bind(g, params, false);
  auto trace = model::forward(g, bound, cfg, ex.src, ex.tgt_in);
  const auto heads = copy::copy_heads(params, cfg, copy);
  return static_cast<double>(g.scalar(copy::copy_loss(g, trace, ex.src, ex.targets, copy, heads, cfg.vocab_size).loss));
}

void AdamW::step(model::Params<float>& params, const model::Params<float>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    auto& m = m_.try_emplace(name, Mat<float>::Zero(p.rows(), p.cols())).first->second;
    auto& v = v_.try_emplace(name, Mat<float>::Zero(p.rows(), p.cols())).first->second;
    if (git != grads.end()) {
      m = static_cast<float>(b1_) * m + static_cast<float>(1.0 - b1_) * git->second;
      v = static_cast<float>(b2_) * v + static_cast<float>(1.0 - b2_) * git->second.cwiseAbs2();
    } else {
      m *= static_cast<float>(b1_);
      v *= static_cast<float>(b2_);
    }
    const auto lr = static_cast<float>(lr_);
    const auto step_m = static_cast<float>(1.0 / bc1);
    const auto step_v = static_cast<float>(1.0 / bc2);
    const auto eps = static_cast<float>(eps_);
    const auto wd = static_cast<float>(wd_);
    p.array() -= lr * ((m.array() * step_m) / ((v.array() * step_v).sqrt() + eps) + wd * p.array());
  }
}

double clip_grad_norm(model::Params<float>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += g.cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto s = static_cast<float>(max_norm / norm);
    for (auto& [name, g] : grads) g *= s;
  }
  return norm;
}

nlohmann::ordered_json to_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["dev_metric"] = r.dev_metric ? nlohmann::ordered_json(*r.dev_metric) : nlohmann::ordered_json(nullptr);
  j["skipped"] = r.skipped;
  j["truncated"] = r.truncated;
  j["wallclock_s"] = r.wallclock_s;
  return j;
}

double dev_metric(const model::Params<float>& params, const model::ModelConfig& cfg, const copy::CopyConfig& copy,
                  const tokenizer::Vocab& vocab, const corpus::Dataset& dev, const codec::CodecConfig& codec) {
  decoding::DecodeOptions opt;
  opt.beam = 1;
  opt.max_out_len = cfg.max_tgt_len;
  const auto preds = decoding::generate_all(params, cfg, copy, vocab, dev.docs, opt);
  return eval::evaluate(dev, preds, codec).micro.f1;
}

TrainResult train(const corpus::Dataset& train_set, const corpus::Dataset& dev_set, const tokenizer::Vocab& vocab,
                  const model::ModelConfig& cfg, const TrainConfig& tc, const TrainIO& io,
                  const model::Params<float>* initial) {
  cfg.validate();
  tc.validate();
  tc.copy.validate(cfg.n_heads);
  if (static_cast<int>(vocab.size()) != cfg.vocab_size)
    throw ConfigError("vocab size " + std::to_string(vocab.size()) + " != model vocab_size " +
                      std::to_string(cfg.vocab_size));

  EncodeCounters counters;
  codec::CodecConfig target_codec = tc.codec;
  if (tc.sample_mentions) target_codec.mention_policy = codec::MentionPolicy::seeded(tc.seed);
  const auto examples = make_examples(train_set, vocab, target_codec, cfg, counters);
  if (examples.empty()) throw DataError("no trainable examples (all skipped or empty dataset)");

  TrainResult res;
  res.params = initial ? *initial : model::init(cfg, tc.seed);
  res.best_params = res.params;
  AdamW opt(tc.lr, tc.weight_decay, tc.beta1, tc.beta2, tc.adam_eps);

  std::ofstream metrics;
  auto path = [&](const std::string& name) { return (std::filesystem::path(io.out_dir) / name).string(); };
  const nlohmann::json meta{{"seed", tc.seed},
                            {"copy", {{"mode", copy::to_string(tc.copy.mode)}, {"k", tc.copy.k}}}};
  if (!io.out_dir.empty()) {
    std::filesystem::create_directories(io.out_dir);
    metrics.open(path("metrics.jsonl"), std::ios::trunc);
    if (!metrics) throw RuntimeFailure("cannot write " + path("metrics.jsonl"));
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step_index = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    Rng rng(mix_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
    shuffle(order, rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(tc.batch_size)) {
      std::vector<const Example*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + static_cast<std::size_t>(tc.batch_size)); ++i)
        batch.push_back(&examples[order[i]]);
      BatchResult br = batch_gradients(res.params, cfg, tc.copy, batch, cfg.dropout,
                                       mix_seed(tc.seed ^ 0xd1b54a32d192ed03ULL, step_index++));
      if (!std::isfinite(br.loss)) {
        if (!io.out_dir.empty()) model::save_checkpoint(path("last.ckpt"), cfg, res.params, meta);
        throw RuntimeFailure("non-finite training loss at epoch " + std::to_string(epoch) +
                             "; last good parameters kept");
      }
      res.clamped += br.clamped;
      loss_sum += br.loss * static_cast<double>(batch.size());
      seen += batch.size();
      clip_grad_norm(br.grads, tc.clip_norm);
      opt.step(res.params, br.grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.skipped = counters.skipped;
    rec.truncated = counters.truncated;
    if (tc.dev_eval && !dev_set.empty())
      rec.dev_metric = dev_metric(res.params, cfg, tc.copy, vocab, dev_set, tc.codec);
    rec.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool better = !rec.dev_metric || !res.best_dev || *rec.dev_metric > *res.best_dev;
    if (better) {
      res.best_params = res.params;
      res.best_epoch = epoch;
      res.best_dev = rec.dev_metric;
      if (!io.out_dir.empty()) model::save_checkpoint(path("best.ckpt"), cfg, res.params, meta);
    }
    if (!io.out_dir.empty()) {
      metrics << to_json(rec).dump() << '\n' << std::flush;
      model::save_checkpoint(path("last.ckpt"), cfg, res.params, meta);
      if (tc.checkpoint_every > 0 && epoch % tc.checkpoint_every == 0)
        model::save_checkpoint(path("epoch-" + std::to_string(epoch) + ".ckpt"), cfg, res.params, meta);
    }
    res.history.push_back(rec);
    if (io.on_epoch) io.on_epoch(rec);
  }
  if (tc.epochs == 0 && !io.out_dir.empty()) {
    model::save_checkpoint(path("best.ckpt"), cfg, res.params, meta);
    model::save_checkpoint(path("last.ckpt"), cfg, res.params, meta);
  }
  return res;
}

}  // namespace tempgen::training
