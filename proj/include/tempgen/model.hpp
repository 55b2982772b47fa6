#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tempgen/autograd.hpp"
#include "tempgen/tensor.hpp"

namespace tempgen::model {

struct ModelConfig {
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int d_model = 64;
  int n_heads = 8;
  int d_ff = 256;
  int max_src_len = 512;
  int max_tgt_len = 256;
  int vocab_size = 0;
  double dropout = 0.1;

  int d_head() const { return d_model / n_heads; }
  void validate() const;  // throws ConfigError

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);  // missing keys keep defaults

template <typename T>
using Params = std::map<std::string, Mat<T>>;

template <typename U, typename T>
Params<U> cast(const Params<T>& p) {
  Params<U> out;
  for (const auto& [name, m] : p) out.emplace(name, m.template cast<U>());
  return out;
}

struct ParamSpec {
  enum class Init { Xavier, Zero, One, Embedding };
  std::string name;
  int rows = 0;
  int cols = 0;
  Init init = Init::Xavier;
};

// Every parameter in a fixed construction order.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

// Xavier-uniform weights, zero biases, unit layer-norm gains; token
// embeddings uniform with variance 1/d_model.
Params<float> init(const ModelConfig& cfg, std::uint64_t seed);

// Name of the last decoder layer's cross-attention output projection.
std::string copy_wo_name(const ModelConfig& cfg);

// Checkpoint container: "TGCK", u32 version, u32 header length, JSON header
// {"model": cfg, "meta": ...}, u32 array count, then per array
// (u32 name length, name, u32 rank, u32 dims..., little-endian f32 data).
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const Params<float>& params,
                     const nlohmann::json& meta = nlohmann::json::object());

struct Checkpoint {
  ModelConfig config;
  Params<float> params;
  nlohmann::json meta;
};

Checkpoint load_checkpoint(const std::string& path);

// ---- graph forward -------------------------------------------------------

using autograd::Graph;
using autograd::Var;

template <typename T>
using Bound = std::map<std::string, Var>;

template <typename T>
Bound<T> bind(Graph<T>& g, const Params<T>& params, bool requires_grad);

struct ForwardOptions {
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

template <typename T>
struct Trace {
  Var enc_out;      // n x d, after the final encoder norm
  Var dec_out;      // steps x d, after the final decoder norm
  Var logits;       // steps x V
  Var cross_probs;  // (heads * steps) x n, last decoder layer, pre-dropout
  std::vector<char> src_valid;
};

// Teacher-forced pass. Source tokens equal to the pad id are masked as keys
// everywhere. tgt_in is the decoder input (BOS followed by the target prefix).
template <typename T>
Trace<T> forward(Graph<T>& g, const Bound<T>& p, const ModelConfig& cfg, std::span<const int> src,
                 std::span<const int> tgt_in, const ForwardOptions& opt = {});

template <typename T>
Var encode(Graph<T>& g, const Bound<T>& p, const ModelConfig& cfg, std::span<const int> src,
           std::span<const char> src_valid, const ForwardOptions& opt = {});

std::vector<char> source_mask(std::span<const int> src);

// Plain softmax of the trace logits.
template <typename T>
Mat<T> vocab_probs(const Graph<T>& g, const Trace<T>& trace);

// ---- incremental decoding ------------------------------------------------

// Per-hypothesis decoder state. Copyable, so beams can fork it.
struct DecoderState {
  std::vector<Mat<float>> self_k, self_v;  // rows = processed positions
  int position = 0;
  RowVec<float> dec_out;      // final-norm state of the last processed position
  RowVec<float> logits;       // 1 x V
  Mat<float> cross_probs;     // heads x n for the last position
};

// Encoder output and cross-attention keys/values shared by every hypothesis
// of one source.
struct EncodedSource {
  std::vector<int> src;
  std::vector<char> src_valid;
  Mat<float> enc_out;
  RowVec<float> enc_mean;
  std::vector<Mat<float>> cross_k, cross_v;
};

EncodedSource encode_source(const Params<float>& params, const ModelConfig& cfg, std::span<const int> src);

DecoderState initial_state(const ModelConfig& cfg);

// Feeds one token at state.position and refreshes the state's outputs.
void step(const Params<float>& params, const ModelConfig& cfg, const EncodedSource& enc, DecoderState& state,
          int token);

// ---- gradients -----------------------------------------------------------

// Adds the graph gradients of every bound parameter into `grads` (creating
// zero entries as needed). Throws RuntimeFailure naming the parameter on a
// non-finite gradient.
template <typename T>
void collect_gradients(const Graph<T>& g, const Bound<T>& bound, Params<T>& grads);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int coordinates = 0;
};

// fn returns the loss and, when grads is non-null, fills analytic gradients.
using LossFn = std::function<double(const Params<double>&, Params<double>* grads)>;

// Central differences on `samples` coordinates drawn round-robin over the
// parameters (random coordinate inside each). Relative error is
// |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const Params<double>& params, const LossFn& fn, double eps, int samples,
                           std::uint64_t seed);

}  // namespace tempgen::model
