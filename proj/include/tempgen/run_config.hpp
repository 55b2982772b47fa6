#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "tempgen/corpus.hpp"
#include "tempgen/decoding.hpp"
#include "tempgen/model.hpp"
#include "tempgen/template_codec.hpp"
#include "tempgen/topk_copy.hpp"
#include "tempgen/training.hpp"

namespace tempgen::run {

inline constexpr int kConfigVersion = 1;

struct Paths {
  std::string dataset;  // input documents (train set for `train`)
  std::string dev;
  std::string vocab;
  std::string checkpoint;
  std::string predictions;
  std::string output;  // file or directory written by the command
};

struct SynthSection {
  corpus::SynthConfig synth;
  std::array<double, 3> split{0.8, 0.1, 0.1};
};

// Everything a command needs to rerun exactly. Serialized as JSON with a
// `version` field; unknown keys are rejected. The top-level seed and task
// are the only ones serialized; sync() copies them into the sections.
struct RunConfig {
  corpus::TaskKind task = corpus::TaskKind::REE;
  std::uint64_t seed = 1;
  Paths paths;
  model::ModelConfig model;
  training::TrainConfig train;
  decoding::DecodeOptions decode{4, 0, 0.0};  // max_out_len 0: task default
  SynthSection synth;

  void sync();
  decoding::DecodeOptions decode_options() const;

  // The copy and codec settings live inside `train` and are shared by
  // generation and evaluation.
  const copy::CopyConfig& copy() const { return train.copy; }
  const codec::CodecConfig& codec() const { return train.codec; }

  void validate() const;  // throws ConfigError
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);  // missing keys keep defaults

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

nlohmann::ordered_json to_json(const copy::CopyConfig& c);
nlohmann::ordered_json to_json(const codec::CodecConfig& c);
nlohmann::ordered_json to_json(const training::TrainConfig& c);
nlohmann::ordered_json to_json(const corpus::SynthConfig& c);

}  // namespace tempgen::run
