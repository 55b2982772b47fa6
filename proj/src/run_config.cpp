#include "tempgen/run_config.hpp"

#include <fstream>
#include <set>

#include "tempgen/error.hpp"

namespace tempgen::run {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ordered_json range_json(const corpus::IntRange& r) { return ordered_json::array({r.lo, r.hi}); }

void read_range(const json& j, const char* key, corpus::IntRange& out) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::vector<int>>();
  if (v.size() != 2) throw ConfigError(std::string("synth.") + key + ": expected [lo, hi]");
  out = {v[0], v[1]};
}

std::string style_name(codec::SlotNameStyle s) { return s == codec::SlotNameStyle::Numeric ? "numeric" : "semantic"; }
std::string layout_name(codec::SlotLayout l) { return l == codec::SlotLayout::MergedPerRole ? "merged" : "per-entity"; }

codec::SlotNameStyle parse_style(const std::string& s) {
  if (s == "semantic") return codec::SlotNameStyle::Semantic;
  if (s == "numeric") return codec::SlotNameStyle::Numeric;
  throw ConfigError("unknown slot-name style '" + s + "' (expected semantic or numeric)");
}

codec::SlotLayout parse_layout(const std::string& s) {
  if (s == "per-entity") return codec::SlotLayout::PerEntity;
  if (s == "merged") return codec::SlotLayout::MergedPerRole;
  throw ConfigError("unknown slot layout '" + s + "' (expected per-entity or merged)");
}

copy::CopyConfig copy_from_json(const json& j) {
  check_keys(j, "copy", {"mode", "k"});
  copy::CopyConfig c;
  if (j.contains("mode")) c.mode = copy::parse_mode(j.at("mode").get<std::string>());
  read(j, "k", c.k);
  return c;
}

codec::CodecConfig codec_from_json(const json& j) {
  check_keys(j, "codec", {"slot_names", "slot_layout", "mention_policy", "mention_seed", "role_order",
                          "merged_separator", "strict"});
  codec::CodecConfig c;
  if (j.contains("slot_names")) c.slot_name_style = parse_style(j.at("slot_names").get<std::string>());
  if (j.contains("slot_layout")) c.slot_layout = parse_layout(j.at("slot_layout").get<std::string>());
  if (j.contains("mention_policy")) {
    const auto p = j.at("mention_policy").get<std::string>();
    if (p == "first")
      c.mention_policy = codec::MentionPolicy::first();
    else if (p == "seeded")
      c.mention_policy = codec::MentionPolicy::seeded(0);
    else
      throw ConfigError("codec.mention_policy: expected first or seeded, got '" + p + "'");
  }
  read(j, "mention_seed", c.mention_policy.seed);
  read(j, "role_order", c.role_order);
  read(j, "merged_separator", c.merged_separator);
  read(j, "strict", c.strict);
  return c;
}

training::TrainConfig train_from_json(const json& j) {
  check_keys(j, "train", {"lr", "weight_decay", "batch_size", "epochs", "clip_norm", "beta1", "beta2",
                          "adam_eps", "copy", "codec", "sample_mentions", "checkpoint_every", "dev_eval"});
  training::TrainConfig c;
  read(j, "lr", c.lr);
  read(j, "weight_decay", c.weight_decay);
  read(j, "batch_size", c.batch_size);
  read(j, "epochs", c.epochs);
  read(j, "clip_norm", c.clip_norm);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "adam_eps", c.adam_eps);
  if (j.contains("copy")) c.copy = copy_from_json(j.at("copy"));
  if (j.contains("codec")) c.codec = codec_from_json(j.at("codec"));
  read(j, "sample_mentions", c.sample_mentions);
  read(j, "checkpoint_every", c.checkpoint_every);
  read(j, "dev_eval", c.dev_eval);
  return c;
}

corpus::SynthConfig synth_from_json(const json& j) {
  check_keys(j, "synth", {"n_docs", "doc_len", "slot_inventory", "entities_per_slot", "mention_repeat",
                          "mention_len", "distractor_ratio", "relation_count", "entity_vocab_size",
                          "filler_vocab_size", "typed_lexicon"});
  corpus::SynthConfig c;
  read(j, "n_docs", c.n_docs);
  read_range(j, "doc_len", c.doc_len);
  read(j, "slot_inventory", c.slot_inventory);
  read_range(j, "entities_per_slot", c.entities_per_slot);
  read_range(j, "mention_repeat", c.mention_repeat);
  read_range(j, "mention_len", c.mention_len);
  read(j, "distractor_ratio", c.distractor_ratio);
  read_range(j, "relation_count", c.relation_count);
  read(j, "entity_vocab_size", c.entity_vocab_size);
  read(j, "filler_vocab_size", c.filler_vocab_size);
  read(j, "typed_lexicon", c.typed_lexicon);
  return c;
}

}  // namespace

ordered_json to_json(const copy::CopyConfig& c) { return ordered_json{{"mode", copy::to_string(c.mode)}, {"k", c.k}}; }

ordered_json to_json(const codec::CodecConfig& c) {
  return ordered_json{
      {"slot_names", style_name(c.slot_name_style)},
      {"slot_layout", layout_name(c.slot_layout)},
      {"mention_policy", c.mention_policy.kind == codec::MentionPolicy::Kind::First ? "first" : "seeded"},
      {"mention_seed", c.mention_policy.seed},
      {"role_order", c.role_order},
      {"merged_separator", c.merged_separator},
      {"strict", c.strict}};
}

ordered_json to_json(const training::TrainConfig& c) {
  return ordered_json{{"lr", c.lr},
                      {"weight_decay", c.weight_decay},
                      {"batch_size", c.batch_size},
                      {"epochs", c.epochs},
                      {"clip_norm", c.clip_norm},
                      {"beta1", c.beta1},
                      {"beta2", c.beta2},
                      {"adam_eps", c.adam_eps},
                      {"copy", to_json(c.copy)},
                      {"codec", to_json(c.codec)},
                      {"sample_mentions", c.sample_mentions},
                      {"checkpoint_every", c.checkpoint_every},
                      {"dev_eval", c.dev_eval}};
}

ordered_json to_json(const corpus::SynthConfig& c) {
  return ordered_json{{"n_docs", c.n_docs},
                      {"doc_len", range_json(c.doc_len)},
                      {"slot_inventory", c.slot_inventory},
                      {"entities_per_slot", range_json(c.entities_per_slot)},
                      {"mention_repeat", range_json(c.mention_repeat)},
                      {"mention_len", range_json(c.mention_len)},
                      {"distractor_ratio", c.distractor_ratio},
                      {"relation_count", range_json(c.relation_count)},
                      {"entity_vocab_size", c.entity_vocab_size},
                      {"filler_vocab_size", c.filler_vocab_size},
                      {"typed_lexicon", c.typed_lexicon}};
}

ordered_json to_json(const RunConfig& c) {
  const json plain = model::to_json(c.model);
  ordered_json model;
  for (const auto& [k, v] : plain.items()) model[k] = v;
  return ordered_json{
      {"version", kConfigVersion},
      {"task", corpus::to_string(c.task)},
      {"seed", c.seed},
      {"paths",
       {{"dataset", c.paths.dataset},
        {"dev", c.paths.dev},
        {"vocab", c.paths.vocab},
        {"checkpoint", c.paths.checkpoint},
        {"predictions", c.paths.predictions},
        {"output", c.paths.output}}},
      {"model", model},
      {"train", to_json(c.train)},
      {"decode",
       {{"beam", c.decode.beam}, {"max_out_len", c.decode.max_out_len}, {"length_penalty", c.decode.length_penalty}}},
      {"synth", {{"config", to_json(c.synth.synth)}, {"split", c.synth.split}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    check_keys(j, "config", {"version", "task", "seed", "paths", "model", "train", "decode", "synth"});
    if (!j.contains("version")) throw ConfigError("config: missing 'version'");
    const int version = j.at("version").get<int>();
    if (version != kConfigVersion)
      throw ConfigError("config: unsupported version " + std::to_string(version) + " (expected " +
                        std::to_string(kConfigVersion) + ")");
    if (j.contains("task")) c.task = corpus::parse_task(j.at("task").get<std::string>());
    read(j, "seed", c.seed);
    if (j.contains("paths")) {
      const json& p = j.at("paths");
      check_keys(p, "paths", {"dataset", "dev", "vocab", "checkpoint", "predictions", "output"});
      read(p, "dataset", c.paths.dataset);
      read(p, "dev", c.paths.dev);
      read(p, "vocab", c.paths.vocab);
      read(p, "checkpoint", c.paths.checkpoint);
      read(p, "predictions", c.paths.predictions);
      read(p, "output", c.paths.output);
    }
    if (j.contains("model")) {
      check_keys(j.at("model"), "model",
                 {"n_enc_layers", "n_dec_layers", "d_model", "n_heads", "d_ff", "max_src_len", "max_tgt_len",
                  "vocab_size", "dropout"});
      c.model = model::model_config_from_json(j.at("model"));
    }
    if (j.contains("train")) c.train = train_from_json(j.at("train"));
    if (j.contains("decode")) {
      const json& d = j.at("decode");
      check_keys(d, "decode", {"beam", "max_out_len", "length_penalty"});
      read(d, "beam", c.decode.beam);
      read(d, "max_out_len", c.decode.max_out_len);
      read(d, "length_penalty", c.decode.length_penalty);
    }
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      check_keys(s, "synth", {"config", "split"});
      if (s.contains("config")) c.synth.synth = synth_from_json(s.at("config"));
      read(s, "split", c.synth.split);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.sync();
  return c;
}

void RunConfig::sync() {
  train.seed = seed;
  synth.synth.seed = seed;
  synth.synth.task = task;
}

decoding::DecodeOptions RunConfig::decode_options() const {
  decoding::DecodeOptions d = decode;
  if (d.max_out_len == 0) d.max_out_len = decoding::default_max_out_len(task);
  return d;
}

void RunConfig::validate() const {
  train.validate();
  if (decode.beam < 1) throw ConfigError("decode.beam must be >= 1");
  if (decode.max_out_len < 0) throw ConfigError("decode.max_out_len must be >= 0");
  if (!(decode.length_penalty >= 0.0)) throw ConfigError("decode.length_penalty must be >= 0");
  corpus::validate(synth.synth);
  for (double f : synth.split)
    if (!(f > 0.0)) throw ConfigError("synth.split: every fraction must be positive");
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << to_json(cfg).dump(2) << '\n';
}

}  // namespace tempgen::run
