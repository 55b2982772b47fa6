#include <doctest.h>

#include <filesystem>

#include "tempgen/error.hpp"
#include "tempgen/run_config.hpp"

using namespace tempgen;
using namespace tempgen::run;

TEST_CASE("run config round trips through JSON") {
  RunConfig c;
  c.task = corpus::TaskKind::BinaryRE;
  c.seed = 77;
  c.paths.dataset = "train.jsonl";
  c.model.d_model = 32;
  c.model.n_heads = 4;
  c.train.lr = 1e-3;
  c.train.copy = copy::CopyConfig::naive();
  c.train.codec.slot_name_style = codec::SlotNameStyle::Numeric;
  c.train.codec.slot_layout = codec::SlotLayout::MergedPerRole;
  c.train.codec.role_order = {"Method", "Material"};
  c.decode.beam = 2;
  c.synth.synth.typed_lexicon = true;
  c.synth.split = {0.5, 0.25, 0.25};
  c.sync();

  const auto j = to_json(c);
  CHECK(j.at("version") == kConfigVersion);
  const RunConfig back = run_config_from_json(nlohmann::json::parse(j.dump()));
  CHECK(to_json(back).dump() == j.dump());
  CHECK(back.train.seed == 77);
  CHECK(back.synth.synth.seed == 77);
  CHECK(back.synth.synth.task == corpus::TaskKind::BinaryRE);
  CHECK(back.copy() == copy::CopyConfig::naive());
  CHECK(back.codec().role_order == c.train.codec.role_order);

  const auto path = (std::filesystem::temp_directory_path() / "tempgen_run_config.json").string();
  save_run_config(path, c);
  CHECK(to_json(load_run_config(path)).dump() == j.dump());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_run_config(path), ConfigError);
}

TEST_CASE("run config rejects unknown keys and versions") {
  auto j = nlohmann::json::parse(to_json(RunConfig{}).dump());
  j["model"]["d_modle"] = 3;
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  auto v = nlohmann::json::parse(to_json(RunConfig{}).dump());
  v["version"] = 99;
  CHECK_THROWS_AS(run_config_from_json(v), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"version", 1}, {"train", {{"seed", 4}}}}), ConfigError);
}

TEST_CASE("missing keys keep defaults; decode length falls back to the task default") {
  const RunConfig c = run_config_from_json(nlohmann::json{{"version", 1}, {"seed", 5}});
  CHECK(c.seed == 5);
  CHECK(c.model == model::ModelConfig{});
  CHECK(c.decode_options().max_out_len == decoding::default_max_out_len(corpus::TaskKind::REE));
  CHECK(c.decode_options().beam == 4);
}
