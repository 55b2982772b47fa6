#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "tempgen/run_config.hpp"

namespace fs = std::filesystem;
using namespace tempgen;

namespace {

struct Result {
  int code;
  std::string err;
};

Result cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(TEMPGEN_CLI_PATH) + " " + args + " >" + (dir / "stdout.txt").string() +
                          " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// A small model and corpus so the pipeline runs in seconds.
fs::path small_config(const fs::path& dir) {
  run::RunConfig c;
  c.seed = 9;
  c.model.d_model = 16;
  c.model.n_heads = 2;
  c.model.d_ff = 32;
  c.model.n_enc_layers = 1;
  c.model.n_dec_layers = 1;
  c.model.max_src_len = 64;
  c.model.max_tgt_len = 48;
  c.train.copy = copy::CopyConfig::topk(1);
  c.train.lr = 1e-3;
  c.train.epochs = 1;
  c.train.dev_eval = false;
  c.decode.beam = 2;
  c.decode.max_out_len = 20;
  c.synth.synth.doc_len = {30, 40};
  c.synth.synth.entities_per_slot = {0, 1};
  c.synth.synth.mention_repeat = {1, 1};
  c.synth.synth.mention_len = {1, 1};
  c.synth.synth.entity_vocab_size = 40;
  c.synth.synth.filler_vocab_size = 30;
  c.sync();
  const fs::path p = dir / "config.json";
  run::save_run_config(p.string(), c);
  return p;
}

}  // namespace

TEST_CASE("cli: usage and config errors map to exit codes") {
  const fs::path d = scratch("tempgen_cli_codes");
  CHECK(cli("", d).code == 1);
  CHECK(cli("frobnicate", d).code == 1);
  CHECK(cli("--copy sideways synth --out x", d).code == 1);

  const auto missing = cli("evaluate --data /nonexistent.jsonl --pred /nonexistent.jsonl", d);
  CHECK(missing.code == 2);
  CHECK(missing.err.find("error_code: 2") != std::string::npos);

  std::ofstream(d / "bad.json") << "{\"version\": 1, \"bogus\": true}";
  CHECK(cli("--config " + (d / "bad.json").string() + " synth --out " + (d / "s").string(), d).code == 2);

  std::ofstream(d / "broken.jsonl") << "{not json\n";
  std::ofstream(d / "empty.jsonl") << "";
  const auto data = cli("evaluate --data " + (d / "broken.jsonl").string() + " --pred " + (d / "empty.jsonl").string(), d);
  CHECK(data.code == 3);
  fs::remove_all(d);
}

TEST_CASE("cli: synth, encode, train, generate, evaluate, inspect-heads, sweep-k, significance") {
  const fs::path d = scratch("tempgen_cli_pipeline");
  const std::string cfg = "--config " + small_config(d).string() + " ";
  const std::string s = (d / "synth").string();

  REQUIRE(cli(cfg + "synth --docs 30 --out " + s, d).code == 0);
  for (const char* f : {"all.jsonl", "train.jsonl", "dev.jsonl", "test.jsonl", "vocab.txt", "run_config.json"})
    CHECK(fs::exists(fs::path(s) / f));

  REQUIRE(cli(cfg + "--slot-names numeric encode --data " + s + "/dev.jsonl --vocab " + s + "/vocab.txt --out " +
                  (d / "enc.jsonl").string(),
              d)
              .code == 0);
  CHECK(slurp(d / "enc.jsonl").find("<ROLE_") != std::string::npos);

  REQUIRE(cli(cfg + "train --data " + s + "/train.jsonl --dev " + s + "/dev.jsonl --vocab " + s + "/vocab.txt --out " +
                  (d / "run").string(),
              d)
              .code == 0);
  const std::string ckpt = (d / "run" / "best.ckpt").string();
  CHECK(fs::exists(d / "run" / "metrics.jsonl"));
  CHECK(fs::exists(d / "run" / "run_config.json"));

  const std::string pred = (d / "pred.jsonl").string();
  REQUIRE(cli(cfg + "generate --checkpoint " + ckpt + " --vocab " + s + "/vocab.txt --data " + s + "/test.jsonl --out " +
                  pred,
              d)
              .code == 0);
  CHECK(fs::exists(pred + ".run_config.json"));

  REQUIRE(cli(cfg + "evaluate --data " + s + "/test.jsonl --pred " + pred + " --out " + (d / "report.json").string(), d)
              .code == 0);
  const auto report = nlohmann::json::parse(slurp(d / "report.json"));
  CHECK(report.contains("micro"));

  REQUIRE(cli(cfg + "inspect-heads --checkpoint " + ckpt + " --out " + (d / "heads.tsv").string(), d).code == 0);
  CHECK(!slurp(d / "heads.tsv").empty());

  REQUIRE(cli(cfg + "sweep-k --checkpoint " + ckpt + " --vocab " + s + "/vocab.txt --dev " + s + "/dev.jsonl --out " +
                  (d / "sweep").string(),
              d)
              .code == 0);
  const std::string table = slurp(d / "sweep" / "sweep.tsv");
  CHECK(table.find("\n0\t") != std::string::npos);
  CHECK(table.find("\n2\t") != std::string::npos);

  REQUIRE(cli(cfg + "significance --data " + s + "/test.jsonl --a " + pred + " --b " + pred + " --resamples 200 --out " +
                  (d / "sig.json").string(),
              d)
              .code == 0);
  CHECK(nlohmann::json::parse(slurp(d / "sig.json")).at("p_value") == 1.0);
  fs::remove_all(d);
}

TEST_CASE("cli: every task synthesizes with default settings") {
  const fs::path d = scratch("tempgen_cli_tasks");
  for (const char* task : {"ree", "binary-re", "4ary-re"}) {
    CAPTURE(task);
    CHECK(cli(std::string("--task ") + task + " synth --docs 5 --out " + (d / task).string(), d).code == 0);
  }
  fs::remove_all(d);
}
