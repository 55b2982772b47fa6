#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tempgen/corpus.hpp"
#include "tempgen/decoding.hpp"
#include "tempgen/error.hpp"
#include "tempgen/evaluation.hpp"
#include "tempgen/model.hpp"
#include "tempgen/report.hpp"
#include "tempgen/run_config.hpp"
#include "tempgen/template_codec.hpp"
#include "tempgen/tokenizer.hpp"
#include "tempgen/topk_copy.hpp"
#include "tempgen/training.hpp"

namespace fs = std::filesystem;
using namespace tempgen;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string task, copy, slot_names, slot_layout;
  int k = 0, beam = 0, max_src = 0, max_out = 0;
  CLI::Option *seed_opt{}, *task_opt{}, *copy_opt{}, *k_opt{}, *beam_opt{}, *max_src_opt{}, *max_out_opt{},
      *slot_names_opt{}, *slot_layout_opt{};

  // per-command
  std::string data, dev, eval_data, vocab, checkpoint, pred, pred_b, out, grid;
  int docs = 0, epochs = 0, batch = 0, resamples = 10000;
  double lr = 0.0;
  CLI::Option *docs_opt{}, *epochs_opt{}, *batch_opt{}, *lr_opt{};
};

// Resolved config plus whether the copy setting was chosen explicitly (by
// file or flag) rather than left at its default.
struct Resolved {
  run::RunConfig cfg;
  bool copy_explicit = false;
  bool max_src_explicit = false;
  bool doc_len_explicit = false;
};

Resolved resolve(const Flags& f) {
  Resolved r;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot open config " + f.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(f.config + ": " + e.what());
    }
    r.cfg = run::run_config_from_json(j);
    r.copy_explicit = j.contains("train") && j["train"].contains("copy");
    r.max_src_explicit = j.contains("model") && j["model"].contains("max_src_len");
    r.doc_len_explicit = j.contains("synth") && j["synth"].contains("config") && j["synth"]["config"].contains("doc_len");
  }
  auto& c = r.cfg;
  if (f.seed_opt->count()) c.seed = f.seed;
  if (f.task_opt->count()) c.task = corpus::parse_task(f.task);
  // the default length cannot hold three 4-ary relations
  if (!r.doc_len_explicit && c.task == corpus::TaskKind::FourAryRE) c.synth.synth.doc_len = {200, 260};
  if (f.copy_opt->count()) {
    c.train.copy.mode = copy::parse_mode(f.copy);
    r.copy_explicit = true;
  }
  if (f.k_opt->count()) {
    c.train.copy.k = f.k;
    if (!f.copy_opt->count() && f.k == 0) c.train.copy = copy::CopyConfig::off();
    r.copy_explicit = true;
  }
  if (f.beam_opt->count()) c.decode.beam = f.beam;
  if (f.max_src_opt->count()) {
    c.model.max_src_len = f.max_src;
    r.max_src_explicit = true;
  }
  if (f.max_out_opt->count()) c.decode.max_out_len = f.max_out;
  if (f.slot_names_opt->count())
    c.train.codec.slot_name_style =
        f.slot_names == "numeric" ? codec::SlotNameStyle::Numeric : codec::SlotNameStyle::Semantic;
  if (f.slot_layout_opt->count())
    c.train.codec.slot_layout =
        f.slot_layout == "merged" ? codec::SlotLayout::MergedPerRole : codec::SlotLayout::PerEntity;

  if (!f.data.empty()) c.paths.dataset = f.data;
  if (!f.dev.empty()) c.paths.dev = f.dev;
  if (!f.vocab.empty()) c.paths.vocab = f.vocab;
  if (!f.checkpoint.empty()) c.paths.checkpoint = f.checkpoint;
  if (!f.pred.empty()) c.paths.predictions = f.pred;
  if (!f.out.empty()) c.paths.output = f.out;
  if (f.docs_opt && f.docs_opt->count()) c.synth.synth.n_docs = f.docs;
  if (f.epochs_opt && f.epochs_opt->count()) c.train.epochs = f.epochs;
  if (f.batch_opt && f.batch_opt->count()) c.train.batch_size = f.batch;
  if (f.lr_opt && f.lr_opt->count()) c.train.lr = f.lr;
  c.sync();
  c.validate();
  return r;
}

void require(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing ") + what + " path");
}

void require_input(const std::string& path, const char* what) {
  require(path, what);
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

// Config echo next to a file output, or inside a directory output.
void echo_config(const run::RunConfig& cfg, const std::string& output, bool is_dir) {
  const std::string path = is_dir ? (fs::path(output) / "run_config.json").string() : output + ".run_config.json";
  run::save_run_config(path, cfg);
}

void ensure_parent(const std::string& file) {
  const fs::path parent = fs::path(file).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

corpus::Dataset load(const run::RunConfig& cfg, const std::string& path) {
  std::vector<std::string> warnings;
  auto ds = corpus::load_dataset(path, cfg.task, {}, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << path << ": " << w << '\n';
  return ds;
}

std::vector<std::string> always_tokens(const codec::CodecConfig& codec, std::size_t roles) {
  std::vector<std::string> out;
  if (codec.slot_name_style == codec::SlotNameStyle::Numeric)
    for (std::size_t i = 0; i < roles; ++i) out.push_back(codec::numeric_slot_name(i));
  if (codec.slot_layout == codec::SlotLayout::MergedPerRole) out.push_back(codec.merged_separator);
  return out;
}

void fix_role_order(run::RunConfig& cfg, const corpus::Dataset& ds) {
  if (cfg.train.codec.role_order.empty()) cfg.train.codec.role_order = eval::role_inventory(ds, cfg.train.codec);
}

// ---- commands ------------------------------------------------------------

int cmd_synth(run::RunConfig cfg) {
  require(cfg.paths.output, "output");
  fs::create_directories(cfg.paths.output);
  const auto ds = corpus::synth_generate(cfg.synth.synth);
  const auto parts = corpus::split(ds, cfg.synth.split, cfg.seed);
  const fs::path dir(cfg.paths.output);
  corpus::save_dataset((dir / "all.jsonl").string(), ds);
  corpus::save_dataset((dir / "train.jsonl").string(), parts.train);
  corpus::save_dataset((dir / "dev.jsonl").string(), parts.dev);
  corpus::save_dataset((dir / "test.jsonl").string(), parts.test);
  // Synthetic corpora are closed-vocabulary: the vocab covers every split.
  fix_role_order(cfg, ds);
  const auto vocab =
      tokenizer::build_vocab(ds, 1, always_tokens(cfg.train.codec, cfg.train.codec.role_order.size()));
  vocab.save((dir / "vocab.txt").string());
  echo_config(cfg, cfg.paths.output, true);
  std::cout << "wrote " << ds.size() << " documents (train " << parts.train.size() << ", dev " << parts.dev.size()
            << ", test " << parts.test.size() << ") to " << cfg.paths.output << '\n';
  return 0;
}

int cmd_encode(run::RunConfig cfg) {
  require_input(cfg.paths.dataset, "dataset");
  require(cfg.paths.output, "output");
  const auto ds = load(cfg, cfg.paths.dataset);
  fix_role_order(cfg, ds);
  std::optional<tokenizer::Vocab> vocab;
  if (!cfg.paths.vocab.empty()) {
    require_input(cfg.paths.vocab, "vocab");
    vocab = tokenizer::Vocab::load(cfg.paths.vocab);
  }
  ensure_parent(cfg.paths.output);
  std::ofstream out(cfg.paths.output, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + cfg.paths.output);
  for (const auto& doc : ds.docs) {
    const auto seq = codec::encode_targets(doc, doc.templates, ds.task, cfg.train.codec);
    ordered_json j{{"doc_id", doc.doc_id}, {"target", seq}};
    if (vocab) j["ids"] = vocab->encode(seq);
    out << j.dump() << '\n';
  }
  echo_config(cfg, cfg.paths.output, false);
  return 0;
}

struct Trained {
  model::ModelConfig model;
  training::TrainResult result;
};

Trained train_into(run::RunConfig& cfg, const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                   const tokenizer::Vocab& vocab, const std::string& out_dir) {
  Trained t;
  t.model = cfg.model;
  t.model.vocab_size = static_cast<int>(vocab.size());
  training::TrainConfig tc = cfg.train;
  if (dev_set.empty()) tc.dev_eval = false;
  training::TrainIO io;
  io.out_dir = out_dir;
  io.on_epoch = [](const training::EpochRecord& r) { std::cerr << training::to_json(r).dump() << '\n'; };
  t.result = training::train(train_set, dev_set, vocab, t.model, tc, io);
  return t;
}

int cmd_train(run::RunConfig cfg) {
  require_input(cfg.paths.dataset, "dataset");
  require(cfg.paths.output, "output");
  const auto train_set = load(cfg, cfg.paths.dataset);
  corpus::Dataset dev_set;
  dev_set.task = cfg.task;
  if (!cfg.paths.dev.empty()) {
    require_input(cfg.paths.dev, "dev");
    dev_set = load(cfg, cfg.paths.dev);
  }
  fix_role_order(cfg, train_set);
  fs::create_directories(cfg.paths.output);
  const fs::path dir(cfg.paths.output);
  tokenizer::Vocab vocab;
  if (!cfg.paths.vocab.empty()) {
    require_input(cfg.paths.vocab, "vocab");
    vocab = tokenizer::Vocab::load(cfg.paths.vocab);
  } else {
    vocab = tokenizer::build_vocab(train_set, 1, always_tokens(cfg.train.codec, cfg.train.codec.role_order.size()));
  }
  vocab.save((dir / "vocab.txt").string());
  cfg.model.vocab_size = static_cast<int>(vocab.size());
  echo_config(cfg, cfg.paths.output, true);
  const Trained t = train_into(cfg, train_set, dev_set, vocab, cfg.paths.output);
  std::cout << "best epoch " << t.result.best_epoch;
  if (t.result.best_dev) std::cout << " dev " << *t.result.best_dev;
  std::cout << '\n';
  return 0;
}

copy::CopyConfig copy_for(const Resolved& r, const model::Checkpoint& ck) {
  if (r.copy_explicit || !ck.meta.contains("copy")) return r.cfg.copy();
  copy::CopyConfig c;
  c.mode = copy::parse_mode(ck.meta["copy"].at("mode").get<std::string>());
  c.k = ck.meta["copy"].at("k").get<int>();
  return c;
}

int cmd_generate(Resolved r) {
  auto& cfg = r.cfg;
  require_input(cfg.paths.checkpoint, "checkpoint");
  require_input(cfg.paths.vocab, "vocab");
  require_input(cfg.paths.dataset, "dataset");
  require(cfg.paths.output, "output");
  auto ck = model::load_checkpoint(cfg.paths.checkpoint);
  const auto vocab = tokenizer::Vocab::load(cfg.paths.vocab);
  if (static_cast<int>(vocab.size()) != ck.config.vocab_size)
    throw ConfigError("vocab size " + std::to_string(vocab.size()) + " does not match checkpoint vocab_size " +
                      std::to_string(ck.config.vocab_size));
  if (r.max_src_explicit) ck.config.max_src_len = cfg.model.max_src_len;
  cfg.train.copy = copy_for(r, ck);
  cfg.train.copy.validate(ck.config.n_heads);
  cfg.model = ck.config;
  const auto ds = load(cfg, cfg.paths.dataset);
  const auto preds = decoding::generate_all(ck.params, ck.config, cfg.train.copy, vocab, ds.docs, cfg.decode_options());
  ensure_parent(cfg.paths.output);
  decoding::save_predictions(cfg.paths.output, preds);
  echo_config(cfg, cfg.paths.output, false);
  return 0;
}

int cmd_evaluate(run::RunConfig cfg) {
  require_input(cfg.paths.dataset, "dataset");
  require_input(cfg.paths.predictions, "predictions");
  const auto gold = load(cfg, cfg.paths.dataset);
  const auto preds = decoding::load_predictions(cfg.paths.predictions);
  const auto rep = eval::evaluate(gold, preds, cfg.train.codec);
  std::cout << eval::report_table(rep);
  if (!cfg.paths.output.empty()) {
    ensure_parent(cfg.paths.output);
    std::ofstream out(cfg.paths.output, std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + cfg.paths.output);
    out << eval::report_json(rep).dump(2) << '\n';
    echo_config(cfg, cfg.paths.output, false);
  }
  return 0;
}

int cmd_inspect_heads(Resolved r) {
  auto& cfg = r.cfg;
  require_input(cfg.paths.checkpoint, "checkpoint");
  const auto ck = model::load_checkpoint(cfg.paths.checkpoint);
  cfg.train.copy = copy_for(r, ck);
  cfg.train.copy.validate(ck.config.n_heads);
  cfg.model = ck.config;
  const auto scores = copy::head_scores(ck.params.at(model::copy_wo_name(ck.config)), ck.config.n_heads);
  const auto selected = copy::copy_heads(ck.params, ck.config, cfg.train.copy);
  std::ostringstream report;
  copy::write_head_report(report, scores, selected);
  std::cout << report.str();
  if (!cfg.paths.output.empty()) {
    ensure_parent(cfg.paths.output);
    std::ofstream out(cfg.paths.output, std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + cfg.paths.output);
    out << report.str();
    echo_config(cfg, cfg.paths.output, false);
  }
  return 0;
}

std::vector<int> parse_grid(const std::string& text, int heads) {
  std::vector<int> grid;
  if (text.empty()) {
    for (int k = 0; k <= heads; k += 2) grid.push_back(k);
    if (grid.back() != heads) grid.push_back(heads);
    return grid;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      grid.push_back(k);
    } catch (const std::exception&) {
      throw ConfigError("sweep-k: bad grid entry '" + item + "'");
    }
  }
  if (grid.empty()) throw ConfigError("sweep-k: empty grid");
  return grid;
}

copy::CopyConfig copy_for_k(int k) { return k == 0 ? copy::CopyConfig::off() : copy::CopyConfig::topk(k); }

// With a checkpoint, re-decodes the evaluation set for each k with the same
// parameters; otherwise trains one model per k.
int cmd_sweep_k(run::RunConfig cfg, const Flags& f) {
  require(cfg.paths.output, "output");
  const bool eval_only = !cfg.paths.checkpoint.empty();
  fs::create_directories(cfg.paths.output);
  const fs::path dir(cfg.paths.output);

  std::string eval_path = f.eval_data.empty() ? cfg.paths.dev : f.eval_data;
  require_input(eval_path, "evaluation dataset");
  const auto eval_set = load(cfg, eval_path);

  tokenizer::Vocab vocab;
  model::Checkpoint ck;
  corpus::Dataset train_set, dev_set;
  dev_set.task = cfg.task;
  if (eval_only) {
    require_input(cfg.paths.checkpoint, "checkpoint");
    require_input(cfg.paths.vocab, "vocab");
    ck = model::load_checkpoint(cfg.paths.checkpoint);
    vocab = tokenizer::Vocab::load(cfg.paths.vocab);
    cfg.model = ck.config;
    fix_role_order(cfg, eval_set);
  } else {
    require_input(cfg.paths.dataset, "dataset");
    train_set = load(cfg, cfg.paths.dataset);
    if (!cfg.paths.dev.empty()) dev_set = load(cfg, cfg.paths.dev);
    fix_role_order(cfg, train_set);
    if (!cfg.paths.vocab.empty()) {
      require_input(cfg.paths.vocab, "vocab");
      vocab = tokenizer::Vocab::load(cfg.paths.vocab);
    } else {
      vocab = tokenizer::build_vocab(train_set, 1, always_tokens(cfg.train.codec, cfg.train.codec.role_order.size()));
    }
    vocab.save((dir / "vocab.txt").string());
    cfg.model.vocab_size = static_cast<int>(vocab.size());
  }
  const auto grid = parse_grid(f.grid, cfg.model.n_heads);
  for (int k : grid) copy_for_k(k).validate(cfg.model.n_heads);
  echo_config(cfg, cfg.paths.output, true);

  std::ostringstream table;
  table << "k\tmode\tprecision\trecall\tf1\n";
  for (int k : grid) {
    const auto copy = copy_for_k(k);
    const fs::path sub = dir / ("k" + std::to_string(k));
    fs::create_directories(sub);
    model::Params<float> params;
    model::ModelConfig mc = cfg.model;
    if (eval_only) {
      params = ck.params;
    } else {
      run::RunConfig kc = cfg;
      kc.train.copy = copy;
      const Trained t = train_into(kc, train_set, dev_set, vocab, sub.string());
      params = t.result.best_params;
      mc = t.model;
    }
    const auto preds = decoding::generate_all(params, mc, copy, vocab, eval_set.docs, cfg.decode_options());
    decoding::save_predictions((sub / "predictions.jsonl").string(), preds);
    const auto rep = eval::evaluate(eval_set, preds, cfg.train.codec);
    std::ofstream((sub / "report.json").string(), std::ios::trunc) << eval::report_json(rep).dump(2) << '\n';
    char line[128];
    std::snprintf(line, sizeof line, "%d\t%s\t%.4f\t%.4f\t%.4f\n", k, copy::to_string(copy.mode).c_str(),
                  rep.micro.precision, rep.micro.recall, rep.micro.f1);
    table << line;
    std::cout << line << std::flush;
  }
  std::ofstream((dir / "sweep.tsv").string(), std::ios::trunc) << table.str();
  return 0;
}

int cmd_significance(run::RunConfig cfg, const Flags& f) {
  require_input(cfg.paths.dataset, "dataset");
  require_input(cfg.paths.predictions, "predictions A");
  require_input(f.pred_b, "predictions B");
  if (f.resamples < 1) throw ConfigError("--resamples must be >= 1");
  const auto gold = load(cfg, cfg.paths.dataset);
  const auto a = eval::evaluate(gold, decoding::load_predictions(cfg.paths.predictions), cfg.train.codec);
  const auto b = eval::evaluate(gold, decoding::load_predictions(f.pred_b), cfg.train.codec);
  std::vector<eval::Counts> ca, cb;
  for (const auto& d : a.docs) ca.push_back(d.counts);
  for (const auto& d : b.docs) cb.push_back(d.counts);
  const auto sig = eval::paired_bootstrap(std::span<const eval::Counts>(ca), std::span<const eval::Counts>(cb),
                                          f.resamples, cfg.seed);
  ordered_json j{{"a", cfg.paths.predictions},
                 {"b", f.pred_b},
                 {"f1_a", a.micro.f1},
                 {"f1_b", b.micro.f1},
                 {"delta", sig.delta},
                 {"p_value", sig.p_value},
                 {"resamples", sig.resamples},
                 {"seed", sig.seed}};
  std::cout << j.dump(2) << '\n';
  if (!cfg.paths.output.empty()) {
    ensure_parent(cfg.paths.output);
    std::ofstream out(cfg.paths.output, std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + cfg.paths.output);
    out << j.dump(2) << '\n';
    echo_config(cfg, cfg.paths.output, false);
  }
  return 0;
}

int fail(ErrorKind kind, const std::string& message) {
  static const char* names[] = {"", "usage", "config", "data", "runtime"};
  const int code = static_cast<int>(kind);
  std::cerr << "error: " << message << '\n' << "error_code: " << code << ' ' << names[code] << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TempGen: template generation with Top-K copy"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "RunConfig JSON file; flags override it");
  f.seed_opt = app.add_option("--seed", f.seed, "Master seed");
  f.task_opt = app.add_option("--task", f.task)->check(CLI::IsMember({"ree", "binary-re", "4ary-re"}));
  f.copy_opt = app.add_option("--copy", f.copy)->check(CLI::IsMember({"topk", "naive", "off"}));
  f.k_opt = app.add_option("--k", f.k, "Number of copy heads (0 disables copying)")->check(CLI::NonNegativeNumber);
  f.beam_opt = app.add_option("--beam", f.beam, "Beam width (1 = greedy)")->check(CLI::PositiveNumber);
  f.max_src_opt = app.add_option("--max-src", f.max_src)->check(CLI::PositiveNumber);
  f.max_out_opt = app.add_option("--max-out", f.max_out)->check(CLI::PositiveNumber);
  f.slot_names_opt = app.add_option("--slot-names", f.slot_names)->check(CLI::IsMember({"semantic", "numeric"}));
  f.slot_layout_opt = app.add_option("--slot-layout", f.slot_layout)->check(CLI::IsMember({"per-entity", "merged"}));

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with train/dev/test splits and a vocab");
  synth->add_option("--out", f.out, "Output directory");
  f.docs_opt = synth->add_option("--docs", f.docs, "Number of documents")->check(CLI::NonNegativeNumber);

  auto* encode = app.add_subcommand("encode", "Write target template sequences for inspection");
  encode->add_option("--data", f.data);
  encode->add_option("--vocab", f.vocab, "Also emit token ids");
  encode->add_option("--out", f.out);

  auto* train = app.add_subcommand("train", "Train a model; writes checkpoints and metrics.jsonl");
  train->add_option("--data", f.data, "Training dataset");
  train->add_option("--dev", f.dev, "Dev dataset for model selection");
  train->add_option("--vocab", f.vocab, "Vocab file (built from the training data when absent)");
  train->add_option("--out", f.out, "Output directory");
  f.epochs_opt = train->add_option("--epochs", f.epochs)->check(CLI::NonNegativeNumber);
  f.batch_opt = train->add_option("--batch-size", f.batch)->check(CLI::PositiveNumber);
  f.lr_opt = train->add_option("--lr", f.lr)->check(CLI::NonNegativeNumber);

  auto* generate = app.add_subcommand("generate", "Decode documents into predictions JSONL");
  generate->add_option("--checkpoint", f.checkpoint);
  generate->add_option("--vocab", f.vocab);
  generate->add_option("--data", f.data);
  generate->add_option("--out", f.out);

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold");
  evaluate->add_option("--data", f.data, "Gold dataset");
  evaluate->add_option("--pred", f.pred, "Predictions JSONL");
  evaluate->add_option("--out", f.out, "Report JSON");

  auto* heads = app.add_subcommand("inspect-heads", "Show copy-head importance scores and the selected heads");
  heads->add_option("--checkpoint", f.checkpoint);
  heads->add_option("--out", f.out);

  auto* sweep = app.add_subcommand("sweep-k", "Evaluate (with --checkpoint) or train across a grid of k");
  sweep->add_option("--data", f.data, "Training dataset");
  sweep->add_option("--dev", f.dev);
  sweep->add_option("--eval", f.eval_data, "Dataset scored for each k (defaults to --dev)");
  sweep->add_option("--vocab", f.vocab);
  sweep->add_option("--checkpoint", f.checkpoint);
  sweep->add_option("--grid", f.grid, "Comma-separated k values (default 0,2,...,h)");
  sweep->add_option("--out", f.out, "Output directory");
  sweep->add_option("--epochs", f.epochs)->check(CLI::NonNegativeNumber);

  auto* sig = app.add_subcommand("significance", "Paired bootstrap between two prediction files");
  sig->add_option("--data", f.data, "Gold dataset");
  sig->add_option("--a", f.pred, "Predictions of system A");
  sig->add_option("--b", f.pred_b, "Predictions of system B");
  sig->add_option("--resamples", f.resamples);
  sig->add_option("--out", f.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(ErrorKind::Usage, e.what());
  }

  try {
    if (sweep->parsed() && sweep->count("--epochs")) f.epochs_opt = sweep->get_option("--epochs");
    Resolved r = resolve(f);
    if (synth->parsed()) return cmd_synth(r.cfg);
    if (encode->parsed()) return cmd_encode(r.cfg);
    if (train->parsed()) return cmd_train(r.cfg);
    if (generate->parsed()) return cmd_generate(r);
    if (evaluate->parsed()) return cmd_evaluate(r.cfg);
    if (heads->parsed()) return cmd_inspect_heads(r);
    if (sweep->parsed()) return cmd_sweep_k(r.cfg, f);
    if (sig->parsed()) return cmd_significance(r.cfg, f);
    return fail(ErrorKind::Usage, "no command given");
  } catch (const Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorKind::Runtime, e.what());
  }
}
