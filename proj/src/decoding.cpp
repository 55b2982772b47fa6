#include "tempgen/decoding.hpp"

#include <fstream>

#include <json.hpp>

#include "tempgen/error.hpp"
#include "tempgen/parallel.hpp"

namespace tempgen::decoding {

using nlohmann::json;

CopyModel::CopyModel(const model::Params<float>& params, const model::ModelConfig& cfg, const copy::CopyConfig& copy,
                     std::span<const int> src)
    : params_(params), cfg_(cfg), copy_(copy), heads_(copy::copy_heads(params, cfg, copy)),
      enc_(model::encode_source(params, cfg, src)) {}

void CopyModel::refresh(State& s) const {
  const RowVec<float> p = copy::step_distribution(enc_, s.dec, copy_, heads_, cfg_.n_heads);
  s.log_probs.resize(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double v = static_cast<double>(p(i));
    s.log_probs[static_cast<std::size_t>(i)] = v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
  }
}

CopyModel::State CopyModel::start() const {
  State s{model::initial_state(cfg_), {}};
  model::step(params_, cfg_, enc_, s.dec, tokenizer::kBos);
  refresh(s);
  return s;
}

void CopyModel::advance(State& s, int token) const {
  model::step(params_, cfg_, enc_, s.dec, token);
  refresh(s);
}

std::vector<int> source_ids(const corpus::Document& doc, const tokenizer::Vocab& vocab, int max_src_len) {
  std::vector<int> ids = vocab.encode(doc.tokens);
  if (static_cast<int>(ids.size()) > max_src_len) ids.resize(static_cast<std::size_t>(max_src_len));
  return ids;
}

int default_max_out_len(corpus::TaskKind task) { return task == corpus::TaskKind::REE ? 256 : 512; }

Prediction generate(const model::Params<float>& params, const model::ModelConfig& cfg, const copy::CopyConfig& copy,
                    const tokenizer::Vocab& vocab, const corpus::Document& doc, const DecodeOptions& opt) {
  const std::vector<int> src = source_ids(doc, vocab, cfg.max_src_len);
  CopyModel m(params, cfg, copy, src);
  const Hypothesis h = opt.beam <= 1 ? greedy(m, opt.max_out_len)
                                     : beam_search(m, BeamOptions{opt.beam, opt.max_out_len, opt.length_penalty});
  Prediction p;
  p.doc_id = doc.doc_id;
  p.output_tokens = vocab.decode(h.tokens);
  p.logprob = h.logprob;
  return p;
}

std::vector<Prediction> generate_all(const model::Params<float>& params, const model::ModelConfig& cfg,
                                     const copy::CopyConfig& copy, const tokenizer::Vocab& vocab,
                                     const std::vector<corpus::Document>& docs, const DecodeOptions& opt) {
  std::vector<Prediction> out(docs.size());
  parallel_for(docs.size(), [&](std::size_t i) { out[i] = generate(params, cfg, copy, vocab, docs[i], opt); });
  return out;
}

void write_predictions(std::ostream& out, const std::vector<Prediction>& preds) {
  for (const auto& p : preds)
    out << json{{"doc_id", p.doc_id}, {"output_tokens", p.output_tokens}, {"logprob", p.logprob}}.dump() << '\n';
}

void save_predictions(const std::string& path, const std::vector<Prediction>& preds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  write_predictions(out, preds);
}

std::vector<Prediction> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions " + path);
  std::vector<Prediction> preds;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Prediction p;
      p.doc_id = j.at("doc_id").get<std::string>();
      p.output_tokens = j.at("output_tokens").get<std::vector<std::string>>();
      p.logprob = j.value("logprob", 0.0);
      preds.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return preds;
}

double sequence_logprob(const model::Params<float>& params, const model::ModelConfig& cfg,
                        const copy::CopyConfig& copy, std::span<const int> src, std::span<const int> tokens,
                        bool with_eos) {
  std::vector<int> targets(tokens.begin(), tokens.end());
  if (with_eos) targets.push_back(tokenizer::kEos);
  if (targets.empty()) return 0.0;
  std::vector<int> tgt_in{tokenizer::kBos};
  tgt_in.insert(tgt_in.end(), targets.begin(), targets.end() - 1);

  autograd::Graph<float> g(false);
  auto bound = model::bind(g, params, false);
  auto trace = model::forward(g, bound, cfg, src, tgt_in);
  const auto heads = copy::copy_heads(params, cfg, copy);
  auto loss = copy::copy_loss(g, trace, src, targets, copy, heads, cfg.vocab_size);
  const Mat<float> p = loss.p_final.valid() ? g.value(loss.p_final) : model::vocab_probs(g, trace);
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t)
    total += std::log(static_cast<double>(p(static_cast<Eigen::Index>(t), targets[t])));
  return total;
}

}  // namespace tempgen::decoding
