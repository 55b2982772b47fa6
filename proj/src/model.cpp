#include "tempgen/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tempgen/error.hpp"
#include "tempgen/rng.hpp"
#include "tempgen/tokenizer.hpp"

namespace tempgen::model {

using nlohmann::json;

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("model config: " + msg);
  };
  need(n_enc_layers >= 1 && n_dec_layers >= 1, "layer counts must be positive");
  need(d_model >= 1 && n_heads >= 1, "d_model and heads must be positive");
  need(d_model % n_heads == 0, "d_model " + std::to_string(d_model) + " not divisible by heads " +
                                   std::to_string(n_heads));
  need(d_ff >= 1, "d_ff must be positive");
  need(max_src_len >= 1 && max_tgt_len >= 1, "max lengths must be positive");
  need(vocab_size > tokenizer::kFirstContent - 1, "vocab_size too small");
  need(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
}

json to_json(const ModelConfig& c) {
  return json{{"n_enc_layers", c.n_enc_layers}, {"n_dec_layers", c.n_dec_layers}, {"d_model", c.d_model},
              {"n_heads", c.n_heads},           {"d_ff", c.d_ff},                 {"max_src_len", c.max_src_len},
              {"max_tgt_len", c.max_tgt_len},   {"vocab_size", c.vocab_size},     {"dropout", c.dropout}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.n_enc_layers = j.value("n_enc_layers", c.n_enc_layers);
    c.n_dec_layers = j.value("n_dec_layers", c.n_dec_layers);
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.max_src_len = j.value("max_src_len", c.max_src_len);
    c.max_tgt_len = j.value("max_tgt_len", c.max_tgt_len);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.dropout = j.value("dropout", c.dropout);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

namespace {

void attention_specs(std::vector<ParamSpec>& out, const std::string& prefix, int d) {
  for (const char* w : {"wq", "wk", "wv", "wo"}) out.push_back({prefix + "." + w, d, d, ParamSpec::Init::Xavier});
  for (const char* b : {"bq", "bk", "bv", "bo"}) out.push_back({prefix + "." + b, 1, d, ParamSpec::Init::Zero});
}

void norm_specs(std::vector<ParamSpec>& out, const std::string& prefix, int d) {
  out.push_back({prefix + ".g", 1, d, ParamSpec::Init::One});
  out.push_back({prefix + ".b", 1, d, ParamSpec::Init::Zero});
}

void ffn_specs(std::vector<ParamSpec>& out, const std::string& prefix, int d, int ff) {
  out.push_back({prefix + ".w1", d, ff, ParamSpec::Init::Xavier});
  out.push_back({prefix + ".b1", 1, ff, ParamSpec::Init::Zero});
  out.push_back({prefix + ".w2", ff, d, ParamSpec::Init::Xavier});
  out.push_back({prefix + ".b2", 1, d, ParamSpec::Init::Zero});
}

std::string layer(const char* side, int l) { return std::string(side) + "." + std::to_string(l); }

}  // namespace

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  const int d = cfg.d_model;
  std::vector<ParamSpec> s;
  s.push_back({"embed.tokens", cfg.vocab_size, d, ParamSpec::Init::Embedding});
  for (int l = 0; l < cfg.n_enc_layers; ++l) {
    const std::string p = layer("enc", l);
    norm_specs(s, p + ".ln1", d);
    attention_specs(s, p + ".self", d);
    norm_specs(s, p + ".ln2", d);
    ffn_specs(s, p + ".ffn", d, cfg.d_ff);
  }
  norm_specs(s, "enc.ln", d);
  for (int l = 0; l < cfg.n_dec_layers; ++l) {
    const std::string p = layer("dec", l);
    norm_specs(s, p + ".ln1", d);
    attention_specs(s, p + ".self", d);
    norm_specs(s, p + ".ln2", d);
    attention_specs(s, p + ".cross", d);
    norm_specs(s, p + ".ln3", d);
    ffn_specs(s, p + ".ffn", d, cfg.d_ff);
  }
  norm_specs(s, "dec.ln", d);
  s.push_back({"out.w", d, cfg.vocab_size, ParamSpec::Init::Xavier});
  s.push_back({"out.b", 1, cfg.vocab_size, ParamSpec::Init::Zero});
  return s;
}

std::string copy_wo_name(const ModelConfig& cfg) { return layer("dec", cfg.n_dec_layers - 1) + ".cross.wo"; }

Params<float> init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Params<float> p;
  for (const auto& spec : param_specs(cfg)) {
    Mat<float> m(spec.rows, spec.cols);
    double bound = 0.0;
    switch (spec.init) {
      case ParamSpec::Init::Zero: m.setZero(); break;
      case ParamSpec::Init::One: m.setOnes(); break;
      case ParamSpec::Init::Xavier: bound = std::sqrt(6.0 / (spec.rows + spec.cols)); break;
      case ParamSpec::Init::Embedding: bound = std::sqrt(3.0 / spec.cols); break;
    }
    if (bound > 0.0)
      for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<float>((2.0 * uniform_real(rng) - 1.0) * bound);
    p.emplace(spec.name, std::move(m));
  }
  return p;
}

// ---- checkpoints -----------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'T', 'G', 'C', 'K'};

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw DataError("checkpoint " + path + ": truncated");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const Params<float>& params,
                     const json& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write checkpoint " + path);
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  const std::string header = json{{"model", to_json(cfg)}, {"meta", meta}}.dump();
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, m] : params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  }
  if (!out) throw RuntimeFailure("write failed for checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("checkpoint " + path + ": bad magic");
  const std::uint32_t version = get_u32(in, path);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  std::string header(get_u32(in, path), '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header.size())))
    throw DataError("checkpoint " + path + ": truncated header");
  Checkpoint ck;
  json h;
  try {
    h = json::parse(header);
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path + ": bad header: " + e.what());
  }
  ck.config = model_config_from_json(h.at("model"));
  ck.config.validate();
  ck.meta = h.value("meta", json::object());

  std::map<std::string, ParamSpec> expected;
  for (auto& s : param_specs(ck.config)) expected.emplace(s.name, s);

  const std::uint32_t count = get_u32(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get_u32(in, path), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    const std::uint32_t rank = get_u32(in, path);
    if (rank != 2) throw DataError("checkpoint " + path + ": array " + name + " has rank " + std::to_string(rank));
    const std::uint32_t rows = get_u32(in, path), cols = get_u32(in, path);
    auto it = expected.find(name);
    if (it == expected.end()) throw DataError("checkpoint " + path + ": unexpected array " + name);
    if (static_cast<int>(rows) != it->second.rows || static_cast<int>(cols) != it->second.cols)
      throw DataError("checkpoint " + path + ": shape mismatch for " + name);
    Mat<float> m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float))))
      throw DataError("checkpoint " + path + ": truncated array " + name);
    ck.params.emplace(name, std::move(m));
  }
  if (ck.params.size() != expected.size()) throw DataError("checkpoint " + path + ": missing arrays");
  return ck;
}

// ---- graph forward -----------------------------------------------------------

template <typename T>
Bound<T> bind(Graph<T>& g, const Params<T>& params, bool requires_grad) {
  Bound<T> b;
  for (const auto& [name, m] : params) b.emplace(name, g.external(m, requires_grad));
  return b;
}

std::vector<char> source_mask(std::span<const int> src) {
  std::vector<char> valid(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) valid[i] = src[i] != tokenizer::kPad;
  return valid;
}

namespace {

template <typename T>
struct Ctx {
  Graph<T>& g;
  const Bound<T>& p;
  const ModelConfig& cfg;
  const ForwardOptions& opt;
  std::uint64_t dropout_site = 0;

  Var w(const std::string& name) const { return p.at(name); }

  Var norm(Var x, const std::string& prefix) { return g.layer_norm(x, w(prefix + ".g"), w(prefix + ".b")); }

  Var drop(Var x) {
    if (opt.dropout <= 0.0) return x;
    return g.dropout(x, opt.dropout, mix_seed(opt.seed, dropout_site++));
  }

  // Returns the output projection; probs receives the stacked probabilities.
  Var attention(Var query_in, Var kv_in, const std::string& prefix, std::span<const char> key_valid, bool causal,
                Var* probs_out = nullptr) {
    Var q = g.linear(query_in, w(prefix + ".wq"), w(prefix + ".bq"));
    Var k = g.linear(kv_in, w(prefix + ".wk"), w(prefix + ".bk"));
    Var v = g.linear(kv_in, w(prefix + ".wv"), w(prefix + ".bv"));
    Var probs = g.attention_probs(q, k, cfg.n_heads, key_valid, causal);
    if (probs_out) *probs_out = probs;
    Var ctx = g.attention_apply(probs, v, cfg.n_heads);
    return g.linear(ctx, w(prefix + ".wo"), w(prefix + ".bo"));
  }

  Var ffn(Var x, const std::string& prefix) {
    Var h = g.gelu(g.linear(x, w(prefix + ".w1"), w(prefix + ".b1")));
    return g.linear(h, w(prefix + ".w2"), w(prefix + ".b2"));
  }
};

void check_ids(std::span<const int> ids, int vocab, const char* what) {
  for (int id : ids)
    if (id < 0 || id >= vocab) throw DataError(std::string(what) + " token id " + std::to_string(id) + " outside vocabulary");
}

}  // namespace

template <typename T>
Var encode(Graph<T>& g, const Bound<T>& p, const ModelConfig& cfg, std::span<const int> src,
           std::span<const char> src_valid, const ForwardOptions& opt) {
  if (src.empty()) throw DataError("empty source sequence");
  if (static_cast<int>(src.size()) > cfg.max_src_len)
    throw DataError("source length " + std::to_string(src.size()) + " exceeds max_src_len " +
                    std::to_string(cfg.max_src_len));
  check_ids(src, cfg.vocab_size, "source");
  Ctx<T> c{g, p, cfg, opt, mix_seed(opt.seed, 1)};
  const T scale = static_cast<T>(std::sqrt(static_cast<double>(cfg.d_model)));
  Var x = c.drop(g.embed(c.w("embed.tokens"), src, scale, 0));
  for (int l = 0; l < cfg.n_enc_layers; ++l) {
    const std::string pre = layer("enc", l);
    Var h = c.norm(x, pre + ".ln1");
    x = g.add(x, c.drop(c.attention(h, h, pre + ".self", src_valid, false)));
    x = g.add(x, c.drop(c.ffn(c.norm(x, pre + ".ln2"), pre + ".ffn")));
  }
  return c.norm(x, "enc.ln");
}

template <typename T>
Trace<T> forward(Graph<T>& g, const Bound<T>& p, const ModelConfig& cfg, std::span<const int> src,
                 std::span<const int> tgt_in, const ForwardOptions& opt) {
  if (tgt_in.empty()) throw DataError("empty decoder input");
  if (static_cast<int>(tgt_in.size()) > cfg.max_tgt_len)
    throw DataError("target length " + std::to_string(tgt_in.size()) + " exceeds max_tgt_len " +
                    std::to_string(cfg.max_tgt_len));
  check_ids(tgt_in, cfg.vocab_size, "target");
  Trace<T> tr;
  tr.src_valid = source_mask(src);
  tr.enc_out = encode(g, p, cfg, src, tr.src_valid, opt);

  Ctx<T> c{g, p, cfg, opt, mix_seed(opt.seed, 2)};
  const T scale = static_cast<T>(std::sqrt(static_cast<double>(cfg.d_model)));
  Var y = c.drop(g.embed(c.w("embed.tokens"), tgt_in, scale, 0));
  for (int l = 0; l < cfg.n_dec_layers; ++l) {
    const std::string pre = layer("dec", l);
    Var h = c.norm(y, pre + ".ln1");
    y = g.add(y, c.drop(c.attention(h, h, pre + ".self", {}, true)));
    Var probs;
    y = g.add(y, c.drop(c.attention(c.norm(y, pre + ".ln2"), tr.enc_out, pre + ".cross", tr.src_valid, false, &probs)));
    if (l == cfg.n_dec_layers - 1) tr.cross_probs = probs;
    y = g.add(y, c.drop(c.ffn(c.norm(y, pre + ".ln3"), pre + ".ffn")));
  }
  tr.dec_out = c.norm(y, "dec.ln");
  tr.logits = g.linear(tr.dec_out, c.w("out.w"), c.w("out.b"));
  return tr;
}

template <typename T>
Mat<T> vocab_probs(const Graph<T>& g, const Trace<T>& trace) {
  return kernels::softmax_rows<T>(g.value(trace.logits));
}

// ---- incremental decoding ------------------------------------------------

EncodedSource encode_source(const Params<float>& params, const ModelConfig& cfg, std::span<const int> src) {
  EncodedSource e;
  e.src.assign(src.begin(), src.end());
  e.src_valid = source_mask(src);
  Graph<float> g(false);
  Bound<float> p = bind(g, params, false);
  Var enc = encode(g, p, cfg, src, e.src_valid);
  e.enc_out = g.value(enc);
  e.enc_mean = kernels::masked_row_mean<float>(e.enc_out, e.src_valid);
  for (int l = 0; l < cfg.n_dec_layers; ++l) {
    const std::string pre = layer("dec", l) + ".cross";
    e.cross_k.push_back(g.value(g.linear(enc, p.at(pre + ".wk"), p.at(pre + ".bk"))));
    e.cross_v.push_back(g.value(g.linear(enc, p.at(pre + ".wv"), p.at(pre + ".bv"))));
  }
  return e;
}

DecoderState initial_state(const ModelConfig& cfg) {
  DecoderState s;
  s.self_k.assign(static_cast<std::size_t>(cfg.n_dec_layers), Mat<float>(0, cfg.d_model));
  s.self_v.assign(static_cast<std::size_t>(cfg.n_dec_layers), Mat<float>(0, cfg.d_model));
  return s;
}

void step(const Params<float>& params, const ModelConfig& cfg, const EncodedSource& enc, DecoderState& state,
          int token) {
  if (token < 0 || token >= cfg.vocab_size) throw DataError("decoder token id outside vocabulary");
  Graph<float> g(false);
  Bound<float> p = bind(g, params, false);
  auto w = [&](const std::string& name) { return p.at(name); };
  auto norm = [&](Var x, const std::string& pre) { return g.layer_norm(x, w(pre + ".g"), w(pre + ".b")); };
  const int ids[1] = {token};
  const float scale = std::sqrt(static_cast<float>(cfg.d_model));
  Var y = g.embed(w("embed.tokens"), ids, scale, state.position);

  for (int l = 0; l < cfg.n_dec_layers; ++l) {
    const std::string pre = layer("dec", l);
    const auto li = static_cast<std::size_t>(l);
    {
      Var h = norm(y, pre + ".ln1");
      const std::string a = pre + ".self";
      Var q = g.linear(h, w(a + ".wq"), w(a + ".bq"));
      const Mat<float>& k_row = g.value(g.linear(h, w(a + ".wk"), w(a + ".bk")));
      const Mat<float>& v_row = g.value(g.linear(h, w(a + ".wv"), w(a + ".bv")));
      Mat<float>& K = state.self_k[li];
      Mat<float>& V = state.self_v[li];
      K.conservativeResize(K.rows() + 1, Eigen::NoChange);
      V.conservativeResize(V.rows() + 1, Eigen::NoChange);
      K.row(K.rows() - 1) = k_row.row(0);
      V.row(V.rows() - 1) = v_row.row(0);
      Var probs = g.attention_probs(q, g.external(K, false), cfg.n_heads, {}, false);
      Var ctx = g.attention_apply(probs, g.external(V, false), cfg.n_heads);
      y = g.add(y, g.linear(ctx, w(a + ".wo"), w(a + ".bo")));
    }
    {
      Var h = norm(y, pre + ".ln2");
      const std::string a = pre + ".cross";
      Var q = g.linear(h, w(a + ".wq"), w(a + ".bq"));
      Var probs = g.attention_probs(q, g.external(enc.cross_k[li], false), cfg.n_heads, enc.src_valid, false);
      if (l == cfg.n_dec_layers - 1) state.cross_probs = g.value(probs);
      Var ctx = g.attention_apply(probs, g.external(enc.cross_v[li], false), cfg.n_heads);
      y = g.add(y, g.linear(ctx, w(a + ".wo"), w(a + ".bo")));
    }
    {
      Var h = norm(y, pre + ".ln3");
      Var f = g.gelu(g.linear(h, w(pre + ".ffn.w1"), w(pre + ".ffn.b1")));
      y = g.add(y, g.linear(f, w(pre + ".ffn.w2"), w(pre + ".ffn.b2")));
    }
  }
  Var out = norm(y, "dec.ln");
  state.dec_out = g.value(out).row(0);
  state.logits = g.value(g.linear(out, w("out.w"), w("out.b"))).row(0);
  ++state.position;
}

// ---- gradients -------------------------------------------------------------

template <typename T>
void collect_gradients(const Graph<T>& g, const Bound<T>& bound, Params<T>& grads) {
  for (const auto& [name, var] : bound) {
    if (!g.has_grad(var)) continue;
    const Mat<T>& gr = g.grad(var);
    if (!gr.allFinite()) throw RuntimeFailure("non-finite gradient for parameter " + name);
    auto it = grads.find(name);
    if (it == grads.end())
      grads.emplace(name, gr);
    else
      it->second += gr;
  }
}

GradCheckResult grad_check(const Params<double>& params, const LossFn& fn, double eps, int samples,
                           std::uint64_t seed) {
  Params<double> analytic;
  fn(params, &analytic);
  Params<double> work = params;
  std::vector<std::string> names;
  for (const auto& [name, m] : params) names.push_back(name);
  if (names.empty()) throw ConfigError("grad_check: no parameters");
  Rng rng(seed);
  GradCheckResult r;
  for (int s = 0; s < samples; ++s) {
    const std::string& name = names[static_cast<std::size_t>(s) % names.size()];
    Mat<double>& m = work.at(name);
    const auto idx = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(m.size())));
    const double orig = m.data()[idx];
    m.data()[idx] = orig + eps;
    const double up = fn(work, nullptr);
    m.data()[idx] = orig - eps;
    const double down = fn(work, nullptr);
    m.data()[idx] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    auto it = analytic.find(name);
    const double a = it == analytic.end() ? 0.0 : it->second.data()[idx];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    if (rel > r.max_rel_error || r.worst_param.empty()) {
      r.max_rel_error = rel;
      r.worst_param = name + "[" + std::to_string(idx) + "]";
    }
    ++r.coordinates;
  }
  return r;
}

#define TEMPGEN_INSTANTIATE(T)                                                                                 \
  template Bound<T> bind<T>(Graph<T>&, const Params<T>&, bool);                                                \
  template Var encode<T>(Graph<T>&, const Bound<T>&, const ModelConfig&, std::span<const int>,                 \
                         std::span<const char>, const ForwardOptions&);                                        \
  template Trace<T> forward<T>(Graph<T>&, const Bound<T>&, const ModelConfig&, std::span<const int>,           \
                               std::span<const int>, const ForwardOptions&);                                   \
  template Mat<T> vocab_probs<T>(const Graph<T>&, const Trace<T>&);                                            \
  template void collect_gradients<T>(const Graph<T>&, const Bound<T>&, Params<T>&);

TEMPGEN_INSTANTIATE(float)
TEMPGEN_INSTANTIATE(double)

#undef TEMPGEN_INSTANTIATE

}  // namespace tempgen::model
