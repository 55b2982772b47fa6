#pragma once

// A small reverse-mode tape over dense matrices. Nodes are created eagerly
// (values computed on construction) and each op that touches a node needing
// gradients records a closure that pushes its output gradient to its inputs.

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tempgen/error.hpp"
#include "tempgen/rng.hpp"
#include "tempgen/tensor.hpp"

namespace tempgen::autograd {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename T>
class Graph {
 public:
  using M = Mat<T>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  // Leaf wrapping an external matrix (e.g. a parameter); the matrix must
  // outlive the graph.
  Var external(const M& value, bool requires_grad) { return push_ext(&value, requires_grad && record_); }
  Var constant(M value) { return push(std::move(value), false); }

  const M& value(Var v) const { return node(v).val(); }
  bool has_grad(Var v) const { return node(v).has_grad; }
  const M& grad(Var v) const { return node(v).grad; }

  T scalar(Var v) const { return value(v)(0, 0); }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  void backward(Var loss) {
    if (!record_) throw RuntimeFailure("backward on a non-recording graph");
    auto& n = node(loss);
    if (n.val().rows() != 1 || n.val().cols() != 1) throw RuntimeFailure("backward needs a scalar loss");
    acc(loss).setOnes();
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      auto& nd = nodes_[static_cast<std::size_t>(i)];
      if (nd.back && nd.has_grad) nd.back();
    }
  }

  // ----- ops ---------------------------------------------------------------

  Var matmul(Var a, Var b) {
    M out = value(a) * value(b);
    Var o = push(std::move(out), needs(a) || needs(b));
    record(o, [this, a, b, o] {
      const M& g = grad(o);
      if (needs(a)) acc(a).noalias() += g * value(b).transpose();
      if (needs(b)) acc(b).noalias() += value(a).transpose() * g;
    });
    return o;
  }

  // x * w + b, with b a 1 x n row broadcast over rows.
  Var linear(Var x, Var w, Var b) {
    M out = value(x) * value(w);
    out.rowwise() += value(b).row(0);
    Var o = push(std::move(out), needs(x) || needs(w) || needs(b));
    record(o, [this, x, w, b, o] {
      const M& g = grad(o);
      if (needs(x)) acc(x).noalias() += g * value(w).transpose();
      if (needs(w)) acc(w).noalias() += value(x).transpose() * g;
      if (needs(b)) acc(b).row(0) += g.colwise().sum();
    });
    return o;
  }

  Var add(Var a, Var b) {
    M out = value(a) + value(b);
    Var o = push(std::move(out), needs(a) || needs(b));
    record(o, [this, a, b, o] {
      if (needs(a)) acc(a) += grad(o);
      if (needs(b)) acc(b) += grad(o);
    });
    return o;
  }

  Var scale(Var a, T s) {
    M out = value(a) * s;
    Var o = push(std::move(out), needs(a));
    record(o, [this, a, s, o] { acc(a) += grad(o) * s; });
    return o;
  }

  Var sum(Var a) {
    M out(1, 1);
    out(0, 0) = value(a).sum();
    Var o = push(std::move(out), needs(a));
    record(o, [this, a, o] { acc(a).array() += grad(o)(0, 0); });
    return o;
  }

  Var layer_norm(Var x, Var gain, Var bias, T eps = T(1e-5)) {
    const M& xv = value(x);
    const Eigen::Index d = xv.cols();
    M xhat(xv.rows(), d);
    std::vector<T> rstd(static_cast<std::size_t>(xv.rows()));
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const T mu = xv.row(i).mean();
      const T var = (xv.row(i).array() - mu).square().mean();
      const T r = T(1) / std::sqrt(var + eps);
      rstd[static_cast<std::size_t>(i)] = r;
      xhat.row(i) = (xv.row(i).array() - mu) * r;
    }
    M out = xhat.array().rowwise() * value(gain).row(0).array();
    out.rowwise() += value(bias).row(0);
    Var o = push(std::move(out), needs(x) || needs(gain) || needs(bias));
    record(o, [this, x, gain, bias, o, xhat = std::move(xhat), rstd = std::move(rstd)] {
      const M& g = grad(o);
      if (needs(gain)) acc(gain).row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
      if (needs(bias)) acc(bias).row(0) += g.colwise().sum();
      if (needs(x)) {
        M& gx = acc(x);
        const auto gamma = value(gain).row(0).array();
        const T inv_d = T(1) / static_cast<T>(xhat.cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          const auto dxhat = (g.row(i).array() * gamma).eval();
          const T m1 = dxhat.sum() * inv_d;
          const T m2 = (dxhat * xhat.row(i).array()).sum() * inv_d;
          gx.row(i).array() += rstd[static_cast<std::size_t>(i)] * (dxhat - m1 - xhat.row(i).array() * m2);
        }
      }
    });
    return o;
  }

  Var gelu(Var x) {
    M out = kernels::gelu<T>(value(x));
    Var o = push(std::move(out), needs(x));
    record(o, [this, x, o] {
      acc(x).array() += grad(o).array() * kernels::gelu_grad<T>(value(x)).array();
    });
    return o;
  }

  // scale * table[ids[i]] + sinusoidal(position_offset + i)
  Var embed(Var table, std::span<const int> ids, T scale, int position_offset) {
    const M& tab = value(table);
    M out = kernels::sinusoidal_positions<T>(position_offset, static_cast<Eigen::Index>(ids.size()), tab.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) += scale * tab.row(ids[i]);
    Var o = push(std::move(out), needs(table));
    record(o, [this, table, o, scale, idv = std::vector<int>(ids.begin(), ids.end())] {
      M& gt = acc(table);
      const M& g = grad(o);
      for (std::size_t i = 0; i < idv.size(); ++i) gt.row(idv[i]) += scale * g.row(static_cast<Eigen::Index>(i));
    });
    return o;
  }

  // Inverted dropout; identity when rate == 0.
  Var dropout(Var x, double rate, std::uint64_t seed) {
    if (rate <= 0.0) return x;
    Rng rng(seed);
    const M& xv = value(x);
    M mask(xv.rows(), xv.cols());
    const T keep = static_cast<T>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform_real(rng) < rate ? T(0) : keep;
    M out = xv.cwiseProduct(mask);
    Var o = push(std::move(out), needs(x));
    record(o, [this, x, o, mask = std::move(mask)] { acc(x) += grad(o).cwiseProduct(mask); });
    return o;
  }

  // Stacked per-head attention probabilities, see kernels::attention_probs.
  Var attention_probs(Var q, Var k, int heads, std::span<const char> key_valid, bool causal) {
    M p = kernels::attention_probs<T>(value(q), value(k), heads, key_valid, causal);
    Var o = push(std::move(p), needs(q) || needs(k));
    record(o, [this, q, k, o, heads] {
      const M& pv = value(o);
      const M& g = grad(o);
      const M& qv = value(q);
      const M& kv = value(k);
      const Eigen::Index tq = qv.rows();
      const Eigen::Index dk = qv.cols() / heads;
      const T sc = T(1) / std::sqrt(static_cast<T>(dk));
      for (int h = 0; h < heads; ++h) {
        const auto P = pv.middleRows(h * tq, tq);
        const auto G = g.middleRows(h * tq, tq);
        const Eigen::Matrix<T, Eigen::Dynamic, 1> rs = P.cwiseProduct(G).rowwise().sum();
        M dsc = (G.colwise() - rs).cwiseProduct(P);
        dsc *= sc;
        if (needs(q)) acc(q).middleCols(h * dk, dk).noalias() += dsc * kv.middleCols(h * dk, dk);
        if (needs(k)) acc(k).middleCols(h * dk, dk).noalias() += dsc.transpose() * qv.middleCols(h * dk, dk);
      }
    });
    return o;
  }

  // Per-head probs (heads*Tq x Tk) times V (Tk x d) -> Tq x d, heads concatenated.
  Var attention_apply(Var probs, Var v, int heads) {
    const M& pv = value(probs);
    const M& vv = value(v);
    const Eigen::Index tq = pv.rows() / heads;
    const Eigen::Index dk = vv.cols() / heads;
    M out(tq, vv.cols());
    for (int h = 0; h < heads; ++h)
      out.middleCols(h * dk, dk).noalias() = pv.middleRows(h * tq, tq) * vv.middleCols(h * dk, dk);
    Var o = push(std::move(out), needs(probs) || needs(v));
    record(o, [this, probs, v, o, heads, tq, dk] {
      const M& g = grad(o);
      for (int h = 0; h < heads; ++h) {
        const auto G = g.middleCols(h * dk, dk);
        if (needs(probs)) acc(probs).middleRows(h * tq, tq).noalias() += G * value(v).middleCols(h * dk, dk).transpose();
        if (needs(v)) acc(v).middleCols(h * dk, dk).noalias() += value(probs).middleRows(h * tq, tq).transpose() * G;
      }
    });
    return o;
  }

  Var head_mean(Var probs, int heads, std::span<const int> selected) {
    M out = kernels::head_mean<T>(value(probs), heads, selected);
    Var o = push(std::move(out), needs(probs));
    record(o, [this, probs, o, heads, sel = std::vector<int>(selected.begin(), selected.end())] {
      const M& g = grad(o);
      const Eigen::Index tq = g.rows();
      const T w = T(1) / static_cast<T>(sel.size());
      for (int h : sel) acc(probs).middleRows(h * tq, tq) += g * w;
    });
    return o;
  }

  Var scatter_columns(Var by_position, std::span<const int> ids, Eigen::Index vocab) {
    M out = kernels::scatter_columns<T>(value(by_position), ids, vocab);
    Var o = push(std::move(out), needs(by_position));
    record(o, [this, by_position, o, idv = std::vector<int>(ids.begin(), ids.end())] {
      const M& g = grad(o);
      M& gp = acc(by_position);
      for (Eigen::Index t = 0; t < g.rows(); ++t)
        for (std::size_t s = 0; s < idv.size(); ++s) gp(t, static_cast<Eigen::Index>(s)) += g(t, idv[s]);
    });
    return o;
  }

  Var softmax_rows(Var x) {
    M out = kernels::softmax_rows<T>(value(x));
    Var o = push(std::move(out), needs(x));
    record(o, [this, x, o] {
      const M& p = value(o);
      const M& g = grad(o);
      const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = p.cwiseProduct(g).rowwise().sum();
      acc(x).array() += p.array() * (g.colwise() - dot).array();
    });
    return o;
  }

  Var masked_row_mean(Var x, std::span<const char> valid) {
    M out = kernels::masked_row_mean<T>(value(x), valid);
    Var o = push(std::move(out), needs(x));
    record(o, [this, x, o, vmask = std::vector<char>(valid.begin(), valid.end())] {
      const M& xv = value(x);
      Eigen::Index n = 0;
      for (Eigen::Index i = 0; i < xv.rows(); ++i) n += (vmask.empty() || vmask[static_cast<std::size_t>(i)]) ? 1 : 0;
      if (n == 0) return;
      M& gx = acc(x);
      for (Eigen::Index i = 0; i < xv.rows(); ++i)
        if (vmask.empty() || vmask[static_cast<std::size_t>(i)]) gx.row(i) += grad(o).row(0) / static_cast<T>(n);
    });
    return o;
  }

  // sigmoid(states_t . mean) per row -> T x 1
  Var generation_probs(Var states, Var mean) {
    M out = kernels::generation_probs<T>(value(states), value(mean).row(0));
    Var o = push(std::move(out), needs(states) || needs(mean));
    record(o, [this, states, mean, o] {
      const M& p = value(o);
      const M& g = grad(o);
      for (Eigen::Index t = 0; t < p.rows(); ++t) {
        const T dz = g(t, 0) * p(t, 0) * (T(1) - p(t, 0));
        if (needs(states)) acc(states).row(t) += dz * value(mean).row(0);
        if (needs(mean)) acc(mean).row(0) += dz * value(states).row(t);
      }
    });
    return o;
  }

  Var mixture(Var p, Var a, Var b) {
    M out = kernels::mixture<T>(value(p), value(a), value(b));
    Var o = push(std::move(out), needs(p) || needs(a) || needs(b));
    record(o, [this, p, a, b, o] {
      const M& g = grad(o);
      const M& pv = value(p);
      for (Eigen::Index t = 0; t < g.rows(); ++t) {
        if (needs(p)) acc(p)(t, 0) += g.row(t).dot(value(a).row(t) - value(b).row(t));
        if (needs(a)) acc(a).row(t) += pv(t, 0) * g.row(t);
        if (needs(b)) acc(b).row(t) += (T(1) - pv(t, 0)) * g.row(t);
      }
    });
    return o;
  }

  // Mean over non-negative targets of -log max(P[t, y_t], floor). Targets
  // < 0 are skipped. Clamped entries pass no gradient and are counted.
  Var nll(Var probs, std::span<const int> targets, T floor, long* clamped = nullptr) {
    const M& pv = value(probs);
    T total = 0;
    long n = 0, clamps = 0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (targets[t] < 0) continue;
      T pr = pv(static_cast<Eigen::Index>(t), targets[t]);
      if (!(pr > floor)) {
        pr = floor;
        ++clamps;
      }
      total -= std::log(pr);
      ++n;
    }
    if (clamped) *clamped += clamps;
    M out(1, 1);
    out(0, 0) = n > 0 ? total / static_cast<T>(n) : T(0);
    Var o = push(std::move(out), needs(probs));
    record(o, [this, probs, o, floor, n, tv = std::vector<int>(targets.begin(), targets.end())] {
      if (n == 0) return;
      const T g = grad(o)(0, 0) / static_cast<T>(n);
      M& gp = acc(probs);
      for (std::size_t t = 0; t < tv.size(); ++t) {
        if (tv[t] < 0) continue;
        const T pr = value(probs)(static_cast<Eigen::Index>(t), tv[t]);
        if (pr > floor) gp(static_cast<Eigen::Index>(t), tv[t]) -= g / pr;
      }
    });
    return o;
  }

  // Mean over non-negative targets of -log softmax(logits)[t, y_t].
  Var cross_entropy(Var logits, std::span<const int> targets) {
    const M& lv = value(logits);
    M probs = kernels::softmax_rows<T>(lv);
    T total = 0;
    long n = 0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (targets[t] < 0) continue;
      const auto row = lv.row(static_cast<Eigen::Index>(t));
      const T mx = row.maxCoeff();
      const T lse = mx + std::log((row.array() - mx).exp().sum());
      total += lse - row(targets[t]);
      ++n;
    }
    M out(1, 1);
    out(0, 0) = n > 0 ? total / static_cast<T>(n) : T(0);
    Var o = push(std::move(out), needs(logits));
    record(o, [this, logits, o, n, probs = std::move(probs), tv = std::vector<int>(targets.begin(), targets.end())] {
      if (n == 0) return;
      const T g = grad(o)(0, 0) / static_cast<T>(n);
      M& gl = acc(logits);
      for (std::size_t t = 0; t < tv.size(); ++t) {
        if (tv[t] < 0) continue;
        const auto r = static_cast<Eigen::Index>(t);
        gl.row(r) += g * probs.row(r);
        gl(r, tv[t]) -= g;
      }
    });
    return o;
  }

 private:
  struct Node {
    M own;
    const M* ext = nullptr;
    M grad;
    bool has_grad = false;
    bool needs_grad = false;
    std::function<void()> back;

    const M& val() const { return ext ? *ext : own; }
  };

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
  bool needs(Var v) const { return node(v).needs_grad; }

  M& acc(Var v) {
    Node& n = node(v);
    if (!n.has_grad) {
      n.grad = M::Zero(n.val().rows(), n.val().cols());
      n.has_grad = true;
    }
    return n.grad;
  }

  Var push(M value, bool needs_grad) {
    Node n;
    n.own = std::move(value);
    n.needs_grad = needs_grad && record_;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  Var push_ext(const M* value, bool needs_grad) {
    Node n;
    n.ext = value;
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  template <typename F>
  void record(Var o, F&& fn) {
    if (node(o).needs_grad) node(o).back = std::forward<F>(fn);
  }

  bool record_;
  std::deque<Node> nodes_;
};

}  // namespace tempgen::autograd
