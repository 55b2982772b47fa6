#pragma once

// Shared fixtures and brute-force oracles for the unit and acceptance tests.
// The oracles enumerate every alignment instead of solving an assignment
// problem, so they share no code with the scorers they check.

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <vector>

#include "tempgen/autograd.hpp"
#include "tempgen/evaluation.hpp"
#include "tempgen/model.hpp"
#include "tempgen/rng.hpp"
#include "tempgen/topk_copy.hpp"

namespace tempgen::testing {

// 1+1 layers, d_model=8, h=2, V=12, source 6, target 5.
inline model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.vocab_size = 12;
  c.max_src_len = 6;
  c.max_tgt_len = 5;
  c.dropout = 0.0;
  return c;
}

struct TinyExample {
  std::vector<int> src{10, 11, 4, 10, 5, 0};  // trailing PAD
  std::vector<int> tgt_in{1, 10, 11, 6, 7};
  std::vector<int> targets{10, 11, 6, 7, 2};
};

// Teacher-forced loss of the copy model; fills analytic gradients when asked.
template <typename T>
double tiny_loss(const model::Params<T>& params, const model::ModelConfig& cfg, const TinyExample& ex,
                 const copy::CopyConfig& copy, std::span<const int> heads, model::Params<T>* grads) {
  autograd::Graph<T> g(grads != nullptr);
  auto bound = model::bind(g, params, grads != nullptr);
  auto trace = model::forward(g, bound, cfg, ex.src, ex.tgt_in);
  auto out = copy::copy_loss(g, trace, ex.src, ex.targets, copy, heads, cfg.vocab_size);
  if (grads) {
    g.backward(out.loss);
    model::collect_gradients(g, bound, *grads);
  }
  return static_cast<double>(g.scalar(out.loss));
}

// ---- assignment oracle -----------------------------------------------------

// Every injective row->column map of size min(m, n), as vectors where -1
// means unassigned.
inline void for_each_assignment(int m, int n, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> cur(static_cast<std::size_t>(m), -1);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  const int need = std::min(m, n);
  std::function<void(int, int)> rec = [&](int row, int assigned) {
    if (row == m) {
      if (assigned == need) fn(cur);
      return;
    }
    if (m - row > need - assigned) rec(row + 1, assigned);  // leave unassigned
    for (int c = 0; c < n; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      used[static_cast<std::size_t>(c)] = 1;
      cur[static_cast<std::size_t>(row)] = c;
      rec(row + 1, assigned + 1);
      cur[static_cast<std::size_t>(row)] = -1;
      used[static_cast<std::size_t>(c)] = 0;
    }
  };
  rec(0, 0);
}

inline double brute_force_max(const eval::ScoreMatrix& s) {
  const int m = static_cast<int>(s.size());
  const int n = m ? static_cast<int>(s[0].size()) : 0;
  double best = 0.0;
  for_each_assignment(m, n, [&](const std::vector<int>& a) {
    double t = 0.0;
    for (int r = 0; r < m; ++r)
      if (a[static_cast<std::size_t>(r)] >= 0) t += s[static_cast<std::size_t>(r)][static_cast<std::size_t>(a[static_cast<std::size_t>(r)])];
    best = std::max(best, t);
  });
  return best;
}

// Optimal alignment with ties going to the lexicographically smallest
// row->column vector, unassigned ordered after every column.
inline std::vector<int> brute_force_alignment(const eval::ScoreMatrix& s) {
  const int m = static_cast<int>(s.size());
  const int n = m ? static_cast<int>(s[0].size()) : 0;
  std::vector<int> best;
  double best_total = -1.0;
  auto key = [n](const std::vector<int>& a) {
    std::vector<int> k(a);
    for (int& v : k)
      if (v < 0) v = n;
    return k;
  };
  for_each_assignment(m, n, [&](const std::vector<int>& a) {
    double t = 0.0;
    for (int r = 0; r < m; ++r)
      if (a[static_cast<std::size_t>(r)] >= 0) t += s[static_cast<std::size_t>(r)][static_cast<std::size_t>(a[static_cast<std::size_t>(r)])];
    if (t > best_total || (t == best_total && key(a) < key(best))) {
      best_total = t;
      best = a;
    }
  });
  return best;
}

// ---- CEAF-REE oracle ---------------------------------------------------------

inline bool is_subset(const eval::MentionSet& a, const eval::MentionSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// Per role: merge duplicate predictions, then the best number of subset
// matches over every injective alignment.
inline eval::Counts brute_force_ceaf(const eval::RoleEntities& pred, const eval::RoleEntities& gold,
                                     const std::vector<std::string>& roles) {
  eval::Counts total;
  for (const auto& role : roles) {
    std::vector<eval::MentionSet> p, g;
    if (auto it = pred.find(role); it != pred.end())
      for (const auto& e : it->second)
        if (std::find(p.begin(), p.end(), e) == p.end()) p.push_back(e);
    if (auto it = gold.find(role); it != gold.end()) g = it->second;
    eval::ScoreMatrix s(p.size(), std::vector<double>(g.size(), 0.0));
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) s[i][j] = is_subset(p[i], g[j]) ? 1.0 : 0.0;
    total.correct += static_cast<long>(p.empty() || g.empty() ? 0.0 : brute_force_max(s));
    total.predicted += static_cast<long>(p.size());
    total.gold += static_cast<long>(g.size());
  }
  return total;
}

// ---- relation oracle -------------------------------------------------------

inline long shared_mentions(const eval::MentionSet& a, const eval::MentionSet& b) {
  long n = 0;
  for (const auto& x : a) n += std::binary_search(b.begin(), b.end(), x) ? 1 : 0;
  return n;
}

using MemberSet = std::set<std::pair<int, std::string>>;

inline MemberSet members(const eval::Relation& r) {
  MemberSet s;
  for (const auto& m : r) s.insert({m.entity, m.type});
  return s;
}

// Enumerates every alignment, keeps the optimal one (same tie rule as the
// scorer's documentation), drops zero-overlap pairs and compares relation sets.
inline eval::Counts brute_force_relations(const eval::RelationSide& pred, const eval::RelationSide& gold, int arity) {
  eval::ScoreMatrix s(pred.entities.size(), std::vector<double>(gold.entities.size(), 0.0));
  for (std::size_t i = 0; i < pred.entities.size(); ++i)
    for (std::size_t j = 0; j < gold.entities.size(); ++j)
      s[i][j] = static_cast<double>(shared_mentions(pred.entities[i], gold.entities[j]));
  std::vector<int> align(pred.entities.size(), -1);
  if (!pred.entities.empty() && !gold.entities.empty()) {
    align = brute_force_alignment(s);
    for (std::size_t i = 0; i < align.size(); ++i)
      if (align[i] >= 0 && s[i][static_cast<std::size_t>(align[i])] == 0.0) align[i] = -1;
  }
  std::set<MemberSet> gold_set, pred_set;
  for (const auto& r : gold.relations) gold_set.insert(members(r));
  for (const auto& r : pred.relations) pred_set.insert(members(r));
  eval::Counts c;
  c.gold = static_cast<long>(gold_set.size());
  c.predicted = static_cast<long>(pred_set.size());
  for (const auto& r : pred_set) {
    if (static_cast<int>(r.size()) != arity) continue;
    MemberSet mapped;
    bool ok = true;
    for (const auto& [e, t] : r) {
      const int gidx = align[static_cast<std::size_t>(e)];
      if (gidx < 0) {
        ok = false;
        break;
      }
      mapped.insert({gidx, t});
    }
    if (ok && gold_set.count(mapped)) ++c.correct;
  }
  return c;
}

}  // namespace tempgen::testing
