#include "tempgen/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "tempgen/error.hpp"
#include "tempgen/rng.hpp"
#include "tempgen/template_codec.hpp"

namespace tempgen::eval {

PRF to_prf(const Counts& c) {
  if (c.predicted == 0 && c.gold == 0) return {1.0, 1.0, 1.0};
  PRF r;
  r.precision = c.predicted > 0 ? static_cast<double>(c.correct) / static_cast<double>(c.predicted) : 0.0;
  r.recall = c.gold > 0 ? static_cast<double>(c.correct) / static_cast<double>(c.gold) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Kuhn-Munkres

namespace {

// Min-cost perfect matching on a square matrix; returns row -> column.
std::vector<int> hungarian_min(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1)), v(static_cast<std::size_t>(n + 1));
  std::vector<int> p(static_cast<std::size_t>(n + 1)), way(static_cast<std::size_t>(n + 1));
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

// Best total score over the given rows and columns.
double best_total(const ScoreMatrix& s, const std::vector<int>& rows, const std::vector<int>& cols) {
  const std::size_t n = std::max(rows.size(), cols.size());
  if (n == 0 || rows.empty() || cols.empty()) return 0.0;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      cost[r][c] = -s[static_cast<std::size_t>(rows[r])][static_cast<std::size_t>(cols[c])];
  const auto match = hungarian_min(cost);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int c = match[r];
    if (c >= 0 && static_cast<std::size_t>(c) < cols.size())
      total += s[static_cast<std::size_t>(rows[r])][static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])];
  }
  return total;
}

}  // namespace

Assignment kuhn_munkres(const ScoreMatrix& scores) {
  Assignment out;
  const int m = static_cast<int>(scores.size());
  const int n = m > 0 ? static_cast<int>(scores.front().size()) : 0;
  for (const auto& row : scores) {
    if (static_cast<int>(row.size()) != n) throw DataError("kuhn_munkres: ragged score matrix");
    for (double x : row)
      if (!std::isfinite(x)) throw DataError("kuhn_munkres: non-finite score");
  }
  if (m == 0 || n == 0) return out;

  std::vector<int> all_rows(static_cast<std::size_t>(m)), all_cols(static_cast<std::size_t>(n));
  for (int i = 0; i < m; ++i) all_rows[static_cast<std::size_t>(i)] = i;
  for (int j = 0; j < n; ++j) all_cols[static_cast<std::size_t>(j)] = j;
  const double optimum = best_total(scores, all_rows, all_cols);
  const double tol = 1e-9 * std::max(1.0, std::abs(optimum));

  // Fix rows one at a time to the smallest column that still admits an
  // optimal completion; this yields the lexicographically smallest optimum.
  std::vector<char> col_used(static_cast<std::size_t>(n), 0);
  double fixed = 0.0;
  int unassigned = 0;
  const int max_unassigned = std::max(0, m - n);
  for (int r = 0; r < m; ++r) {
    std::vector<int> rest_rows;
    for (int i = r + 1; i < m; ++i) rest_rows.push_back(i);
    bool placed = false;
    for (int c = 0; c < n && !placed; ++c) {
      if (col_used[static_cast<std::size_t>(c)]) continue;
      std::vector<int> rest_cols;
      for (int j = 0; j < n; ++j)
        if (!col_used[static_cast<std::size_t>(j)] && j != c) rest_cols.push_back(j);
      const double s = scores[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (fixed + s + best_total(scores, rest_rows, rest_cols) >= optimum - tol) {
        col_used[static_cast<std::size_t>(c)] = 1;
        fixed += s;
        out.pairs.emplace_back(r, c);
        placed = true;
      }
    }
    if (!placed) {
      if (unassigned >= max_unassigned)
        throw RuntimeFailure("kuhn_munkres: failed to complete an optimal assignment");
      ++unassigned;
    }
  }
  out.total = 0.0;
  for (const auto& [r, c] : out.pairs) out.total += scores[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return out;
}

// ---------------------------------------------------------------------------
// CEAF-REE

MentionSet make_mention_set(std::vector<std::string> surfaces) {
  MentionSet out;
  for (auto& s : surfaces) {
    auto n = codec::normalize_surface(s);
    if (!n.empty()) out.push_back(std::move(n));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MentionSet mention_set(const corpus::Entity& entity) {
  std::vector<std::string> surfaces;
  for (const auto& m : entity.mentions) surfaces.push_back(m.surface);
  return make_mention_set(std::move(surfaces));
}

namespace {

bool is_subset(const MentionSet& a, const MentionSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::size_t overlap(const MentionSet& a, const MentionSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

std::vector<MentionSet> dedup(const std::vector<MentionSet>& in) {
  std::vector<MentionSet> out;
  std::set<MentionSet> seen;
  for (const auto& e : in)
    if (!e.empty() && seen.insert(e).second) out.push_back(e);
  return out;
}

Counts score_role(const std::vector<MentionSet>& pred_raw, const std::vector<MentionSet>& gold) {
  const auto pred = dedup(pred_raw);
  Counts c;
  c.predicted = static_cast<long>(pred.size());
  c.gold = static_cast<long>(gold.size());
  if (pred.empty() || gold.empty()) return c;
  ScoreMatrix m(pred.size(), std::vector<double>(gold.size(), 0.0));
  for (std::size_t p = 0; p < pred.size(); ++p)
    for (std::size_t g = 0; g < gold.size(); ++g) m[p][g] = is_subset(pred[p], gold[g]) ? 1.0 : 0.0;
  const auto a = kuhn_munkres(m);
  for (const auto& [p, g] : a.pairs)
    if (m[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)] > 0.0) ++c.correct;
  return c;
}

}  // namespace

CeafReport ceaf_ree(const RoleEntities& pred, const RoleEntities& gold,
                    const std::vector<std::string>& roles, bool strict) {
  for (const auto* side : {&pred, &gold})
    for (const auto& [role, _] : *side)
      if (std::find(roles.begin(), roles.end(), role) == roles.end() && strict)
        throw DataError("ceaf_ree: unknown role label '" + role + "'");
  static const std::vector<MentionSet> kNone;
  CeafReport rep;
  for (const auto& role : roles) {
    auto pit = pred.find(role);
    auto git = gold.find(role);
    RoleScore rs;
    rs.role = role;
    rs.counts = score_role(pit == pred.end() ? kNone : pit->second, git == gold.end() ? kNone : git->second);
    rs.prf = to_prf(rs.counts);
    rep.micro_counts += rs.counts;
    rep.roles.push_back(std::move(rs));
  }
  rep.micro = to_prf(rep.micro_counts);
  return rep;
}

CeafAccumulator::CeafAccumulator(std::vector<std::string> roles)
    : roles_(std::move(roles)), counts_(roles_.size()) {}

void CeafAccumulator::add(const CeafReport& doc_report) {
  for (const auto& rs : doc_report.roles) {
    auto it = std::find(roles_.begin(), roles_.end(), rs.role);
    if (it == roles_.end()) throw DataError("CeafAccumulator: unknown role '" + rs.role + "'");
    counts_[static_cast<std::size_t>(it - roles_.begin())] += rs.counts;
  }
}

CeafReport CeafAccumulator::report() const {
  CeafReport rep;
  for (std::size_t i = 0; i < roles_.size(); ++i) {
    rep.roles.push_back({roles_[i], counts_[i], to_prf(counts_[i])});
    rep.micro_counts += counts_[i];
  }
  rep.micro = to_prf(rep.micro_counts);
  return rep;
}

// ---------------------------------------------------------------------------
// Relations

namespace {

using CanonicalRelation = std::vector<std::pair<int, std::string>>;

CanonicalRelation canonical(const Relation& r) {
  CanonicalRelation out;
  for (const auto& m : r) out.emplace_back(m.entity, m.type);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

Counts relation_counts(const RelationSide& pred, const RelationSide& gold, int arity) {
  std::set<CanonicalRelation> gold_set;
  for (const auto& r : gold.relations) {
    auto c = canonical(r);
    if (static_cast<int>(c.size()) != arity)
      throw DataError("relation_f1: gold relation of arity " + std::to_string(c.size()) +
                      " in an arity-" + std::to_string(arity) + " comparison");
    gold_set.insert(std::move(c));
  }
  std::set<CanonicalRelation> pred_set;
  for (const auto& r : pred.relations) pred_set.insert(canonical(r));

  std::vector<int> align(pred.entities.size(), -1);
  if (!pred.entities.empty() && !gold.entities.empty()) {
    ScoreMatrix m(pred.entities.size(), std::vector<double>(gold.entities.size(), 0.0));
    for (std::size_t p = 0; p < pred.entities.size(); ++p)
      for (std::size_t g = 0; g < gold.entities.size(); ++g)
        m[p][g] = static_cast<double>(overlap(pred.entities[p], gold.entities[g]));
    for (const auto& [p, g] : kuhn_munkres(m).pairs)
      if (m[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)] > 0.0) align[static_cast<std::size_t>(p)] = g;
  }

  Counts c;
  c.predicted = static_cast<long>(pred_set.size());
  c.gold = static_cast<long>(gold_set.size());
  for (const auto& r : pred_set) {
    if (static_cast<int>(r.size()) != arity) continue;
    CanonicalRelation mapped;
    bool ok = true;
    for (const auto& [e, type] : r) {
      const int g = (e >= 0 && static_cast<std::size_t>(e) < align.size()) ? align[static_cast<std::size_t>(e)] : -1;
      if (g < 0) {
        ok = false;
        break;
      }
      mapped.emplace_back(g, type);
    }
    if (!ok) continue;
    std::sort(mapped.begin(), mapped.end());
    mapped.erase(std::unique(mapped.begin(), mapped.end()), mapped.end());
    if (gold_set.count(mapped)) ++c.correct;
  }
  return c;
}

PRF relation_f1(const RelationSide& pred, const RelationSide& gold, int arity) {
  return to_prf(relation_counts(pred, gold, arity));
}

// ---------------------------------------------------------------------------
// Paired bootstrap

namespace {

template <typename Item, typename Metric>
SignificanceResult bootstrap(std::span<const Item> a, std::span<const Item> b, int resamples,
                             std::uint64_t seed, Metric metric) {
  if (a.empty() || b.empty()) throw DataError("paired_bootstrap: empty input");
  if (a.size() != b.size()) throw DataError("paired_bootstrap: score lists differ in length");
  if (resamples <= 0) throw ConfigError("paired_bootstrap: resamples must be positive");
  const std::size_t n = a.size();
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;

  SignificanceResult res;
  res.delta = metric(a, all) - metric(b, all);
  res.resamples = resamples;
  res.seed = seed;
  long not_better = 0;
  std::vector<std::size_t> idx(n);
  for (int r = 0; r < resamples; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    for (auto& i : idx) i = uniform_index(rng, n);
    if (metric(a, idx) - metric(b, idx) <= 0.0) ++not_better;
  }
  res.p_value = static_cast<double>(not_better) / static_cast<double>(resamples);
  return res;
}

}  // namespace

SignificanceResult paired_bootstrap(std::span<const double> a, std::span<const double> b, int resamples,
                                    std::uint64_t seed) {
  return bootstrap(a, b, resamples, seed, [](std::span<const double> s, const std::vector<std::size_t>& idx) {
    double sum = 0.0;
    for (auto i : idx) sum += s[i];
    return sum / static_cast<double>(idx.size());
  });
}

SignificanceResult paired_bootstrap(std::span<const Counts> a, std::span<const Counts> b, int resamples,
                                    std::uint64_t seed) {
  return bootstrap(a, b, resamples, seed, [](std::span<const Counts> s, const std::vector<std::size_t>& idx) {
    Counts total;
    for (auto i : idx) total += s[i];
    return to_prf(total).f1;
  });
}

}  // namespace tempgen::eval
