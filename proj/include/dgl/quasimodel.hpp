#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgl/bits.hpp"
#include "dgl/formula.hpp"
#include "dgl/poset_model.hpp"
#include "dgl/state_space.hpp"

namespace dgl {

enum class QmKind { Document, Order, Type, Coherence, Sensibility, Continuity, Omega };

struct QuasimodelError : std::runtime_error {
  QmKind kind;
  QuasimodelError(QmKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Finite labelled strict poset with a transition relation S.  Validation
// enforces the four quasimodel conditions: labelled-poset coherence, pointwise
// sensibility of S, continuity of S, and seriality plus omega-sensibility.
struct Quasimodel {
  ClosureRef sigma;
  std::vector<std::string> names;
  std::vector<Bits> below;  // transitively closed strict order
  std::vector<std::uint64_t> label;
  std::vector<std::vector<int>> succ;  // sorted successor lists

  int size() const { return static_cast<int>(names.size()); }

  int point_index(const std::string& n) const {
    for (int i = 0; i < size(); ++i)
      if (names[i] == n) return i;
    return -1;
  }

  bool has_edge(int x, int y) const {
    return std::binary_search(succ[x].begin(), succ[x].end(), y);
  }
};

inline void check_quasimodel(const Quasimodel& q) {
  const auto& ops = detail::closure_ops(*q.sigma);
  int n = q.size();
  for (int i = 0; i < n; ++i)
    if (!is_type_mask(*q.sigma, q.label[i]))
      throw QuasimodelError(QmKind::Type,
                            "label of point '" + q.names[i] + "' is not a Sigma-type");

  if (auto viol = coherence_violation(*q.sigma, q.below, q.label, q.names))
    throw QuasimodelError(QmKind::Coherence, *viol);

  for (int x = 0; x < n; ++x)
    for (int y : q.succ[x])
      if (!sensible_masks(*q.sigma, q.label[x], q.label[y]))
        throw QuasimodelError(QmKind::Sensibility, "sensibility: S-pair ('" + q.names[x] +
                                                       "','" + q.names[y] + "') is not sensible");

  // Continuity: preimages of downsets are downsets.  For x' below x with
  // x S y there must be y' below-or-equal y with x' S y'.
  for (int x = 0; x < n; ++x)
    for (int y : q.succ[x])
      for (int x2 = 0; x2 < n; ++x2) {
        if (!q.below[x].test(x2)) continue;
        bool ok = false;
        for (int y2 : q.succ[x2])
          if (y2 == y || q.below[y].test(y2)) {
            ok = true;
            break;
          }
        if (!ok)
          throw QuasimodelError(QmKind::Continuity,
                                "continuity: '" + q.names[x2] + "' below '" + q.names[x] +
                                    "' has no S-successor below-or-equal '" + q.names[y] + "'");
      }

  for (int x = 0; x < n; ++x)
    if (q.succ[x].empty())
      throw QuasimodelError(QmKind::Omega, "seriality: point '" + q.names[x] +
                                               "' has no S-successor");

  // Omega-sensibility by BFS over S from each obligated point.  All failures
  // are reported together.
  std::string omega_bad;
  for (int x = 0; x < n; ++x) {
    for (std::size_t k = 0; k < ops.evt_reps.size(); ++k) {
      int e = ops.evt_reps[k];
      if (!((q.label[x] >> e) & 1u)) continue;
      std::vector<char> seen(n, 0);
      std::deque<int> bfs{x};
      seen[x] = 1;
      bool realized = false;
      while (!bfs.empty() && !realized) {
        int y = bfs.front();
        bfs.pop_front();
        if (detail::ClosureOps::holds(q.label[y], ops.evt_child[k])) realized = true;
        for (int z : q.succ[y])
          if (!seen[z]) {
            seen[z] = 1;
            bfs.push_back(z);
          }
      }
      if (!realized) {
        if (!omega_bad.empty()) omega_bad += "; ";
        omega_bad += "obligation " + print(q.sigma->posreps()[e]) + " at point '" + q.names[x] +
                     "' is never realized along S";
      }
    }
  }
  if (!omega_bad.empty())
    throw QuasimodelError(QmKind::Omega, "omega-sensibility: " + omega_bad);
}

inline Quasimodel make_quasimodel(ClosureRef sigma, std::vector<std::string> names,
                                  const std::vector<std::pair<std::string, std::string>>& order_edges,
                                  const std::vector<std::pair<std::string, std::string>>& s_edges,
                                  const std::map<std::string, std::vector<Node>>& labels) {
  Quasimodel q;
  q.sigma = std::move(sigma);
  q.names = std::move(names);
  int n = q.size();
  std::unordered_map<std::string, int> idx;
  for (int i = 0; i < n; ++i) {
    if (idx.count(q.names[i]))
      throw QuasimodelError(QmKind::Document, "duplicate point '" + q.names[i] + "'");
    idx[q.names[i]] = i;
  }
  auto at = [&](const std::string& p) {
    auto it = idx.find(p);
    if (it == idx.end()) throw QuasimodelError(QmKind::Document, "unknown point '" + p + "'");
    return it->second;
  };
  std::vector<std::pair<int, int>> edges;
  for (auto& [lo, hi] : order_edges) edges.emplace_back(at(lo), at(hi));
  try {
    q.below = close_strict_order(n, edges, q.names);
  } catch (const ModelError& e) {
    throw QuasimodelError(QmKind::Order, e.what());
  }
  q.succ.assign(n, {});
  for (auto& [src, dst] : s_edges) q.succ[at(src)].push_back(at(dst));
  for (auto& lst : q.succ) {
    std::sort(lst.begin(), lst.end());
    lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
  }
  q.label.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    auto it = labels.find(q.names[i]);
    std::vector<Node> listed;
    if (it != labels.end()) listed = it->second;
    try {
      q.label[i] = complete_label_mask(*q.sigma, listed, "point '" + q.names[i] + "'");
    } catch (const StateError& e) {
      throw QuasimodelError(QmKind::Type, e.what());
    }
  }
  check_quasimodel(q);
  return q;
}

// Dynamic poset models are deterministic quasimodels: S is the graph of f and
// labels are the Sigma-truth sets.
inline Quasimodel model_to_quasimodel(const PosetModel& m, ClosureRef sigma) {
  Quasimodel q;
  q.sigma = std::move(sigma);
  q.names = m.names;
  q.below = m.below;
  int n = m.size();
  q.label.assign(n, 0);
  {
    std::unordered_map<Node, Bits> memo;
    for (int r = 0; r < q.sigma->posrep_count(); ++r) {
      Bits t = eval_memo(m, q.sigma->posreps()[r], memo);
      for (int i = 0; i < n; ++i)
        if (t.test(i)) q.label[i] |= std::uint64_t(1) << r;
    }
  }
  q.succ.assign(n, {});
  for (int i = 0; i < n; ++i) q.succ[i].push_back(m.f[i]);
  check_quasimodel(q);
  return q;
}

// The Sigma-state of a quasimodel point: carrier is its downset.
inline State state_at(const Quasimodel& q, int x) {
  std::vector<int> carrier;
  for (int i = 0; i < q.size(); ++i)
    if (i == x || q.below[x].test(i)) carrier.push_back(i);
  State s;
  s.sigma = q.sigma;
  int m = static_cast<int>(carrier.size());
  std::vector<int> pos(q.size(), -1);
  for (int i = 0; i < m; ++i) pos[carrier[i]] = i;
  s.below.assign(m, Bits(m));
  s.label.resize(m);
  for (int i = 0; i < m; ++i) {
    s.names.push_back(q.names[carrier[i]]);
    s.label[i] = q.label[carrier[i]];
    for (int j = 0; j < m; ++j)
      if (q.below[carrier[i]].test(carrier[j])) s.below[i].set(j);
  }
  s.root = pos[x];
  check_state(s);
  return s;
}

// ---------------------------------------------------------------------------
// Lassos: ultimately periodic realising paths, the finite presentation of
// points of the limit model.
// ---------------------------------------------------------------------------

struct Lasso {
  std::vector<int> stem;
  std::vector<int> loop;
};

struct LassoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int lasso_point(const Lasso& l, long i) {
  long s = static_cast<long>(l.stem.size());
  if (i < s) return l.stem[i];
  return l.loop[(i - s) % static_cast<long>(l.loop.size())];
}

inline void check_lasso(const Quasimodel& q, const Lasso& l) {
  if (l.loop.empty()) throw LassoError("lasso loop is empty");
  auto in_range = [&](int p) { return p >= 0 && p < q.size(); };
  for (int p : l.stem)
    if (!in_range(p)) throw LassoError("lasso stem point out of range");
  for (int p : l.loop)
    if (!in_range(p)) throw LassoError("lasso loop point out of range");
  long total = static_cast<long>(l.stem.size() + l.loop.size());
  for (long i = 0; i < total; ++i) {
    int x = lasso_point(l, i), y = lasso_point(l, i + 1);
    if (!q.has_edge(x, y))
      throw LassoError("consecutive lasso points ('" + q.names[x] + "','" + q.names[y] +
                       "') are not S-related");
  }
}

// Advances one position: the shift map on realising paths.
inline Lasso shift(const Lasso& l) {
  if (!l.stem.empty()) return {std::vector<int>(l.stem.begin() + 1, l.stem.end()), l.loop};
  std::vector<int> rot(l.loop.begin() + 1, l.loop.end());
  rot.push_back(l.loop.front());
  return {{}, rot};
}

// Equality of the underlying infinite words, decided on the periodic horizon.
inline bool lasso_equal(const Lasso& a, const Lasso& b) {
  long s = static_cast<long>(std::max(a.stem.size(), b.stem.size()));
  long l = std::lcm(static_cast<long>(a.loop.size()), static_cast<long>(b.loop.size()));
  for (long i = 0; i < s + l; ++i)
    if (lasso_point(a, i) != lasso_point(b, i)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Unwinding: extends a finite path to a lasso presenting a realising path.
// Pending F-obligations are scheduled FIFO; the next point is the first step
// of a shortest S-path to the nearest realization of the queue head, and the
// loop closes at the first repeated (point, queue) configuration.
// ---------------------------------------------------------------------------

inline Lasso extend_to_lasso(const Quasimodel& q, const std::vector<int>& prefix) {
  if (prefix.empty()) throw std::invalid_argument("extend_to_lasso: empty prefix");
  const auto& ops = detail::closure_ops(*q.sigma);
  for (std::size_t i = 0; i + 1 < prefix.size(); ++i)
    if (!q.has_edge(prefix[i], prefix[i + 1]))
      throw LassoError("prefix is not an S-path at position " + std::to_string(i));

  // queue entries are evt-rep list indices (the pending F-formulas)
  std::vector<int> queue;
  auto realized_at = [&](std::size_t k, int pt) {
    return detail::ClosureOps::holds(q.label[pt], ops.evt_child[k]);
  };
  auto process = [&](int pt) {
    std::vector<int> kept;
    for (int k : queue)
      if (!realized_at(k, pt)) kept.push_back(k);
    queue = std::move(kept);
    for (std::size_t k = 0; k < ops.evt_reps.size(); ++k) {
      int e = ops.evt_reps[k];
      if (!((q.label[pt] >> e) & 1u)) continue;
      if (realized_at(k, pt)) continue;
      if (std::find(queue.begin(), queue.end(), static_cast<int>(k)) == queue.end())
        queue.push_back(static_cast<int>(k));
    }
  };

  std::vector<int> path;
  for (int p : prefix) {
    path.push_back(p);
    process(p);
  }

  // First step of a shortest S-path from x to a point realizing head k.
  auto bfs_step = [&](int x, std::size_t k) {
    std::vector<int> parent(q.size(), -2);
    std::deque<int> bfs{x};
    parent[x] = -1;
    int target = -1;
    while (!bfs.empty() && target < 0) {
      int y = bfs.front();
      bfs.pop_front();
      for (int z : q.succ[y]) {
        if (parent[z] != -2) continue;
        parent[z] = y;
        if (realized_at(k, z)) {
          target = z;
          break;
        }
        bfs.push_back(z);
      }
    }
    if (target < 0)
      throw LassoError("pending obligation " + print(q.sigma->posreps()[ops.evt_reps[k]]) +
                       " is unrealizable; quasimodel is not omega-sensible");
    int step = target;
    while (parent[step] != x) step = parent[step];
    return step;
  };

  std::map<std::pair<int, std::vector<int>>, int> seen;
  std::size_t first_recorded = prefix.size() - 1;
  for (;;) {
    std::size_t here = path.size() - 1;
    if (here >= first_recorded) {
      auto key = std::make_pair(path[here], queue);
      auto it = seen.find(key);
      if (it != seen.end()) {
        Lasso l;
        l.stem.assign(path.begin(), path.begin() + it->second);
        l.loop.assign(path.begin() + it->second, path.begin() + here);
        return l;
      }
      seen.emplace(key, static_cast<int>(here));
    }
    int cur = path.back();
    int next = queue.empty() ? q.succ[cur].front() : bfs_step(cur, queue.front());
    path.push_back(next);
    process(next);
  }
}

// ---------------------------------------------------------------------------
// Label coherence along a lasso.  With Sigma-complete labels the realising
// path conditions become biconditionals, decided on stem + two loop
// traversals (positions past the stem are periodic).
// ---------------------------------------------------------------------------

struct CoherenceReport {
  bool ok = true;
  std::string violation;
  explicit operator bool() const { return ok; }
};

inline CoherenceReport lasso_coherence(const Quasimodel& q, const Lasso& l) {
  check_lasso(q, l);
  const auto& ops = detail::closure_ops(*q.sigma);
  long s = static_cast<long>(l.stem.size());
  long L = static_cast<long>(l.loop.size());
  auto fail = [&](long m, const std::string& msg) {
    return CoherenceReport{false, "position " + std::to_string(m) + " (point '" +
                                      q.names[lasso_point(l, m)] + "'): " + msg};
  };
  for (long m = 0; m < s + L; ++m) {
    int x = lasso_point(l, m), y = lasso_point(l, m + 1);
    for (std::size_t k = 0; k < ops.next_reps.size(); ++k) {
      int e = ops.next_reps[k];
      bool here = (q.label[x] >> e) & 1u;
      bool there = detail::ClosureOps::holds(q.label[y], ops.next_child[k]);
      if (here != there)
        return fail(m, (here ? "" : "~") + print(q.sigma->posreps()[e]) +
                           " not matched at the next position");
    }
    for (std::size_t k = 0; k < ops.evt_reps.size(); ++k) {
      int e = ops.evt_reps[k];
      bool here = (q.label[x] >> e) & 1u;
      bool realized = false;
      for (long j = m; j < s + 2 * L && !realized; ++j)
        if (detail::ClosureOps::holds(q.label[lasso_point(l, j)], ops.evt_child[k]))
          realized = true;
      if (here && !realized)
        return fail(m, print(q.sigma->posreps()[e]) + " is never realized along the path");
      if (!here && realized)
        return fail(m, "~" + print(q.sigma->posreps()[e]) + " but the body occurs later");
    }
    for (std::size_t k = 0; k < ops.dia_reps.size(); ++k) {
      int e = ops.dia_reps[k];
      bool here = (q.label[x] >> e) & 1u;
      if (here) {
        bool wit = false;
        for (int v = 0; v < q.size() && !wit; ++v)
          if (q.below[x].test(v) && detail::ClosureOps::holds(q.label[v], ops.dia_child[k]))
            wit = true;
        if (!wit) return fail(m, print(q.sigma->posreps()[e]) + " has no witness below");
      }
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// m-neighbourhoods of the limit-model topology, decided for lassos.  Clause
// (ii)'s "forever after" is exact on the stems + lcm-of-loops horizon.
// ---------------------------------------------------------------------------

inline bool neighbourhood_member(const Quasimodel& q, const Lasso& v, int m, const Lasso& w) {
  check_lasso(q, v);
  check_lasso(q, w);
  auto leq = [&](int a, int b) { return a == b || q.below[b].test(a); };
  for (long i = 0; i < m; ++i)
    if (!leq(lasso_point(v, i), lasso_point(w, i))) return false;
  long stems = static_cast<long>(std::max(v.stem.size(), w.stem.size()));
  long period = std::lcm(static_cast<long>(v.loop.size()), static_cast<long>(w.loop.size()));
  for (long k = 0; k < m; ++k) {
    if (lasso_point(v, k) != lasso_point(w, k)) continue;
    long horizon = std::max(k, stems) + period;
    for (long j = k; j < horizon; ++j)
      if (lasso_point(v, j) != lasso_point(w, j)) return false;
  }
  return true;
}

// The scatteredness witness: a member whose first coordinate is minimal is
// isolated in A by its 1-neighbourhood.
inline std::pair<Lasso, int> scattered_witness(const Quasimodel& q, const std::vector<Lasso>& A) {
  if (A.empty()) throw std::invalid_argument("scattered_witness: empty set");
  for (const auto& l : A) check_lasso(q, l);
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = i + 1; j < A.size(); ++j)
      if (lasso_equal(A[i], A[j]))
        throw std::invalid_argument("scattered_witness: members must be pairwise distinct");

  auto tie_less = [](const Lasso& a, const Lasso& b) {
    if (a.stem.size() != b.stem.size()) return a.stem.size() < b.stem.size();
    if (a.stem != b.stem) return a.stem < b.stem;
    if (a.loop.size() != b.loop.size()) return a.loop.size() < b.loop.size();
    return a.loop < b.loop;
  };
  int best = -1;
  for (std::size_t i = 0; i < A.size(); ++i) {
    int c = lasso_point(A[i], 0);
    bool minimal = true;
    for (std::size_t j = 0; j < A.size() && minimal; ++j)
      if (q.below[c].test(lasso_point(A[j], 0))) minimal = false;
    if (!minimal) continue;
    if (best < 0 || tie_less(A[i], A[best])) best = static_cast<int>(i);
  }
  if (best < 0) throw std::logic_error("scattered_witness: no minimal first coordinate");
  for (std::size_t j = 0; j < A.size(); ++j)
    if (j != static_cast<std::size_t>(best) && neighbourhood_member(q, A[j], 1, A[best]))
      throw std::logic_error("scattered_witness: chosen member is not isolated");
  return {A[best], 1};
}

// Path lowering (continuity made constructive): given an S-path from w0 and
// v0 below-or-equal w0, produces a pointwise lower S-path.
inline std::vector<int> lower_path(const Quasimodel& q, const std::vector<int>& ws, int v0) {
  if (ws.empty()) throw std::invalid_argument("lower_path: empty path");
  auto leq = [&](int a, int b) { return a == b || q.below[b].test(a); };
  if (!leq(v0, ws[0])) throw std::invalid_argument("lower_path: v0 is not below the path start");
  std::vector<int> out{v0};
  for (std::size_t i = 0; i + 1 < ws.size(); ++i) {
    int found = -1;
    for (int y : q.succ[out.back()])
      if (leq(y, ws[i + 1])) {
        found = y;
        break;
      }
    if (found < 0) throw std::logic_error("lower_path: continuity violated in quasimodel");
    out.push_back(found);
  }
  return out;
}

}  // namespace dgl
