#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgl/bits.hpp"
#include "dgl/formula.hpp"
#include "dgl/poset_model.hpp"

namespace dgl {

struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TypeLimitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// If neg_norm(f) has the shape ~<>~x ([]x after collapsing), returns x
// normalized; analogously for ~F~x (G x).  These are the membership helpers
// behind every "[]psi in Phi" / "G psi in Phi" style test.
inline std::optional<Node> box_shape(Node f) {
  Node n = neg_norm(f);
  if (n->kind == Kind::Neg && n->a->kind == Kind::Dia && n->a->a->kind == Kind::Neg)
    return neg_norm(n->a->a->a);
  return std::nullopt;
}

inline std::optional<Node> hence_shape(Node f) {
  Node n = neg_norm(f);
  if (n->kind == Kind::Neg && n->a->kind == Kind::Evt && n->a->a->kind == Kind::Neg)
    return neg_norm(n->a->a->a);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Precomputed per-closure slot tables for the hot paths (type conditions,
// sensibility, coherence).  Shared and cached by closure content.
// ---------------------------------------------------------------------------

namespace detail {

struct Slot {
  int idx;
  bool pol;
};

struct ClosureOps {
  int reps = 0;
  std::vector<int> dia_reps, evt_reps, next_reps, and_reps;
  std::vector<Slot> dia_child, evt_child, next_child;  // indexed like the rep lists
  std::vector<Slot> and_left, and_right;
  std::uint64_t dia_mask = 0, evt_mask = 0;

  static bool holds(std::uint64_t mask, Slot s) { return (((mask >> s.idx) & 1u) != 0) == s.pol; }
  static Slot flip(Slot s) { return {s.idx, !s.pol}; }
};

inline const ClosureOps& closure_ops(const Closure& sigma) {
  static std::mutex mu;
  static std::unordered_map<std::uint64_t, std::unique_ptr<ClosureOps>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(sigma.content_hash());
  if (it != cache.end()) return *it->second;

  if (sigma.posrep_count() > 64)
    throw TypeLimitError("closure has " + std::to_string(sigma.posrep_count()) +
                         " positive representatives; limit is 64");
  auto ops = std::make_unique<ClosureOps>();
  ops->reps = sigma.posrep_count();
  auto slot_of = [&](Node f) -> Slot {
    auto s = sigma.slot(f);
    if (!s) throw StateError("formula '" + print(f) + "' escapes the closure");
    return {s->first, s->second};
  };
  for (int i = 0; i < sigma.posrep_count(); ++i) {
    Node r = sigma.posreps()[i];
    switch (r->kind) {
      case Kind::Dia:
        ops->dia_reps.push_back(i);
        ops->dia_child.push_back(slot_of(r->a));
        ops->dia_mask |= std::uint64_t(1) << i;
        break;
      case Kind::Evt:
        ops->evt_reps.push_back(i);
        ops->evt_child.push_back(slot_of(r->a));
        ops->evt_mask |= std::uint64_t(1) << i;
        break;
      case Kind::Next:
        ops->next_reps.push_back(i);
        ops->next_child.push_back(slot_of(r->a));
        break;
      case Kind::And:
        ops->and_reps.push_back(i);
        ops->and_left.push_back(slot_of(r->a));
        ops->and_right.push_back(slot_of(r->b));
        break;
      default:
        break;
    }
  }
  const ClosureOps& out = *ops;
  cache.emplace(sigma.content_hash(), std::move(ops));
  return out;
}

}  // namespace detail

// A sign vector over Sigma's positive representatives is a Sigma-type when the
// Boolean conditions hold and every G-shaped member has its body present.
inline bool is_type_mask(const Closure& sigma, std::uint64_t mask) {
  const auto& ops = detail::closure_ops(sigma);
  for (std::size_t k = 0; k < ops.and_reps.size(); ++k) {
    bool member = (mask >> ops.and_reps[k]) & 1u;
    if (member) {
      if (!detail::ClosureOps::holds(mask, ops.and_left[k]) ||
          !detail::ClosureOps::holds(mask, ops.and_right[k]))
        return false;
    } else {
      if (detail::ClosureOps::holds(mask, ops.and_left[k]) &&
          detail::ClosureOps::holds(mask, ops.and_right[k]))
        return false;
    }
  }
  // ~F chi in Phi forces ~chi in Phi (the henceforth clause after sugar).
  for (std::size_t k = 0; k < ops.evt_reps.size(); ++k)
    if (!((mask >> ops.evt_reps[k]) & 1u) &&
        detail::ClosureOps::holds(mask, ops.evt_child[k]))
      return false;
  return true;
}

inline const std::vector<std::uint64_t>& type_masks(const Closure& sigma, int limit = 20) {
  static std::mutex mu;
  static std::unordered_map<std::uint64_t, std::unique_ptr<std::vector<std::uint64_t>>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(sigma.content_hash());
    if (it != cache.end()) return *it->second;
  }
  if (sigma.posrep_count() > limit)
    throw TypeLimitError("type enumeration over " + std::to_string(sigma.posrep_count()) +
                         " representatives exceeds the limit " + std::to_string(limit));
  auto out = std::make_unique<std::vector<std::uint64_t>>();
  std::uint64_t total = std::uint64_t(1) << sigma.posrep_count();
  for (std::uint64_t m = 0; m < total; ++m)
    if (is_type_mask(sigma, m)) out->push_back(m);
  std::lock_guard<std::mutex> lock(mu);
  auto [it, inserted] = cache.emplace(sigma.content_hash(), std::move(out));
  return *it->second;
}

// One-step compatibility of two types (next, eventually, henceforth clauses).
inline bool sensible_masks(const Closure& sigma, std::uint64_t a, std::uint64_t b) {
  const auto& ops = detail::closure_ops(sigma);
  for (std::size_t k = 0; k < ops.next_reps.size(); ++k) {
    bool member = (a >> ops.next_reps[k]) & 1u;
    detail::Slot c = ops.next_child[k];
    if (member ? !detail::ClosureOps::holds(b, c) : detail::ClosureOps::holds(b, c)) return false;
  }
  for (std::size_t k = 0; k < ops.evt_reps.size(); ++k) {
    int i = ops.evt_reps[k];
    if ((a >> i) & 1u) {
      if (!detail::ClosureOps::holds(a, ops.evt_child[k]) && !((b >> i) & 1u)) return false;
    } else {
      if ((b >> i) & 1u) return false;  // G-shaped members persist
    }
  }
  return true;
}

struct SigmaType {
  ClosureRef sigma;
  std::uint64_t bits = 0;

  bool contains(Node f) const {
    auto s = sigma->slot(f);
    if (!s) return false;
    return (((bits >> s->first) & 1u) != 0) == s->second;
  }

  // Signed member list in canonical order.
  std::vector<Node> members() const {
    std::vector<Node> out;
    for (int i = 0; i < sigma->posrep_count(); ++i)
      out.push_back(((bits >> i) & 1u) ? sigma->posreps()[i] : neg(sigma->posreps()[i]));
    std::sort(out.begin(), out.end(), formula_less);
    return out;
  }
};

inline std::vector<SigmaType> enumerate_types(const ClosureRef& sigma, int limit = 20) {
  std::vector<SigmaType> out;
  for (std::uint64_t m : type_masks(*sigma, limit)) out.push_back(SigmaType{sigma, m});
  return out;
}

inline bool sensible_pair(const SigmaType& a, const SigmaType& b) {
  if (!a.sigma->same(*b.sigma)) throw std::invalid_argument("sensible_pair: closure mismatch");
  return sensible_masks(*a.sigma, a.bits, b.bits);
}

// ---------------------------------------------------------------------------
// Labelled-poset coherence, shared between states and quasimodels:
//   <>psi in l(w)  requires a strict predecessor carrying psi,
//   ~<>psi in l(w) requires every strict predecessor to carry ~psi.
// ---------------------------------------------------------------------------

inline std::optional<std::string> coherence_violation(const Closure& sigma,
                                                      const std::vector<Bits>& below,
                                                      const std::vector<std::uint64_t>& label,
                                                      const std::vector<std::string>& names) {
  const auto& ops = detail::closure_ops(sigma);
  int n = static_cast<int>(label.size());
  for (int x = 0; x < n; ++x) {
    for (std::size_t k = 0; k < ops.dia_reps.size(); ++k) {
      int d = ops.dia_reps[k];
      Node diaf = sigma.posreps()[d];
      if ((label[x] >> d) & 1u) {
        bool witnessed = false;
        for (int v = 0; v < n && !witnessed; ++v)
          if (below[x].test(v) && detail::ClosureOps::holds(label[v], ops.dia_child[k]))
            witnessed = true;
        if (!witnessed)
          return "coherence: " + print(diaf) + " at point '" + names[x] + "' has no witness below";
      } else {
        for (int v = 0; v < n; ++v)
          if (below[x].test(v) &&
              detail::ClosureOps::holds(label[v], ops.dia_child[k]))
            return "coherence: ~" + print(diaf) + " at point '" + names[x] + "' but '" +
                   names[v] + "' below carries " + print(diaf->a);
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sigma-states: finite rooted labelled strict posets.
// ---------------------------------------------------------------------------

struct State {
  ClosureRef sigma;
  std::vector<std::string> names;
  std::vector<Bits> below;  // transitively closed strict order
  std::vector<std::uint64_t> label;
  int root = 0;
  mutable std::uint64_t fp = 0;  // lazy fingerprint; 0 means unset

  int size() const { return static_cast<int>(names.size()); }
};

inline void check_state(const State& s) {
  int n = s.size();
  if (n == 0) throw StateError("state has no points");
  if (s.root < 0 || s.root >= n) throw StateError("state root out of range");
  for (int i = 0; i < n; ++i) {
    if (s.below[i].test(i)) throw StateError("state order not irreflexive");
    for (int k = 0; k < n; ++k)
      if (s.below[i].test(k) && !s.below[k].subset_of(s.below[i]))
        throw StateError("state order not transitively closed");
  }
  for (int v = 0; v < n; ++v)
    if (v != s.root && !s.below[s.root].test(v))
      throw StateError("point '" + s.names[v] + "' is not below the root");
  for (int v = 0; v < n; ++v)
    if (!is_type_mask(*s.sigma, s.label[v]))
      throw StateError("label of point '" + s.names[v] + "' is not a Sigma-type");
  if (auto viol = coherence_violation(*s.sigma, s.below, s.label, s.names))
    throw StateError(*viol);
}

// Completes listed labels to full sign vectors: every unlisted Sigma-member
// defaults to its negation.  Conflicting or out-of-closure entries are errors.
inline std::uint64_t complete_label_mask(const Closure& sigma, const std::vector<Node>& listed,
                                         const std::string& where) {
  std::uint64_t mask = 0, fixed = 0;
  for (Node f : listed) {
    auto s = sigma.slot(f);
    if (!s) throw StateError("label formula '" + print(f) + "' at " + where + " is not in Sigma");
    std::uint64_t bit = std::uint64_t(1) << s->first;
    if ((fixed & bit) && (((mask & bit) != 0) != s->second))
      throw StateError("contradictory label entries for '" + print(sigma.posreps()[s->first]) +
                       "' at " + where);
    fixed |= bit;
    if (s->second) mask |= bit;
  }
  return mask;
}

inline State make_state(ClosureRef sigma, std::vector<std::string> names,
                        const std::vector<std::pair<std::string, std::string>>& order_edges,
                        const std::string& root,
                        const std::map<std::string, std::vector<Node>>& labels) {
  State s;
  s.sigma = std::move(sigma);
  s.names = std::move(names);
  int n = s.size();
  std::unordered_map<std::string, int> idx;
  for (int i = 0; i < n; ++i) idx[s.names[i]] = i;
  auto at = [&](const std::string& p) {
    auto it = idx.find(p);
    if (it == idx.end()) throw StateError("unknown point '" + p + "'");
    return it->second;
  };
  std::vector<std::pair<int, int>> edges;
  for (auto& [lo, hi] : order_edges) edges.emplace_back(at(lo), at(hi));
  try {
    s.below = close_strict_order(n, edges, s.names);
  } catch (const ModelError& e) {
    throw StateError(e.what());
  }
  s.root = at(root);
  s.label.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    auto it = labels.find(s.names[i]);
    std::vector<Node> listed;
    if (it != labels.end()) listed = it->second;
    s.label[i] = complete_label_mask(*s.sigma, listed, "point '" + s.names[i] + "'");
  }
  check_state(s);
  return s;
}

// ---------------------------------------------------------------------------
// Norms.  hgt counts points on a longest chain, wdt counts the largest cover
// family under a single point (covers are pairwise incomparable), and the
// norm is the max of the two.
// ---------------------------------------------------------------------------

inline std::vector<int> topo_by_depth(const std::vector<Bits>& below) {
  int n = static_cast<int>(below.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return below[a].count() < below[b].count(); });
  return order;
}

inline int hgt(const State& s) {
  int n = s.size();
  std::vector<int> h(n, 1);
  for (int i : topo_by_depth(s.below))
    for (int j = 0; j < n; ++j)
      if (s.below[i].test(j)) h[i] = std::max(h[i], h[j] + 1);
  int best = 0;
  for (int i = 0; i < n; ++i) best = std::max(best, h[i]);
  return best;
}

inline bool is_cover(const State& s, int lo, int hi) {
  if (!s.below[hi].test(lo)) return false;
  for (int k = 0; k < s.size(); ++k)
    if (s.below[hi].test(k) && s.below[k].test(lo)) return false;
  return true;
}

inline std::vector<std::vector<int>> cover_children(const State& s) {
  std::vector<std::vector<int>> kids(s.size());
  for (int i = 0; i < s.size(); ++i)
    for (int j = 0; j < s.size(); ++j)
      if (is_cover(s, j, i)) kids[i].push_back(j);
  return kids;
}

inline int wdt(const State& s) {
  auto kids = cover_children(s);
  std::size_t best = 0;
  for (auto& k : kids) best = std::max(best, k.size());
  return static_cast<int>(best);
}

inline int norm(const State& s) { return std::max(hgt(s), wdt(s)); }

// ---------------------------------------------------------------------------
// Substates: one per non-root point, the generated substructure on its
// downset.
// ---------------------------------------------------------------------------

inline State substate_at(const State& s, int pt) {
  std::vector<int> carrier;
  for (int i = 0; i < s.size(); ++i)
    if (i == pt || s.below[pt].test(i)) carrier.push_back(i);
  State r;
  r.sigma = s.sigma;
  int m = static_cast<int>(carrier.size());
  std::vector<int> pos(s.size(), -1);
  for (int i = 0; i < m; ++i) pos[carrier[i]] = i;
  r.names.reserve(m);
  r.below.assign(m, Bits(m));
  r.label.resize(m);
  for (int i = 0; i < m; ++i) {
    r.names.push_back(s.names[carrier[i]]);
    r.label[i] = s.label[carrier[i]];
    for (int j = 0; j < m; ++j)
      if (s.below[carrier[i]].test(carrier[j])) r.below[i].set(j);
  }
  r.root = pos[pt];
  return r;
}

inline std::vector<State> substates(const State& s) {
  std::vector<State> out;
  for (int v = 0; v < s.size(); ++v)
    if (v != s.root) out.push_back(substate_at(s, v));
  return out;
}

// ---------------------------------------------------------------------------
// Fingerprints: isomorphism-invariant hashes used as dedup and memo keys.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h * 0xff51afd7ed558ccdull ^ (h >> 33);
}

}  // namespace detail

inline std::uint64_t state_fingerprint(const State& s) {
  if (s.fp) return s.fp;
  int n = s.size();
  std::vector<std::uint64_t> pf(n, 0);
  for (int i : topo_by_depth(s.below)) {
    std::vector<std::uint64_t> kids;
    for (int j = 0; j < n; ++j)
      if (s.below[i].test(j)) kids.push_back(pf[j]);
    std::sort(kids.begin(), kids.end());
    std::uint64_t h = detail::mix(0x51ed270b81ull, s.label[i]);
    for (auto k : kids) h = detail::mix(h, k);
    pf[i] = h;
  }
  std::uint64_t h = detail::mix(detail::mix(0xabcd1234ull, n), pf[s.root]);
  std::sort(pf.begin(), pf.end());
  for (auto k : pf) h = detail::mix(h, k);
  s.fp = h ? h : 1;
  return s.fp;
}

// ---------------------------------------------------------------------------
// Simulation (v embeds into w) and sensible steps (w |-> v), both as greatest
// fixpoints over candidate pair matrices.  Results are memoized by state
// fingerprints behind a mutex, per the concurrency contract.
// ---------------------------------------------------------------------------

namespace detail {

struct BoolMemo {
  std::mutex mu;
  std::unordered_map<std::uint64_t, bool> m;
  std::optional<bool> find(std::uint64_t k) {
    std::lock_guard<std::mutex> lock(mu);
    auto it = m.find(k);
    if (it == m.end()) return std::nullopt;
    return it->second;
  }
  void put(std::uint64_t k, bool v) {
    std::lock_guard<std::mutex> lock(mu);
    m.emplace(k, v);
  }
};

inline std::uint64_t pair_key(std::uint64_t a, std::uint64_t b) {
  return detail::mix(detail::mix(0x5eedull, a), b);
}

}  // namespace detail

// Maximal label-preserving strictly forward-confluent relation between the
// carriers; the relation itself is needed for certificate assembly.
inline std::vector<std::vector<char>> simulation_fixpoint(const State& v, const State& w) {
  int nv = v.size(), nw = w.size();
  std::vector<std::vector<char>> rel(nv, std::vector<char>(nw, 0));
  for (int a = 0; a < nv; ++a)
    for (int b = 0; b < nw; ++b) rel[a][b] = (v.label[a] == w.label[b]);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int a = 0; a < nv; ++a)
      for (int b = 0; b < nw; ++b) {
        if (!rel[a][b]) continue;
        for (int a2 = 0; a2 < nv && rel[a][b]; ++a2) {
          if (!v.below[a].test(a2)) continue;
          bool ok = false;
          for (int b2 = 0; b2 < nw && !ok; ++b2)
            if (w.below[b].test(b2) && rel[a2][b2]) ok = true;
          if (!ok) {
            rel[a][b] = 0;
            changed = true;
          }
        }
      }
  }
  return rel;
}

inline bool simulates(const State& v, const State& w) {
  if (!v.sigma->same(*w.sigma)) throw std::invalid_argument("simulates: closure mismatch");
  static detail::BoolMemo memo;
  std::uint64_t key = detail::pair_key(state_fingerprint(v), state_fingerprint(w));
  if (auto hit = memo.find(key)) return *hit;
  bool r = simulation_fixpoint(v, w)[v.root][w.root] != 0;
  memo.put(key, r);
  return r;
}

// Candidate pairs for w |-> v are the sensible label pairs; continuity prunes
// a pair (a,b) when some a' below a has no surviving partner below-or-equal b.
inline std::vector<std::vector<char>> step_fixpoint(const State& w, const State& v) {
  int nw = w.size(), nv = v.size();
  std::vector<std::vector<char>> rel(nw, std::vector<char>(nv, 0));
  for (int a = 0; a < nw; ++a)
    for (int b = 0; b < nv; ++b) rel[a][b] = sensible_masks(*w.sigma, w.label[a], v.label[b]);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int a = 0; a < nw; ++a)
      for (int b = 0; b < nv; ++b) {
        if (!rel[a][b]) continue;
        for (int a2 = 0; a2 < nw && rel[a][b]; ++a2) {
          if (!w.below[a].test(a2)) continue;
          bool ok = rel[a2][b] != 0;
          for (int b2 = 0; b2 < nv && !ok; ++b2)
            if (v.below[b].test(b2) && rel[a2][b2]) ok = true;
          if (!ok) {
            rel[a][b] = 0;
            changed = true;
          }
        }
      }
  }
  return rel;
}

inline bool step_exists(const State& w, const State& v) {
  if (!w.sigma->same(*v.sigma)) throw std::invalid_argument("step_exists: closure mismatch");
  static detail::BoolMemo memo;
  std::uint64_t key = detail::pair_key(state_fingerprint(w) ^ 0xf00dull, state_fingerprint(v));
  if (auto hit = memo.find(key)) return *hit;
  bool r = step_fixpoint(w, v)[w.root][v.root] != 0;
  memo.put(key, r);
  return r;
}

inline std::vector<std::pair<int, int>> step_relation(const State& w, const State& v) {
  auto rel = step_fixpoint(w, v);
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < w.size(); ++a)
    for (int b = 0; b < v.size(); ++b)
      if (rel[a][b]) out.emplace_back(a, b);
  return out;
}

// Two states are interchangeable for search purposes when they mutually
// embed; fingerprint equality is the cheap pre-filter.
inline bool states_equivalent(const State& a, const State& b) {
  if (state_fingerprint(a) != state_fingerprint(b)) return false;
  return simulates(a, b) && simulates(b, a);
}

// Number of distinct <>-formulas occurring positively across all labels.
inline int diamond_obligation_count(const State& w) {
  std::uint64_t all = 0;
  for (auto m : w.label) all |= m;
  return static_cast<int>(__builtin_popcountll(all & w.sigma->dia_mask()));
}

// w |-> v with the norm growth cap tied to the <>-formulas present in w.
inline bool bounded_future(const State& w, const State& v) {
  if (norm(v) > norm(w) + diamond_obligation_count(w)) return false;
  return step_exists(w, v);
}

inline bool in_universal(const State& w, int K) {
  return norm(w) <= (K + 1) * w.sigma->size();
}

// ---------------------------------------------------------------------------
// Unraveling along cover chains: every state is two-way simulated by a tree.
// ---------------------------------------------------------------------------

inline State unfold(const State& s) {
  auto kids = cover_children(s);
  State t;
  t.sigma = s.sigma;
  struct Item {
    int orig;
    int parent;  // tree index, -1 for root
  };
  std::vector<Item> items;
  std::vector<std::string> path_names;
  std::function<void(int, int, const std::string&)> go = [&](int orig, int parent,
                                                             const std::string& pname) {
    std::string nm = parent < 0 ? s.names[orig] : pname + "/" + s.names[orig];
    int self = static_cast<int>(items.size());
    items.push_back({orig, parent});
    path_names.push_back(nm);
    for (int c : kids[orig]) go(c, self, nm);
  };
  go(s.root, -1, "");
  int n = static_cast<int>(items.size());
  t.names = path_names;
  t.label.resize(n);
  t.below.assign(n, Bits(n));
  for (int i = 0; i < n; ++i) {
    t.label[i] = s.label[items[i].orig];
    for (int a = items[i].parent; a >= 0; a = items[a].parent) t.below[a].set(i);
  }
  t.root = 0;
  return t;
}

// ---------------------------------------------------------------------------
// shrink: unravel, then repeatedly delete a daughter subtree that embeds into
// a distinct sibling.  The survivor supplies all witnesses of the deleted
// branch, so validity and the embedding into the original are preserved and
// the norm never grows.
// ---------------------------------------------------------------------------

inline State remove_points(const State& s, const Bits& drop) {
  std::vector<int> carrier;
  for (int i = 0; i < s.size(); ++i)
    if (!drop.test(i)) carrier.push_back(i);
  State r;
  r.sigma = s.sigma;
  int m = static_cast<int>(carrier.size());
  std::vector<int> pos(s.size(), -1);
  for (int i = 0; i < m; ++i) pos[carrier[i]] = i;
  r.below.assign(m, Bits(m));
  r.label.resize(m);
  for (int i = 0; i < m; ++i) {
    r.names.push_back(s.names[carrier[i]]);
    r.label[i] = s.label[carrier[i]];
    for (int j = 0; j < m; ++j)
      if (s.below[carrier[i]].test(carrier[j])) r.below[i].set(j);
  }
  r.root = pos[s.root];
  return r;
}

inline State shrink(const State& s) {
  State t = unfold(s);
  for (;;) {
    auto kids = cover_children(t);
    bool pruned = false;
    for (int n = 0; n < t.size() && !pruned; ++n) {
      for (std::size_t i = 0; i < kids[n].size() && !pruned; ++i) {
        for (std::size_t j = 0; j < kids[n].size() && !pruned; ++j) {
          if (i == j) continue;
          int u = kids[n][i], u2 = kids[n][j];
          if (simulates(substate_at(t, u), substate_at(t, u2))) {
            Bits drop(t.size());
            drop.set(u);
            for (int k = 0; k < t.size(); ++k)
              if (t.below[u].test(k)) drop.set(k);
            t = remove_points(t, drop);
            pruned = true;
          }
        }
      }
    }
    if (!pruned) break;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Extracting the Sigma-state of a model point: carrier is the downset of x,
// labels are Sigma-truth at each point.
// ---------------------------------------------------------------------------

inline State state_of_point(const PosetModel& m, int x, ClosureRef sigma) {
  std::vector<int> carrier;
  for (int i = 0; i < m.size(); ++i)
    if (i == x || m.below[x].test(i)) carrier.push_back(i);
  std::vector<Bits> truth;
  truth.reserve(sigma->posrep_count());
  {
    std::unordered_map<Node, Bits> memo;
    for (Node r : sigma->posreps()) truth.push_back(eval_memo(m, r, memo));
  }
  State s;
  s.sigma = sigma;
  int n = static_cast<int>(carrier.size());
  std::vector<int> pos(m.size(), -1);
  for (int i = 0; i < n; ++i) pos[carrier[i]] = i;
  s.below.assign(n, Bits(n));
  s.label.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    s.names.push_back(m.names[carrier[i]]);
    for (int j = 0; j < n; ++j)
      if (m.below[carrier[i]].test(carrier[j])) s.below[i].set(j);
    for (int r = 0; r < sigma->posrep_count(); ++r)
      if (truth[r].test(carrier[i])) s.label[i] |= std::uint64_t(1) << r;
  }
  s.root = pos[x];
  check_state(s);
  return s;
}

// ---------------------------------------------------------------------------
// Successor generation: the GL witness discipline.  Every unwitnessed <>psi
// in a node's type gets a child carrying psi and ~<>psi, and every ~<>chi
// propagates as ~chi and ~<>chi into all descendants, so the positive
// <>-formulas strictly shrink along a branch and saturation terminates.
// ---------------------------------------------------------------------------

struct CandidateLimits {
  int max_norm = 8;
  int max_count = 64;
};

namespace detail {

struct SatTree {
  std::uint64_t type;
  std::vector<SatTree> kids;
};

struct Saturator {
  const Closure& sigma;
  const ClosureOps& ops;
  const std::vector<std::uint64_t>& types;
  int cap;
  bool truncated = false;
  std::unordered_map<std::uint64_t, std::vector<std::pair<SatTree, std::uint64_t>>> memo;

  // Dia-rep bits realized inside a node labelled t (the node itself).
  std::uint64_t self_wit(std::uint64_t t) const {
    std::uint64_t w = 0;
    for (std::size_t k = 0; k < ops.dia_reps.size(); ++k)
      if (ClosureOps::holds(t, ops.dia_child[k])) w |= std::uint64_t(1) << ops.dia_reps[k];
    return w;
  }

  // Membership requirements a child of a node labelled t must satisfy.
  void child_base(std::uint64_t t, std::uint64_t& req_true, std::uint64_t& req_false) const {
    req_true = req_false = 0;
    for (std::size_t k = 0; k < ops.dia_reps.size(); ++k) {
      int d = ops.dia_reps[k];
      if ((t >> d) & 1u) continue;
      req_false |= std::uint64_t(1) << d;  // ~<>chi persists downward
      Slot c = ops.dia_child[k];           // and forces ~chi
      if (c.pol)
        req_false |= std::uint64_t(1) << c.idx;
      else
        req_true |= std::uint64_t(1) << c.idx;
    }
  }

  const std::vector<std::pair<SatTree, std::uint64_t>>& enumerate(std::uint64_t t) {
    auto it = memo.find(t);
    if (it != memo.end()) return it->second;
    std::vector<std::pair<SatTree, std::uint64_t>> out;
    std::uint64_t base_true, base_false;
    child_base(t, base_true, base_false);
    std::vector<int> need;
    for (int d : ops.dia_reps)
      if ((t >> d) & 1u) need.push_back(d);

    std::vector<SatTree> kids;
    std::function<void(std::uint64_t)> build = [&](std::uint64_t kidwit) {
      if (static_cast<int>(out.size()) >= cap) {
        truncated = true;
        return;
      }
      int pending = -1;
      std::size_t pending_k = 0;
      for (std::size_t k = 0; k < ops.dia_reps.size(); ++k) {
        int d = ops.dia_reps[k];
        if (((t >> d) & 1u) && !((kidwit >> d) & 1u)) {
          pending = d;
          pending_k = k;
          break;
        }
      }
      if (pending < 0) {
        out.push_back({SatTree{t, kids}, kidwit | self_wit(t)});
        return;
      }
      std::uint64_t rt = base_true, rf = base_false;
      rf |= std::uint64_t(1) << pending;  // the GL witness carries ~<>psi
      Slot c = ops.dia_child[pending_k];  // and psi itself
      if (c.pol)
        rt |= std::uint64_t(1) << c.idx;
      else
        rf |= std::uint64_t(1) << c.idx;
      if (rt & rf) return;  // contradictory requirements: no witness type
      for (std::uint64_t T : types) {
        if ((T & rt) != rt || (T & rf)) continue;
        for (const auto& [sub, subwit] : enumerate(T)) {
          kids.push_back(sub);
          build(kidwit | subwit);
          kids.pop_back();
          if (static_cast<int>(out.size()) >= cap) return;
        }
      }
    };
    build(0);
    return memo.emplace(t, std::move(out)).first->second;
  }
};

inline State sat_tree_to_state(ClosureRef sigma, const SatTree& tree) {
  State s;
  s.sigma = std::move(sigma);
  struct Row {
    std::uint64_t type;
    int parent;
  };
  std::vector<Row> rows;
  std::function<void(const SatTree&, int)> go = [&](const SatTree& nd, int parent) {
    int self = static_cast<int>(rows.size());
    rows.push_back({nd.type, parent});
    for (const auto& k : nd.kids) go(k, self);
  };
  go(tree, -1);
  int n = static_cast<int>(rows.size());
  s.names.reserve(n);
  s.below.assign(n, Bits(n));
  s.label.resize(n);
  for (int i = 0; i < n; ++i) {
    s.names.push_back("x" + std::to_string(i));
    s.label[i] = rows[i].type;
    for (int a = rows[i].parent; a >= 0; a = rows[a].parent) s.below[a].set(i);
  }
  s.root = 0;
  return s;
}

}  // namespace detail

// All saturated states whose root type passes root_filter, capped at
// lim.max_count and norm-bounded by lim.max_norm.
inline std::vector<State> saturated_states(const ClosureRef& sigma,
                                           const std::function<bool(std::uint64_t)>& root_filter,
                                           const CandidateLimits& lim, bool* truncated = nullptr) {
  const auto& types = type_masks(*sigma);
  detail::Saturator sat{*sigma, detail::closure_ops(*sigma), types, lim.max_count};
  std::vector<State> out;
  for (std::uint64_t theta : types) {
    if (!root_filter(theta)) continue;
    for (const auto& [tree, wit] : sat.enumerate(theta)) {
      (void)wit;
      State cand = detail::sat_tree_to_state(sigma, tree);
      if (norm(cand) > lim.max_norm) continue;
      check_state(cand);
      bool dup = false;
      for (const auto& seen : out)
        if (states_equivalent(seen, cand)) {
          dup = true;
          break;
        }
      if (!dup) out.push_back(std::move(cand));
      if (static_cast<int>(out.size()) >= lim.max_count) {
        sat.truncated = true;
        break;
      }
    }
    if (static_cast<int>(out.size()) >= lim.max_count) break;
  }
  if (truncated && sat.truncated) *truncated = true;
  return out;
}

// Bounded-future successors of w: saturated states over root types sensible
// with l(w), filtered through the |-> fixpoint and the norm cap.
inline std::vector<State> successor_candidates(const State& w, const CandidateLimits& lim,
                                               bool* truncated = nullptr) {
  std::uint64_t rootlab = w.label[w.root];
  std::vector<State> all = saturated_states(
      w.sigma, [&](std::uint64_t t) { return sensible_masks(*w.sigma, rootlab, t); }, lim,
      truncated);
  std::vector<State> out;
  for (auto& cand : all)
    if (bounded_future(w, cand)) out.push_back(std::move(cand));
  return out;
}

}  // namespace dgl
