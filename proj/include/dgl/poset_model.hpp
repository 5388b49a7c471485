#pragma once

#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgl/bits.hpp"
#include "dgl/formula.hpp"

namespace dgl {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Finite dynamic poset model: a finite strict poset with the downset topology,
// a monotone (= continuous) self-map and a valuation.  The strict order is
// stored transitively closed.
struct PosetModel {
  std::vector<std::string> names;
  std::vector<Bits> below;               // below[i] = { j : j < i } (strict)
  std::vector<int> f;                    // total self-map
  std::map<std::string, Bits> val;       // atom -> truth set

  int size() const { return static_cast<int>(names.size()); }

  int point_index(const std::string& n) const {
    for (int i = 0; i < size(); ++i)
      if (names[i] == n) return i;
    return -1;
  }
};

// Closes an edge list transitively; below[i] collects everything strictly
// under i.  Rejects cycles (irreflexivity after closure).
inline std::vector<Bits> close_strict_order(int n, const std::vector<std::pair<int, int>>& edges,
                                            const std::vector<std::string>& names) {
  std::vector<Bits> below(n, Bits(n));
  for (auto& [lo, hi] : edges) below[hi].set(lo);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      if (below[i].test(k)) below[i] |= below[k];
  for (int i = 0; i < n; ++i)
    if (below[i].test(i)) throw ModelError("cycle in order through point '" + names[i] + "'");
  return below;
}

inline bool order_leq(const std::vector<Bits>& below, int x, int y) {
  return x == y || below[y].test(x);
}

// Validates the three model invariants: strict order, total map, monotone map.
inline PosetModel make_model(std::vector<std::string> names,
                             const std::vector<std::pair<std::string, std::string>>& order_edges,
                             const std::map<std::string, std::string>& fmap,
                             const std::map<std::string, std::vector<std::string>>& valuation) {
  PosetModel m;
  m.names = std::move(names);
  int n = m.size();
  if (n == 0) throw ModelError("model has no points");
  std::unordered_map<std::string, int> idx;
  for (int i = 0; i < n; ++i) {
    if (idx.count(m.names[i])) throw ModelError("duplicate point '" + m.names[i] + "'");
    idx[m.names[i]] = i;
  }
  auto at = [&](const std::string& p) {
    auto it = idx.find(p);
    if (it == idx.end()) throw ModelError("unknown point '" + p + "'");
    return it->second;
  };
  std::vector<std::pair<int, int>> edges;
  for (auto& [lo, hi] : order_edges) edges.emplace_back(at(lo), at(hi));
  m.below = close_strict_order(n, edges, m.names);

  m.f.assign(n, -1);
  for (auto& [src, dst] : fmap) m.f[at(src)] = at(dst);
  for (int i = 0; i < n; ++i)
    if (m.f[i] < 0) throw ModelError("f is not total: no image for '" + m.names[i] + "'");

  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (m.below[y].test(x) && !order_leq(m.below, m.f[x], m.f[y]))
        throw ModelError("f is not monotone: " + m.names[x] + " < " + m.names[y] +
                         " but f(" + m.names[x] + ") = " + m.names[m.f[x]] +
                         " is not below-or-equal f(" + m.names[y] + ") = " + m.names[m.f[y]]);

  for (auto& [p, pts] : valuation) {
    Bits set(n);
    for (auto& q : pts) set.set(at(q));
    m.val.emplace(p, std::move(set));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Model checking.  <> is the Cantor derivative on the downset topology:
// x in [[<>phi]] iff some strict predecessor of x satisfies phi.  F is the
// least fixpoint of T |-> [[phi]] u f^-1(T); X finite so this terminates.
// Atoms missing from the valuation evaluate to the empty set.
// ---------------------------------------------------------------------------

inline Bits eval_memo(const PosetModel& m, Node f, std::unordered_map<Node, Bits>& memo) {
  auto it = memo.find(f);
  if (it != memo.end()) return it->second;
  int n = m.size();
  Bits r(n);
  switch (f->kind) {
    case Kind::Atom: {
      auto vt = m.val.find(f->name);
      if (vt != m.val.end()) r = vt->second;
      break;
    }
    case Kind::Neg:
      r = eval_memo(m, f->a, memo).complement();
      break;
    case Kind::And:
      r = eval_memo(m, f->a, memo) & eval_memo(m, f->b, memo);
      break;
    case Kind::Dia: {
      Bits sub = eval_memo(m, f->a, memo);
      for (int x = 0; x < n; ++x)
        if (m.below[x].intersects(sub)) r.set(x);
      break;
    }
    case Kind::Next: {
      Bits sub = eval_memo(m, f->a, memo);
      for (int x = 0; x < n; ++x)
        if (sub.test(m.f[x])) r.set(x);
      break;
    }
    case Kind::Evt: {
      r = eval_memo(m, f->a, memo);
      bool changed = true;
      while (changed) {
        changed = false;
        for (int x = 0; x < n; ++x)
          if (!r.test(x) && r.test(m.f[x])) {
            r.set(x);
            changed = true;
          }
      }
      break;
    }
  }
  memo.emplace(f, r);
  return r;
}

inline Bits eval(const PosetModel& m, Node f) {
  std::unordered_map<Node, Bits> memo;
  return eval_memo(m, f, memo);
}

inline bool is_valid(const PosetModel& m, Node f) {
  return eval(m, f).count() == static_cast<std::size_t>(m.size());
}

// ---------------------------------------------------------------------------
// Axiom schemes.  Taut is realized as a fixed finite family of tautology
// shapes; the remaining schemes are the K, L, Next, continuity and henceforth
// axioms.  Metavariables are "phi", "psi", "chi".
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& axiom_scheme_names() {
  static const std::vector<std::string> names = {
      "Taut1", "Taut2", "Taut3", "Taut4", "Taut5", "Taut6", "Taut7",
      "K", "L", "NextNeg", "NextAnd", "C", "KG", "FixG", "IndG"};
  return names;
}

inline Node axiom_instance(const std::string& scheme, const std::map<std::string, Node>& subst) {
  auto arg = [&](const char* v) {
    auto it = subst.find(v);
    if (it == subst.end())
      throw std::invalid_argument("substitution missing metavariable '" + std::string(v) +
                                  "' for scheme " + scheme);
    return it->second;
  };
  if (scheme == "Taut1") return disj(arg("phi"), neg(arg("phi")));
  if (scheme == "Taut2") return impl(arg("phi"), impl(arg("psi"), arg("phi")));
  if (scheme == "Taut3")
    return impl(impl(arg("phi"), impl(arg("psi"), arg("chi"))),
                impl(impl(arg("phi"), arg("psi")), impl(arg("phi"), arg("chi"))));
  if (scheme == "Taut4") return impl(impl(neg(arg("phi")), neg(arg("psi"))), impl(arg("psi"), arg("phi")));
  if (scheme == "Taut5") return impl(conj(arg("phi"), arg("psi")), arg("phi"));
  if (scheme == "Taut6") return impl(conj(arg("phi"), arg("psi")), arg("psi"));
  if (scheme == "Taut7") return impl(arg("phi"), impl(arg("psi"), conj(arg("phi"), arg("psi"))));
  if (scheme == "K") return impl(box(impl(arg("phi"), arg("psi"))), impl(box(arg("phi")), box(arg("psi"))));
  if (scheme == "L") return impl(box(impl(box(arg("phi")), arg("phi"))), box(arg("phi")));
  if (scheme == "NextNeg") return iff(neg(nxt(arg("phi"))), nxt(neg(arg("phi"))));
  if (scheme == "NextAnd")
    return iff(nxt(conj(arg("phi"), arg("psi"))), conj(nxt(arg("phi")), nxt(arg("psi"))));
  if (scheme == "C")
    return impl(conj(nxt(arg("phi")), nxt(box(arg("phi")))), box(nxt(arg("phi"))));
  if (scheme == "KG")
    return impl(hence(impl(arg("phi"), arg("psi"))), impl(hence(arg("phi")), hence(arg("psi"))));
  if (scheme == "FixG") return impl(hence(arg("phi")), conj(arg("phi"), nxt(hence(arg("phi")))));
  if (scheme == "IndG")
    return impl(hence(impl(arg("phi"), nxt(arg("phi")))), impl(arg("phi"), hence(arg("phi"))));
  throw std::invalid_argument("unknown axiom scheme '" + scheme + "'");
}

// Metavariables each scheme actually uses (Taut3 is the only ternary one).
inline std::vector<std::string> axiom_scheme_metavars(const std::string& scheme) {
  if (scheme == "Taut1" || scheme == "L" || scheme == "NextNeg" || scheme == "C" ||
      scheme == "FixG" || scheme == "IndG")
    return {"phi"};
  if (scheme == "Taut3") return {"phi", "psi", "chi"};
  return {"phi", "psi"};
}

// ---------------------------------------------------------------------------
// Deterministic random generation for the fuzz harness.  All draws go through
// the raw engine output so results do not depend on library distribution
// implementations.
// ---------------------------------------------------------------------------

inline std::uint64_t rng_below(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

inline Node random_formula(std::uint64_t seed, int depth, const std::vector<std::string>& atoms) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 0x7f4a7c15u);
  auto gen = [&](auto&& self, int d) -> Node {
    if (d <= 0 || rng_below(rng, 5) == 0) return atom(atoms[rng_below(rng, atoms.size())]);
    switch (rng_below(rng, 9)) {
      case 0: return neg(self(self, d - 1));
      case 1: return conj(self(self, d - 1), self(self, d - 1));
      case 2: return dia(self(self, d - 1));
      case 3: return nxt(self(self, d - 1));
      case 4: return evt(self(self, d - 1));
      case 5: return box(self(self, d - 1));
      case 6: return hence(self(self, d - 1));
      case 7: return disj(self(self, d - 1), self(self, d - 1));
      default: return impl(self(self, d - 1), self(self, d - 1));
    }
  };
  return gen(gen, depth);
}

// Random DAG, transitively closed, then a monotone self-map.  The map is
// drawn from a few always-monotone families plus a greedy order-respecting
// assignment with retries.
inline PosetModel random_model(std::uint64_t seed, int max_points,
                               const std::vector<std::string>& atoms) {
  if (max_points < 1) throw std::invalid_argument("max_points must be >= 1");
  std::mt19937_64 rng(seed * 0x2545f4914f6cdd1dull + 0x9e3779b9u);
  int n = 1 + static_cast<int>(rng_below(rng, static_cast<std::uint64_t>(max_points)));
  PosetModel m;
  for (int i = 0; i < n; ++i) m.names.push_back("x" + std::to_string(i));
  m.below.assign(n, Bits(n));
  // Edges only from lower to higher index: acyclic by construction.
  std::uint64_t density = 1 + rng_below(rng, 4);  // edge chance = density/10
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i)
      if (rng_below(rng, 10) < density) m.below[j].set(i);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      if (m.below[i].test(k)) m.below[i] |= m.below[k];

  auto monotone_ok = [&](const std::vector<int>& f) {
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        if (m.below[y].test(x) && !order_leq(m.below, f[x], f[y])) return false;
    return true;
  };

  m.f.assign(n, 0);
  switch (rng_below(rng, 4)) {
    case 0:  // identity
      for (int i = 0; i < n; ++i) m.f[i] = i;
      break;
    case 1: {  // constant
      int z = static_cast<int>(rng_below(rng, n));
      for (int i = 0; i < n; ++i) m.f[i] = z;
      break;
    }
    case 2: {  // collapse onto a maximal chain by height rank
      std::vector<int> chain;
      int cur = -1;
      for (int i = 0; i < n; ++i)
        if (m.below[i].none()) { cur = i; break; }
      chain.push_back(cur);
      bool grew = true;
      while (grew) {
        grew = false;
        for (int j = 0; j < n; ++j)
          if (m.below[j].test(chain.back())) {
            bool cover = true;
            for (int k = 0; k < n; ++k)
              if (m.below[j].test(k) && m.below[k].test(chain.back())) cover = false;
            if (cover) { chain.push_back(j); grew = true; break; }
          }
      }
      std::vector<int> height(n, 0);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
          if (m.below[i].test(j)) height[i] = std::max(height[i], height[j] + 1);
      }
      // indices sorted by |below| give a topological order, so heights above
      // are already final when read
      for (int i = 0; i < n; ++i)
        m.f[i] = chain[std::min<std::size_t>(height[i], chain.size() - 1)];
      if (!monotone_ok(m.f))
        for (int i = 0; i < n; ++i) m.f[i] = i;
      break;
    }
    default: {  // greedy order-respecting, retry a few times, else identity
      bool done = false;
      for (int attempt = 0; attempt < 5 && !done; ++attempt) {
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return m.below[a].count() < m.below[b].count(); });
        std::vector<int> f(n, -1);
        done = true;
        for (int oi = 0; oi < n && done; ++oi) {
          int x = order[oi];
          std::vector<int> allowed;
          for (int t = 0; t < n; ++t) {
            bool ok = true;
            for (int j = 0; j < n && ok; ++j)
              if (m.below[x].test(j) && f[j] >= 0 && !order_leq(m.below, f[j], t)) ok = false;
            if (ok) allowed.push_back(t);
          }
          if (allowed.empty())
            done = false;
          else
            f[x] = allowed[rng_below(rng, allowed.size())];
        }
        if (done) m.f = f;
      }
      if (!done)
        for (int i = 0; i < n; ++i) m.f[i] = i;
      break;
    }
  }

  for (const auto& p : atoms) {
    Bits set(n);
    for (int i = 0; i < n; ++i)
      if (rng_below(rng, 2)) set.set(i);
    m.val.emplace(p, std::move(set));
  }
  return m;
}

}  // namespace dgl
