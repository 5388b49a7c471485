#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dgl/formula.hpp"
#include "dgl/quasimodel.hpp"
#include "dgl/state_space.hpp"

namespace dgl {

struct SearchBounds {
  int max_norm = 4;
  int max_states = 64;
  int max_path = 8;
  std::uint64_t seed = 1;
  int threads = 1;
};

using SuccessorFn = std::function<std::vector<State>(const State&)>;

// Default successor source: GL-saturated bounded-future candidates, shrunk
// and deduplicated.
inline SuccessorFn default_successors(const SearchBounds& b, bool* truncated = nullptr) {
  return [b, truncated](const State& w) {
    std::vector<State> cands =
        successor_candidates(w, CandidateLimits{b.max_norm, b.max_states}, truncated);
    std::vector<State> out;
    for (auto& c : cands) {
      State s = shrink(c);
      if (norm(s) > b.max_norm) continue;
      bool dup = false;
      for (const auto& seen : out)
        if (states_equivalent(seen, s)) {
          dup = true;
          break;
        }
      if (!dup) out.push_back(std::move(s));
    }
    return out;
  };
}

// ---------------------------------------------------------------------------
// Efficient paths: bounded-future paths in which no earlier state embeds into
// a later one.  Kruskal's tree theorem makes these finite, which is the
// termination engine of the whole search.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<State>> efficient_paths(const State& start, const SearchBounds& b,
                                                       const SuccessorFn& succ,
                                                       bool* truncated = nullptr) {
  std::vector<std::vector<State>> out;
  std::vector<State> path{start};
  std::function<void()> visit = [&]() {
    if (static_cast<int>(out.size()) >= b.max_states) {
      if (truncated) *truncated = true;
      return;
    }
    out.push_back(path);
    std::vector<State> exts;
    for (State& u : succ(path.back())) {
      bool dominated = false;
      for (const State& p : path)
        if (simulates(p, u)) {
          dominated = true;
          break;
        }
      if (!dominated) exts.push_back(std::move(u));
    }
    if (exts.empty()) return;
    if (static_cast<int>(path.size()) >= b.max_path) {
      if (truncated) *truncated = true;
      return;
    }
    for (State& u : exts) {
      path.push_back(std::move(u));
      visit();
      path.pop_back();
      if (static_cast<int>(out.size()) >= b.max_states) return;
    }
  };
  visit();
  return out;
}

// Endpoints of the efficient paths from w; always contains w itself.
inline std::vector<State> rho(const State& w, const SearchBounds& b, const SuccessorFn& succ,
                              bool* truncated = nullptr) {
  std::vector<State> out;
  for (const auto& p : efficient_paths(w, b, succ, truncated)) {
    const State& tail = p.back();
    bool dup = false;
    for (const auto& seen : out)
      if (states_equivalent(seen, tail)) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(tail);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bounded satisfiability search with quasimodel certificates.
// ---------------------------------------------------------------------------

struct SearchOutcome {
  bool sat = false;
  bool exhausted = false;  // meaningful when !sat: bounded space fully explored
  std::optional<Quasimodel> certificate;
  std::string witness;  // certificate point carrying the target formula
  int explored = 0;
};

namespace detail {

// The working universe of the search: canonical states (each kept once up to
// mutual simulation) and representatives of all their substates.
struct Universe {
  std::vector<State> states;
  std::vector<bool> is_seed;
  std::vector<std::vector<int>> sub_reps;

  int find_equivalent(const State& s) const {
    for (int i = 0; i < static_cast<int>(states.size()); ++i)
      if (states_equivalent(states[i], s)) return i;
    return -1;
  }

  // Index of a state embedding into s, if any (the Kruskal discipline prefers
  // the previously seen, weaker state).
  int find_dominating(const State& s) const {
    for (int i = 0; i < static_cast<int>(states.size()); ++i)
      if (simulates(states[i], s)) return i;
    return -1;
  }
};

// Adds s and, recursively, representatives of all its substates.  Substates
// are never domination-pruned: openness of the explored set needs an
// equivalent representative for every substate.
inline int add_with_substates(Universe& uni, const State& s, bool seed, int cap, bool* truncated) {
  int at = uni.find_equivalent(s);
  if (at >= 0) {
    if (seed) uni.is_seed[at] = true;
    return at;
  }
  if (static_cast<int>(uni.states.size()) >= cap) {
    if (truncated) *truncated = true;
    return -1;
  }
  uni.states.push_back(s);
  uni.is_seed.push_back(seed);
  uni.sub_reps.emplace_back();
  at = static_cast<int>(uni.states.size()) - 1;
  std::vector<int> reps;
  for (int v = 0; v < s.size(); ++v) {
    if (v == s.root) continue;
    int r = add_with_substates(uni, substate_at(s, v), false, cap, truncated);
    if (r < 0) return at;  // truncated; universe stays usable
    reps.push_back(r);
  }
  uni.sub_reps[at] = std::move(reps);
  return at;
}

// The regularity fixpoint: repeatedly removes states whose substate
// representatives were removed (openness), states without a |-> successor
// (seriality), and states with an unrealizable F-obligation among the
// survivors (omega-sensibility).
inline std::vector<bool> regular_survivors(const Universe& uni,
                                           const std::vector<std::vector<int>>& edges) {
  int n = static_cast<int>(uni.states.size());
  std::vector<bool> alive(n, true);
  if (n == 0) return alive;
  const auto& ops = closure_ops(*uni.states[0].sigma);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      bool ok = true;
      for (int r : uni.sub_reps[i])
        if (!alive[r]) ok = false;
      if (ok) {
        ok = false;
        for (int j : edges[i])
          if (alive[j]) ok = true;
      }
      if (ok) {
        const State& s = uni.states[i];
        std::uint64_t rootlab = s.label[s.root];
        for (std::size_t k = 0; k < ops.evt_reps.size() && ok; ++k) {
          if (!((rootlab >> ops.evt_reps[k]) & 1u)) continue;
          std::vector<char> seen(n, 0);
          std::deque<int> bfs{i};
          seen[i] = 1;
          bool realized = false;
          while (!bfs.empty() && !realized) {
            int x = bfs.front();
            bfs.pop_front();
            const State& sx = uni.states[x];
            if (ClosureOps::holds(sx.label[sx.root], ops.evt_child[k])) realized = true;
            for (int y : edges[x])
              if (alive[y] && !seen[y]) {
                seen[y] = 1;
                bfs.push_back(y);
              }
          }
          ok = realized;
        }
      }
      if (!ok) {
        alive[i] = false;
        changed = true;
      }
    }
  }
  return alive;
}

// Assembles the certificate: the disjoint union of the member states' points
// with the induced orders and labels.  S-edges come from the step_exists
// fixpoint relations, instantiated along every embedded substate copy via the
// maximal simulation into its representative.
inline Quasimodel assemble_certificate(const Universe& uni, const std::vector<int>& chosen,
                                       const std::vector<std::vector<int>>& edges,
                                       ClosureRef sigma) {
  Quasimodel cert;
  cert.sigma = sigma;
  std::vector<int> block_of(uni.states.size(), -1);
  std::vector<int> base(chosen.size(), 0);
  int total = 0;
  for (std::size_t bi = 0; bi < chosen.size(); ++bi) {
    block_of[chosen[bi]] = static_cast<int>(bi);
    base[bi] = total;
    total += uni.states[chosen[bi]].size();
  }
  cert.below.assign(total, Bits(total));
  cert.label.assign(total, 0);
  cert.succ.assign(total, {});
  for (std::size_t bi = 0; bi < chosen.size(); ++bi) {
    const State& s = uni.states[chosen[bi]];
    for (int p = 0; p < s.size(); ++p) {
      cert.names.push_back("s" + std::to_string(bi) + "_" + s.names[p]);
      cert.label[base[bi] + p] = s.label[p];
      for (int r = 0; r < s.size(); ++r)
        if (s.below[p].test(r)) cert.below[base[bi] + p].set(base[bi] + r);
    }
  }
  for (std::size_t bi = 0; bi < chosen.size(); ++bi) {
    const State& s = uni.states[chosen[bi]];
    for (int a = 0; a < s.size(); ++a) {
      State down = substate_at(s, a);
      int u = uni.find_equivalent(down);
      if (u < 0 || block_of[u] < 0) throw std::logic_error("certificate: missing substate rep");
      auto chi = simulation_fixpoint(down, uni.states[u]);
      std::vector<int> carrier;
      for (int i = 0; i < s.size(); ++i)
        if (i == a || s.below[a].test(i)) carrier.push_back(i);
      for (int v : edges[u]) {
        if (block_of[v] < 0) continue;
        auto rel = step_fixpoint(uni.states[u], uni.states[v]);
        for (int dp = 0; dp < down.size(); ++dp)
          for (int m = 0; m < uni.states[u].size(); ++m) {
            if (!chi[dp][m]) continue;
            for (int t = 0; t < uni.states[v].size(); ++t)
              if (rel[m][t])
                cert.succ[base[bi] + carrier[dp]].push_back(base[block_of[v]] + t);
          }
      }
    }
  }
  for (auto& lst : cert.succ) {
    std::sort(lst.begin(), lst.end());
    lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
  }
  check_quasimodel(cert);
  return cert;
}

}  // namespace detail

inline SearchOutcome sat_search(Node f, const SearchBounds& bounds) {
  ClosureRef sigma = Closure::of(f);
  bool truncated = false;
  CandidateLimits lim{bounds.max_norm, bounds.max_states};

  auto root_has_f = [&](std::uint64_t t) {
    auto s = sigma->slot(f);
    return s && ((((t >> s->first) & 1u) != 0) == s->second);
  };
  std::vector<State> seeds = saturated_states(sigma, root_has_f, lim, &truncated);

  detail::Universe uni;
  std::vector<int> frontier;
  for (auto& raw : seeds) {
    State s = shrink(raw);
    if (norm(s) > bounds.max_norm) continue;
    int dom = uni.find_dominating(s);
    if (dom >= 0) {
      // The weaker state has the same root label, so it seeds just as well.
      uni.is_seed[dom] = true;
      continue;
    }
    int before = static_cast<int>(uni.states.size());
    if (detail::add_with_substates(uni, s, true, bounds.max_states, &truncated) < 0) break;
    for (int fresh = before; fresh < static_cast<int>(uni.states.size()); ++fresh)
      frontier.push_back(fresh);
  }

  SuccessorFn succ = default_successors(bounds, &truncated);

  auto edges_now = [&]() {
    int n = static_cast<int>(uni.states.size());
    std::vector<std::vector<int>> edges(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (step_exists(uni.states[i], uni.states[j])) edges[i].push_back(j);
    return edges;
  };

  // Tries to cut a regular fragment containing a seed out of the current
  // universe; on success assembles the certificate and fills `out`.
  auto try_accept = [&](SearchOutcome& out) {
    if (uni.states.empty()) return false;
    auto edges = edges_now();
    auto alive = detail::regular_survivors(uni, edges);
    int seed_at = -1;
    for (int i = 0; i < static_cast<int>(uni.states.size()); ++i)
      if (alive[i] && uni.is_seed[i]) {
        seed_at = i;
        break;
      }
    if (seed_at < 0) return false;

    const auto& ops = detail::closure_ops(*sigma);
    std::vector<bool> in_a(uni.states.size(), false);
    std::deque<int> work;
    auto enqueue = [&](int x) {
      if (!in_a[x]) {
        in_a[x] = true;
        work.push_back(x);
      }
    };
    enqueue(seed_at);
    for (;;) {
      while (!work.empty()) {
        int x = work.front();
        work.pop_front();
        for (int r : uni.sub_reps[x]) enqueue(r);
        // shortest realizing path among survivors for every root obligation
        const State& s = uni.states[x];
        std::uint64_t rootlab = s.label[s.root];
        for (std::size_t k = 0; k < ops.evt_reps.size(); ++k) {
          if (!((rootlab >> ops.evt_reps[k]) & 1u)) continue;
          if (detail::ClosureOps::holds(rootlab, ops.evt_child[k])) continue;
          std::vector<int> parent(uni.states.size(), -2);
          std::deque<int> bfs{x};
          parent[x] = -1;
          int target = -1;
          while (!bfs.empty() && target < 0) {
            int y = bfs.front();
            bfs.pop_front();
            for (int z : edges[y]) {
              if (!alive[z] || parent[z] != -2) continue;
              parent[z] = y;
              const State& sz = uni.states[z];
              if (detail::ClosureOps::holds(sz.label[sz.root], ops.evt_child[k])) {
                target = z;
                break;
              }
              bfs.push_back(z);
            }
          }
          if (target < 0) return false;  // defensive: x should not have survived
          for (int t = target; t != x; t = parent[t]) enqueue(t);
        }
      }
      // seriality pass; additions loop back through full processing
      bool added = false;
      for (int x = 0; x < static_cast<int>(uni.states.size()) && !added; ++x) {
        if (!in_a[x]) continue;
        bool has = false;
        for (int y : edges[x])
          if (in_a[y]) has = true;
        if (has) continue;
        int pick = -1;
        for (int y : edges[x])
          if (alive[y]) {
            if (y == x) {
              pick = y;
              break;
            }
            if (pick < 0) pick = y;
          }
        if (pick < 0) return false;  // defensive: x should not have survived
        enqueue(pick);
        added = true;
      }
      if (!added) break;
    }

    std::vector<int> chosen;
    for (int i = 0; i < static_cast<int>(uni.states.size()); ++i)
      if (in_a[i]) chosen.push_back(i);
    out.sat = true;
    out.certificate = detail::assemble_certificate(uni, chosen, edges, sigma);
    int seed_block =
        static_cast<int>(std::find(chosen.begin(), chosen.end(), seed_at) - chosen.begin());
    const State& sseed = uni.states[seed_at];
    out.witness = "s" + std::to_string(seed_block) + "_" + sseed.names[sseed.root];
    out.explored = static_cast<int>(uni.states.size());
    return true;
  };

  SearchOutcome out;
  if (try_accept(out)) return out;

  for (int depth = 0; depth < bounds.max_path && !frontier.empty(); ++depth) {
    // Expand the frontier; waves may run in parallel, results merge in input
    // order so the outcome is seed-stable.
    std::vector<std::vector<State>> results(frontier.size());
    int nthreads = std::max(1, bounds.threads);
    if (nthreads == 1 || frontier.size() <= 1) {
      for (std::size_t i = 0; i < frontier.size(); ++i)
        results[i] = succ(uni.states[frontier[i]]);
    } else {
      std::vector<std::thread> pool;
      std::size_t chunk = (frontier.size() + nthreads - 1) / nthreads;
      for (int t = 0; t < nthreads; ++t) {
        std::size_t lo = t * chunk, hi = std::min(frontier.size(), lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&results, &uni, &succ, &frontier, lo, hi]() {
          for (std::size_t i = lo; i < hi; ++i) results[i] = succ(uni.states[frontier[i]]);
        });
      }
      for (auto& th : pool) th.join();
    }

    std::vector<int> next;
    bool full = false;
    for (std::size_t i = 0; i < frontier.size() && !full; ++i) {
      for (State& cand : results[i]) {
        if (uni.find_equivalent(cand) >= 0) continue;
        if (uni.find_dominating(cand) >= 0) continue;
        int before = static_cast<int>(uni.states.size());
        if (detail::add_with_substates(uni, cand, false, bounds.max_states, &truncated) < 0) {
          full = true;
          break;
        }
        for (int fresh = before; fresh < static_cast<int>(uni.states.size()); ++fresh)
          next.push_back(fresh);
      }
    }
    if (try_accept(out)) return out;
    if (full) {
      truncated = true;
      break;
    }
    if (!next.empty() && depth + 1 >= bounds.max_path) truncated = true;
    frontier = std::move(next);
  }

  if (try_accept(out)) return out;
  out.sat = false;
  out.exhausted = !truncated;
  out.explored = static_cast<int>(uni.states.size());
  return out;
}

}  // namespace dgl
