#pragma once

#include <algorithm>
#include <vector>

#include "dgl/formula.hpp"
#include "dgl/poset_model.hpp"
#include "dgl/state_space.hpp"

namespace dgl {

// Right-leaning conjunction of a canonically sorted, deduplicated list.
inline Node big_conj(std::vector<Node> parts) {
  std::sort(parts.begin(), parts.end(), formula_less);
  parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
  Node acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = conj(acc, parts[i]);
  return acc;
}

// Sim(w) = /\ l(root) /\ /\_{v substate} <>Sim(v).  Substates are memoized per
// point, so shared lower structure costs one interned subterm.
inline Node sim_formula(const State& w) {
  std::vector<Node> memo(w.size(), nullptr);
  std::function<Node(int)> sim = [&](int x) -> Node {
    if (memo[x]) return memo[x];
    SigmaType t{w.sigma, w.label[x]};
    Node acc = big_conj(t.members());
    std::vector<Node> dias;
    for (int v = 0; v < w.size(); ++v)
      if (w.below[x].test(v)) dias.push_back(dia(sim(v)));
    if (!dias.empty()) {
      std::sort(dias.begin(), dias.end(), formula_less);
      dias.erase(std::unique(dias.begin(), dias.end()), dias.end());
      for (Node d : dias) acc = conj(acc, d);
    }
    return memo[x] = acc;
  };
  return sim(w.root);
}

// Dual-path evaluation of the characterization x |= Sim(w) <=> w embeds into
// (M,x).  Always true; a false return is a bug detector for the test suite.
inline bool check_characterization(const PosetModel& m, int x, const State& w) {
  bool semantic = eval(m, sim_formula(w)).test(x);
  bool relational = simulates(w, state_of_point(m, x, w.sigma));
  return semantic == relational;
}

}  // namespace dgl
