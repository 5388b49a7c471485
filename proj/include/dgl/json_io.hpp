#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgl/formula.hpp"
#include "dgl/poset_model.hpp"
#include "dgl/quasimodel.hpp"
#include "dgl/state_space.hpp"

namespace dgl {

using json = nlohmann::json;

// Malformed documents (wrong JSON shape) are distinct from semantic rejects;
// the CLI maps them to the usage/format exit code.
struct DocumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace docs {

inline std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array())
    throw DocumentError(std::string("expected array field '") + key + "'");
  std::vector<std::string> out;
  for (const auto& e : j[key]) {
    if (!e.is_string()) throw DocumentError(std::string("field '") + key + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> edge_list(const json& j, const char* key) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw DocumentError(std::string("expected array field '") + key + "'");
  for (const auto& e : j[key]) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
      throw DocumentError(std::string("entries of '") + key + "' must be [from,to] string pairs");
    out.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  }
  return out;
}

inline std::map<std::string, std::vector<Node>> label_map(const json& j) {
  std::map<std::string, std::vector<Node>> out;
  if (!j.contains("labels")) return out;
  if (!j["labels"].is_object()) throw DocumentError("'labels' must be an object");
  for (auto& [pt, arr] : j["labels"].items()) {
    if (!arr.is_array()) throw DocumentError("label entry for '" + pt + "' must be an array");
    std::vector<Node> fs;
    for (const auto& e : arr) {
      if (!e.is_string()) throw DocumentError("label formulas must be strings");
      try {
        fs.push_back(parse(e.get<std::string>()));
      } catch (const ParseError& pe) {
        throw DocumentError("label formula '" + e.get<std::string>() + "': " + pe.what());
      }
    }
    out.emplace(pt, std::move(fs));
  }
  return out;
}

// Sigma: explicit "sigma" list, else the closure of all label formulas.
inline ClosureRef sigma_of(const json& j, const std::map<std::string, std::vector<Node>>& labels) {
  std::vector<Node> gens;
  if (j.contains("sigma")) {
    for (const auto& e : j["sigma"]) {
      if (!e.is_string()) throw DocumentError("'sigma' must hold formula strings");
      try {
        gens.push_back(parse(e.get<std::string>()));
      } catch (const ParseError& pe) {
        throw DocumentError("sigma formula '" + e.get<std::string>() + "': " + pe.what());
      }
    }
  } else {
    for (auto& [pt, fs] : labels) gens.insert(gens.end(), fs.begin(), fs.end());
  }
  if (gens.empty()) throw DocumentError("cannot infer sigma: no labels and no 'sigma' field");
  return Closure::of(gens);
}

}  // namespace docs

// {"points":[...], "order":[["a","b"]], "f":{"a":"b"}, "val":{"p":["a"]}}
inline PosetModel model_from_json(const json& j) {
  auto points = docs::string_list(j, "points");
  auto order = docs::edge_list(j, "order");
  std::map<std::string, std::string> fmap;
  if (!j.contains("f") || !j["f"].is_object()) throw DocumentError("expected object field 'f'");
  for (auto& [src, dst] : j["f"].items()) {
    if (!dst.is_string()) throw DocumentError("'f' entries must be point names");
    fmap[src] = dst.get<std::string>();
  }
  std::map<std::string, std::vector<std::string>> val;
  if (j.contains("val")) {
    if (!j["val"].is_object()) throw DocumentError("'val' must be an object");
    for (auto& [p, arr] : j["val"].items()) {
      if (!arr.is_array()) throw DocumentError("'val' entries must be point arrays");
      std::vector<std::string> pts;
      for (const auto& e : arr) pts.push_back(e.get<std::string>());
      val[p] = pts;
    }
  }
  return make_model(points, order, fmap, val);
}

inline json model_to_json(const PosetModel& m) {
  json j;
  j["points"] = m.names;
  json order = json::array();
  for (int i = 0; i < m.size(); ++i)
    for (int k = 0; k < m.size(); ++k)
      if (m.below[i].test(k)) order.push_back({m.names[k], m.names[i]});
  j["order"] = order;
  json f = json::object();
  for (int i = 0; i < m.size(); ++i) f[m.names[i]] = m.names[m.f[i]];
  j["f"] = f;
  json val = json::object();
  for (auto& [p, set] : m.val) {
    json pts = json::array();
    for (int i = 0; i < m.size(); ++i)
      if (set.test(i)) pts.push_back(m.names[i]);
    val[p] = pts;
  }
  j["val"] = val;
  return j;
}

// {"points":[...], "order":[[below,above]], "root":"a", "labels":{...},
//  "sigma":[...] (optional)}
inline State state_from_json(const json& j) {
  auto points = docs::string_list(j, "points");
  auto order = docs::edge_list(j, "order");
  if (!j.contains("root") || !j["root"].is_string())
    throw DocumentError("expected string field 'root'");
  auto labels = docs::label_map(j);
  ClosureRef sigma = docs::sigma_of(j, labels);
  return make_state(sigma, points, order, j["root"].get<std::string>(), labels);
}

inline json labels_to_json(const ClosureRef& sigma, const std::vector<std::string>& names,
                           const std::vector<std::uint64_t>& label) {
  json labels = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    json arr = json::array();
    for (Node f : SigmaType{sigma, label[i]}.members()) arr.push_back(print(f));
    labels[names[i]] = arr;
  }
  return labels;
}

inline json sigma_to_json(const ClosureRef& sigma) {
  json arr = json::array();
  for (Node f : sigma->elements()) arr.push_back(print(f));
  return arr;
}

inline json state_to_json(const State& s) {
  json j;
  j["points"] = s.names;
  json order = json::array();
  for (int i = 0; i < s.size(); ++i)
    for (int k = 0; k < s.size(); ++k)
      if (s.below[i].test(k)) order.push_back({s.names[k], s.names[i]});
  j["order"] = order;
  j["root"] = s.names[s.root];
  j["labels"] = labels_to_json(s.sigma, s.names, s.label);
  j["sigma"] = sigma_to_json(s.sigma);
  return j;
}

// {"points":[...], "order":[[below,above]], "S":[[from,to]], "labels":{...},
//  "sigma":[...] (optional)}
inline Quasimodel quasimodel_from_json(const json& j) {
  auto points = docs::string_list(j, "points");
  auto order = docs::edge_list(j, "order");
  auto s_edges = docs::edge_list(j, "S");
  auto labels = docs::label_map(j);
  ClosureRef sigma = docs::sigma_of(j, labels);
  return make_quasimodel(sigma, points, order, s_edges, labels);
}

inline json quasimodel_to_json(const Quasimodel& q) {
  json j;
  j["points"] = q.names;
  json order = json::array();
  for (int i = 0; i < q.size(); ++i)
    for (int k = 0; k < q.size(); ++k)
      if (q.below[i].test(k)) order.push_back({q.names[k], q.names[i]});
  j["order"] = order;
  json s = json::array();
  for (int i = 0; i < q.size(); ++i)
    for (int y : q.succ[i]) s.push_back({q.names[i], q.names[y]});
  j["S"] = s;
  j["labels"] = labels_to_json(q.sigma, q.names, q.label);
  j["sigma"] = sigma_to_json(q.sigma);
  return j;
}

// {"stem":[...], "loop":[...]}
inline Lasso lasso_from_json(const json& j, const Quasimodel& q) {
  Lasso l;
  for (const auto& n : docs::string_list(j, "stem")) {
    int p = q.point_index(n);
    if (p < 0) throw DocumentError("lasso stem point '" + n + "' not in quasimodel");
    l.stem.push_back(p);
  }
  for (const auto& n : docs::string_list(j, "loop")) {
    int p = q.point_index(n);
    if (p < 0) throw DocumentError("lasso loop point '" + n + "' not in quasimodel");
    l.loop.push_back(p);
  }
  check_lasso(q, l);
  return l;
}

inline json lasso_to_json(const Quasimodel& q, const Lasso& l) {
  json j;
  json stem = json::array(), loop = json::array();
  for (int p : l.stem) stem.push_back(q.names[p]);
  for (int p : l.loop) loop.push_back(q.names[p]);
  j["stem"] = stem;
  j["loop"] = loop;
  return j;
}

inline json formula_ast_json(Node f) {
  json j;
  switch (f->kind) {
    case Kind::Atom:
      j["kind"] = "atom";
      j["name"] = f->name;
      break;
    case Kind::Neg:
      j["kind"] = "neg";
      j["child"] = formula_ast_json(f->a);
      break;
    case Kind::And:
      j["kind"] = "and";
      j["left"] = formula_ast_json(f->a);
      j["right"] = formula_ast_json(f->b);
      break;
    case Kind::Dia:
      j["kind"] = "dia";
      j["child"] = formula_ast_json(f->a);
      break;
    case Kind::Next:
      j["kind"] = "next";
      j["child"] = formula_ast_json(f->a);
      break;
    case Kind::Evt:
      j["kind"] = "evt";
      j["child"] = formula_ast_json(f->a);
      break;
  }
  return j;
}

}  // namespace dgl
