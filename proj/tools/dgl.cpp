// dgl — command line workbench for dynamic Godel-Lob logic: formula parsing,
// model checking over finite dynamic poset models, quasimodel validation,
// lasso unwinding, simulation formulas and bounded satisfiability search.
//
// Exit codes: 0 true/success, 1 false/reject, 2 usage or format error,
// 3 satisfiability search exhausted its bounds.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dgl/json_io.hpp"
#include "dgl/search.hpp"
#include "dgl/simformula.hpp"

namespace {

dgl::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dgl::DocumentError("cannot open '" + path + "'");
  dgl::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw dgl::DocumentError("invalid JSON in '" + path + "': " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const dgl::json& j) {
  std::ofstream out(path);
  if (!out) throw dgl::DocumentError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

struct Options {
  bool as_json = false;
  int rc = 0;
};

void emit(const Options& opt, const dgl::json& j, const std::string& text) {
  if (opt.as_json)
    std::cout << j.dump(2) << "\n";
  else
    std::cout << text << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dgl: workbench for dynamic Godel-Lob logic"};
  app.require_subcommand(1);
  Options opt;
  app.add_flag("--json", opt.as_json, "machine-readable JSON output");

  // --- parse ---------------------------------------------------------------
  std::string parse_f;
  auto* cmd_parse = app.add_subcommand("parse", "parse a formula and print its AST");
  cmd_parse->add_option("-f,--formula", parse_f, "formula text")->required();
  cmd_parse->callback([&]() {
    dgl::Node f = dgl::parse(parse_f);
    dgl::json j;
    j["formula"] = dgl::print(f);
    j["ast"] = dgl::formula_ast_json(f);
    std::function<std::string(dgl::Node)> sexp = [&](dgl::Node n) -> std::string {
      switch (n->kind) {
        case dgl::Kind::Atom: return n->name;
        case dgl::Kind::Neg: return "(neg " + sexp(n->a) + ")";
        case dgl::Kind::And: return "(and " + sexp(n->a) + " " + sexp(n->b) + ")";
        case dgl::Kind::Dia: return "(dia " + sexp(n->a) + ")";
        case dgl::Kind::Next: return "(next " + sexp(n->a) + ")";
        case dgl::Kind::Evt: return "(evt " + sexp(n->a) + ")";
      }
      return "?";
    };
    emit(opt, j, sexp(f) + "\n" + dgl::print(f));
  });

  // --- closure -------------------------------------------------------------
  std::string closure_f;
  auto* cmd_closure = app.add_subcommand("closure", "print the closure S± of a formula");
  cmd_closure->add_option("-f,--formula", closure_f, "formula text")->required();
  cmd_closure->callback([&]() {
    auto sigma = dgl::closure_pm(dgl::parse(closure_f));
    dgl::json j;
    j["sigma"] = dgl::sigma_to_json(sigma);
    j["size"] = sigma->size();
    std::string text;
    for (dgl::Node e : sigma->elements()) text += dgl::print(e) + "\n";
    text += "size: " + std::to_string(sigma->size());
    emit(opt, j, text);
  });

  // --- types ---------------------------------------------------------------
  std::string types_f;
  int types_limit = 20;
  auto* cmd_types = app.add_subcommand("types", "enumerate the Sigma-types of S±(formula)");
  cmd_types->add_option("-f,--formula", types_f, "formula text")->required();
  cmd_types->add_option("--limit", types_limit, "max positive representatives for enumeration");
  cmd_types->callback([&]() {
    auto sigma = dgl::closure_pm(dgl::parse(types_f));
    auto types = dgl::enumerate_types(sigma, types_limit);
    dgl::json arr = dgl::json::array();
    std::string text;
    for (const auto& t : types) {
      dgl::json row = dgl::json::array();
      std::string line;
      for (dgl::Node m : t.members()) {
        row.push_back(dgl::print(m));
        if (!line.empty()) line += ", ";
        line += dgl::print(m);
      }
      arr.push_back(row);
      text += "{" + line + "}\n";
    }
    dgl::json j;
    j["types"] = arr;
    j["count"] = types.size();
    text += "count: " + std::to_string(types.size());
    emit(opt, j, text);
  });

  // --- check-model ---------------------------------------------------------
  std::string cm_path;
  auto* cmd_cm = app.add_subcommand("check-model", "validate a poset model document");
  cmd_cm->add_option("--model", cm_path, "model JSON file")->required();
  cmd_cm->callback([&]() {
    dgl::PosetModel m = dgl::model_from_json(read_json_file(cm_path));
    dgl::json j;
    j["valid"] = true;
    j["points"] = m.size();
    emit(opt, j, "valid model with " + std::to_string(m.size()) + " point(s)");
  });

  // --- valid ---------------------------------------------------------------
  std::string v_path, v_f;
  auto* cmd_valid = app.add_subcommand("valid", "decide whether a formula is valid on a model");
  cmd_valid->add_option("--model", v_path, "model JSON file")->required();
  cmd_valid->add_option("-f,--formula", v_f, "formula text")->required();
  cmd_valid->callback([&]() {
    dgl::PosetModel m = dgl::model_from_json(read_json_file(v_path));
    dgl::Node f = dgl::parse(v_f);
    dgl::Bits t = dgl::eval(m, f);
    bool valid = t.count() == static_cast<std::size_t>(m.size());
    dgl::json j;
    j["valid"] = valid;
    if (!valid) {
      for (int i = 0; i < m.size(); ++i)
        if (!t.test(i)) {
          j["counterexample"] = m.names[i];
          break;
        }
    }
    emit(opt, j, valid ? "valid" : ("not valid (fails at '" + j["counterexample"].get<std::string>() + "')"));
    if (!valid) opt.rc = 1;
  });

  // --- fuzz-axioms -----------------------------------------------------------
  std::uint64_t fz_seed = 1;
  int fz_trials = 1000, fz_maxpts = 6;
  auto* cmd_fuzz = app.add_subcommand("fuzz-axioms",
                                      "check axiom instances and rules on random models");
  cmd_fuzz->add_option("--seed", fz_seed, "rng seed")->required();
  cmd_fuzz->add_option("--trials", fz_trials, "number of trials");
  cmd_fuzz->add_option("--max-points", fz_maxpts, "max model size");
  cmd_fuzz->callback([&]() {
    const std::vector<std::string> atoms = {"p", "q", "r"};
    const auto& schemes = dgl::axiom_scheme_names();
    int failures = 0;
    std::string first_failure;
    for (int t = 0; t < fz_trials; ++t) {
      std::uint64_t s = fz_seed + static_cast<std::uint64_t>(t);
      dgl::PosetModel m = dgl::random_model(s, fz_maxpts, atoms);
      const std::string& scheme = schemes[s % schemes.size()];
      std::map<std::string, dgl::Node> subst;
      int vi = 0;
      for (const auto& v : dgl::axiom_scheme_metavars(scheme))
        subst[v] = dgl::random_formula(s * 37 + (++vi), 2, atoms);
      dgl::Node inst = dgl::axiom_instance(scheme, subst);
      bool ok = dgl::is_valid(m, inst);
      // rule preservation: necessitation on the axiom instance, and modus
      // ponens through a second instance
      if (ok) ok = dgl::is_valid(m, dgl::box(inst)) && dgl::is_valid(m, dgl::nxt(inst)) &&
                   dgl::is_valid(m, dgl::hence(inst));
      if (ok) {
        dgl::Node other =
            dgl::axiom_instance(schemes[(s + 1) % schemes.size()],
                                {{"phi", subst["phi"]},
                                 {"psi", subst.count("psi") ? subst["psi"] : subst["phi"]},
                                 {"chi", subst["phi"]}});
        if (dgl::is_valid(m, dgl::impl(inst, other)) && !dgl::is_valid(m, other)) ok = false;
      }
      if (!ok) {
        ++failures;
        if (first_failure.empty())
          first_failure = scheme + " with seed " + std::to_string(s);
      }
    }
    dgl::json j;
    j["trials"] = fz_trials;
    j["failures"] = failures;
    if (failures) j["first_failure"] = first_failure;
    emit(opt, j,
         std::to_string(fz_trials) + " trials, " + std::to_string(failures) + " failure(s)" +
             (failures ? (": " + first_failure) : ""));
    if (failures) opt.rc = 1;
  });

  // --- simformula ------------------------------------------------------------
  std::string sf_path;
  std::size_t sf_max = 1u << 20;
  auto* cmd_sf = app.add_subcommand("simformula", "print Sim(w) for a state document");
  cmd_sf->add_option("--state", sf_path, "state JSON file")->required();
  cmd_sf->add_option("--max-print", sf_max, "printed size guard");
  cmd_sf->callback([&]() {
    dgl::State w = dgl::state_from_json(read_json_file(sf_path));
    dgl::Node sim = dgl::sim_formula(w);
    std::string text = dgl::print_guarded(sim, sf_max);
    dgl::json j;
    j["sim"] = text;
    emit(opt, j, text);
  });

  // --- simcheck ---------------------------------------------------------------
  std::string sc_left, sc_right;
  auto* cmd_sc = app.add_subcommand("simcheck", "decide left ⊴ right (left embeds into right)");
  cmd_sc->add_option("--left", sc_left, "state JSON file")->required();
  cmd_sc->add_option("--right", sc_right, "state JSON file")->required();
  cmd_sc->callback([&]() {
    dgl::State a = dgl::state_from_json(read_json_file(sc_left));
    dgl::State b = dgl::state_from_json(read_json_file(sc_right));
    bool sim = dgl::simulates(a, b);
    dgl::json j;
    j["simulates"] = sim;
    emit(opt, j, sim ? "simulated" : "not simulated");
    if (!sim) opt.rc = 1;
  });

  // --- state-of ----------------------------------------------------------------
  std::string so_model, so_point, so_f;
  auto* cmd_so = app.add_subcommand("state-of", "extract the Sigma-state of a model point");
  cmd_so->add_option("--model", so_model, "model JSON file")->required();
  cmd_so->add_option("--point", so_point, "point name")->required();
  cmd_so->add_option("-f,--formula", so_f, "formula generating Sigma = S±(f)")->required();
  cmd_so->callback([&]() {
    dgl::PosetModel m = dgl::model_from_json(read_json_file(so_model));
    int x = m.point_index(so_point);
    if (x < 0) throw dgl::DocumentError("unknown point '" + so_point + "'");
    auto sigma = dgl::closure_pm(dgl::parse(so_f));
    dgl::State s = dgl::state_of_point(m, x, sigma);
    dgl::json j = dgl::state_to_json(s);
    emit(opt, j, j.dump(2));
  });

  // --- check-quasimodel ----------------------------------------------------------
  std::string cq_path;
  auto* cmd_cq = app.add_subcommand("check-quasimodel", "validate a quasimodel document");
  cmd_cq->add_option("--quasimodel", cq_path, "quasimodel JSON file")->required();
  cmd_cq->callback([&]() {
    dgl::Quasimodel q = dgl::quasimodel_from_json(read_json_file(cq_path));
    dgl::json j;
    j["valid"] = true;
    j["points"] = q.size();
    emit(opt, j, "valid quasimodel with " + std::to_string(q.size()) + " point(s)");
  });

  // --- unwind -----------------------------------------------------------------
  std::string uw_path, uw_from, uw_prefix;
  auto* cmd_uw = app.add_subcommand("unwind", "extend a point or path to a realising lasso");
  cmd_uw->add_option("--quasimodel", uw_path, "quasimodel JSON file")->required();
  cmd_uw->add_option("--from", uw_from, "start point");
  cmd_uw->add_option("--prefix", uw_prefix, "comma-separated point path");
  cmd_uw->callback([&]() {
    dgl::Quasimodel q = dgl::quasimodel_from_json(read_json_file(uw_path));
    std::vector<int> prefix;
    if (!uw_prefix.empty()) {
      std::stringstream ss(uw_prefix);
      std::string item;
      while (std::getline(ss, item, ',')) {
        int p = q.point_index(item);
        if (p < 0) throw dgl::DocumentError("unknown prefix point '" + item + "'");
        prefix.push_back(p);
      }
    } else if (!uw_from.empty()) {
      int p = q.point_index(uw_from);
      if (p < 0) throw dgl::DocumentError("unknown point '" + uw_from + "'");
      prefix.push_back(p);
    } else {
      throw dgl::DocumentError("unwind needs --from or --prefix");
    }
    dgl::Lasso l = dgl::extend_to_lasso(q, prefix);
    dgl::json j = dgl::lasso_to_json(q, l);
    emit(opt, j, j.dump(2));
  });

  // --- neighbourhood ------------------------------------------------------------
  std::string nb_path, nb_lasso, nb_of;
  int nb_m = 1;
  auto* cmd_nb = app.add_subcommand("neighbourhood", "decide lasso ∈ N_m(of) in the limit model");
  cmd_nb->add_option("--quasimodel", nb_path, "quasimodel JSON file")->required();
  cmd_nb->add_option("--lasso", nb_lasso, "candidate lasso JSON file")->required();
  cmd_nb->add_option("--of", nb_of, "centre lasso JSON file")->required();
  cmd_nb->add_option("-m", nb_m, "neighbourhood index")->required();
  cmd_nb->callback([&]() {
    dgl::Quasimodel q = dgl::quasimodel_from_json(read_json_file(nb_path));
    dgl::Lasso v = dgl::lasso_from_json(read_json_file(nb_lasso), q);
    dgl::Lasso w = dgl::lasso_from_json(read_json_file(nb_of), q);
    bool member = dgl::neighbourhood_member(q, v, nb_m, w);
    dgl::json j;
    j["member"] = member;
    emit(opt, j, member ? "member" : "not a member");
    if (!member) opt.rc = 1;
  });

  // --- sat --------------------------------------------------------------------
  std::string sat_f, sat_cert;
  dgl::SearchBounds sat_bounds;
  auto* cmd_sat = app.add_subcommand("sat", "bounded satisfiability search with certificates");
  cmd_sat->add_option("-f,--formula", sat_f, "formula text")->required();
  cmd_sat->add_option("--max-norm", sat_bounds.max_norm, "state norm bound");
  cmd_sat->add_option("--max-states", sat_bounds.max_states, "explored state cap");
  cmd_sat->add_option("--max-path", sat_bounds.max_path, "expansion depth cap");
  cmd_sat->add_option("--seed", sat_bounds.seed, "rng seed (determinism contract)");
  cmd_sat->add_option("--threads", sat_bounds.threads, "parallel frontier expansion");
  cmd_sat->add_option("--certificate", sat_cert, "write SAT certificate quasimodel here");
  cmd_sat->callback([&]() {
    dgl::Node f = dgl::parse(sat_f);
    dgl::SearchOutcome res = dgl::sat_search(f, sat_bounds);
    dgl::json j;
    j["sat"] = res.sat;
    j["explored"] = res.explored;
    if (res.sat) {
      j["witness"] = res.witness;
      j["certificate_points"] = res.certificate->size();
      if (!sat_cert.empty()) {
        dgl::json cj = dgl::quasimodel_to_json(*res.certificate);
        cj["witness"] = res.witness;
        write_json_file(sat_cert, cj);
      }
      emit(opt, j,
           "SAT: certificate with " + std::to_string(res.certificate->size()) +
               " point(s), witness '" + res.witness + "', explored " +
               std::to_string(res.explored) + " state(s)");
    } else {
      j["exhausted"] = res.exhausted;
      emit(opt, j,
           std::string("NO_WITHIN_BOUNDS (") +
               (res.exhausted ? "bounded space exhausted" : "truncated at bounds") +
               "), explored " + std::to_string(res.explored) + " state(s)");
      opt.rc = 3;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits 0; any usage problem exits 2
  } catch (const dgl::DocumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dgl::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dgl::TypeLimitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dgl::PrintLimitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dgl::QuasimodelError& e) {
    std::cerr << "reject: " << e.what() << "\n";
    return 1;
  } catch (const dgl::LassoError& e) {
    std::cerr << "reject: " << e.what() << "\n";
    return 1;
  } catch (const dgl::ModelError& e) {
    std::cerr << "reject: " << e.what() << "\n";
    return 1;
  } catch (const dgl::StateError& e) {
    std::cerr << "reject: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return opt.rc;
}
