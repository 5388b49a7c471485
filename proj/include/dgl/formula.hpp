#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dgl {

// ===========================================================================
// Hash-consed formula AST over the primitive basis {atom, ~, &, <>, O, F}.
// []x = ~<>~x, G x = ~F~x, and |, ->, <-> are expanded by the parser and the
// builder helpers; only the six primitive node kinds exist after construction.
// Nodes are interned, so structurally identical formulas are pointer-identical.
// ===========================================================================

enum class Kind : unsigned char { Atom, Neg, And, Dia, Next, Evt };

class Formula {
 public:
  Kind kind = Kind::Atom;
  const Formula* a = nullptr;  // unary child, or left conjunct
  const Formula* b = nullptr;  // right conjunct
  std::string name;            // atom name
  std::size_t hash = 0;
  std::uint64_t uid = 0;       // interning sequence number

 private:
  Formula() = default;
  friend class FormulaTable;
};

using Node = const Formula*;

// Interning table. The only shared mutable state in the library; guarded by a
// mutex so concurrent insert-or-get keeps stable identities.
class FormulaTable {
 public:
  static FormulaTable& instance() {
    static FormulaTable t;
    return t;
  }

  Node get(Kind k, Node a, Node b, std::string_view name) {
    std::size_t h = std::hash<int>()(static_cast<int>(k));
    h = h * 1099511628211ull + reinterpret_cast<std::uintptr_t>(a);
    h = h * 1099511628211ull + reinterpret_cast<std::uintptr_t>(b);
    h = h * 1099511628211ull + std::hash<std::string_view>()(name);
    std::lock_guard<std::mutex> lock(mu_);
    auto range = map_.equal_range(h);
    for (auto it = range.first; it != range.second; ++it) {
      const Formula* f = it->second.get();
      if (f->kind == k && f->a == a && f->b == b && f->name == name) return f;
    }
    std::unique_ptr<Formula> node(new Formula());
    node->kind = k;
    node->a = a;
    node->b = b;
    node->name = std::string(name);
    node->hash = h;
    node->uid = next_uid_++;
    Node out = node.get();
    map_.emplace(h, std::move(node));
    return out;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return map_.size();
  }

 private:
  FormulaTable() = default;
  mutable std::mutex mu_;
  std::unordered_multimap<std::size_t, std::unique_ptr<Formula>> map_;
  std::uint64_t next_uid_ = 0;
};

inline Node atom(std::string_view n) {
  return FormulaTable::instance().get(Kind::Atom, nullptr, nullptr, n);
}
inline Node neg(Node x) { return FormulaTable::instance().get(Kind::Neg, x, nullptr, {}); }
inline Node conj(Node l, Node r) { return FormulaTable::instance().get(Kind::And, l, r, {}); }
inline Node dia(Node x) { return FormulaTable::instance().get(Kind::Dia, x, nullptr, {}); }
inline Node nxt(Node x) { return FormulaTable::instance().get(Kind::Next, x, nullptr, {}); }
inline Node evt(Node x) { return FormulaTable::instance().get(Kind::Evt, x, nullptr, {}); }

// Derived connectives (expanded immediately; no derived node kinds exist).
inline Node box(Node x) { return neg(dia(neg(x))); }
inline Node hence(Node x) { return neg(evt(neg(x))); }
inline Node disj(Node l, Node r) { return neg(conj(neg(l), neg(r))); }
inline Node impl(Node l, Node r) { return neg(conj(l, neg(r))); }
inline Node iff(Node l, Node r) { return conj(impl(l, r), impl(r, l)); }

// Strips leading double negations only; used for membership tests that
// identify a formula with its double negation.
inline Node neg_norm(Node f) {
  while (f->kind == Kind::Neg && f->a->kind == Kind::Neg) f = f->a->a;
  return f;
}

// ---------------------------------------------------------------------------
// Printing.  The printer reconstructs the [] and G sugar for the two shapes
// ~<>~x and ~F~x; everything else prints in primitive form.  parse(print(f))
// returns the identical interned node.
// ---------------------------------------------------------------------------

enum class Shape : unsigned char { Atom, Neg, Box, Hence, Dia, Next, Evt, And };

struct Display {
  Shape shape;
  Node x;
  Node y;
};

inline Display display_of(Node f) {
  switch (f->kind) {
    case Kind::Atom:
      return {Shape::Atom, nullptr, nullptr};
    case Kind::Neg: {
      Node c = f->a;
      if (c->kind == Kind::Dia && c->a->kind == Kind::Neg) return {Shape::Box, c->a->a, nullptr};
      if (c->kind == Kind::Evt && c->a->kind == Kind::Neg) return {Shape::Hence, c->a->a, nullptr};
      return {Shape::Neg, c, nullptr};
    }
    case Kind::And:
      return {Shape::And, f->a, f->b};
    case Kind::Dia:
      return {Shape::Dia, f->a, nullptr};
    case Kind::Next:
      return {Shape::Next, f->a, nullptr};
    case Kind::Evt:
      return {Shape::Evt, f->a, nullptr};
  }
  return {Shape::Atom, nullptr, nullptr};  // unreachable
}

inline void print_to(std::string& out, Node f) {
  Display d = display_of(f);
  auto unary = [&out](const char* op, bool letter, Node x) {
    out += op;
    if (display_of(x).shape == Shape::And) {
      out += '(';
      print_to(out, x);
      out += ')';
    } else {
      if (letter) out += ' ';
      print_to(out, x);
    }
  };
  switch (d.shape) {
    case Shape::Atom:
      out += f->name;
      break;
    case Shape::Neg:
      unary("~", false, d.x);
      break;
    case Shape::Box:
      unary("[]", false, d.x);
      break;
    case Shape::Dia:
      unary("<>", false, d.x);
      break;
    case Shape::Hence:
      unary("G", true, d.x);
      break;
    case Shape::Evt:
      unary("F", true, d.x);
      break;
    case Shape::Next:
      unary("O", true, d.x);
      break;
    case Shape::And:
      // & is left-associative: the left conjunct never needs parentheses.
      print_to(out, d.x);
      out += " & ";
      if (display_of(d.y).shape == Shape::And) {
        out += '(';
        print_to(out, d.y);
        out += ')';
      } else {
        print_to(out, d.y);
      }
      break;
  }
}

inline std::string print(Node f) {
  std::string out;
  print_to(out, f);
  return out;
}

// Printed (tree) size of a formula.  DAG-shared subterms count once per
// occurrence, so this can be exponential in the node count; the value
// saturates instead of overflowing.
inline std::size_t print_size(Node f) {
  static std::mutex mu;
  static std::unordered_map<Node, std::size_t> memo;
  constexpr std::size_t kCap = std::size_t(1) << 62;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = memo.find(f);
    if (it != memo.end()) return it->second;
  }
  Display d = display_of(f);
  auto sat_add = [](std::size_t a, std::size_t b) {
    return (a > kCap - b) ? kCap : a + b;
  };
  std::size_t sz = 0;
  auto unary = [&](std::size_t oplen, bool letter, Node x) {
    std::size_t inner = print_size(x);
    bool par = display_of(x).shape == Shape::And;
    return sat_add(oplen + (par ? 2 : (letter ? 1 : 0)), inner);
  };
  switch (d.shape) {
    case Shape::Atom: sz = f->name.size(); break;
    case Shape::Neg: sz = unary(1, false, d.x); break;
    case Shape::Box: sz = unary(2, false, d.x); break;
    case Shape::Dia: sz = unary(2, false, d.x); break;
    case Shape::Hence: sz = unary(1, true, d.x); break;
    case Shape::Evt: sz = unary(1, true, d.x); break;
    case Shape::Next: sz = unary(1, true, d.x); break;
    case Shape::And: {
      std::size_t r = print_size(d.y);
      bool par = display_of(d.y).shape == Shape::And;
      sz = sat_add(sat_add(print_size(d.x), 3 + (par ? 2 : 0)), r);
      break;
    }
  }
  std::lock_guard<std::mutex> lock(mu);
  memo.emplace(f, sz);
  return sz;
}

struct PrintLimitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string print_guarded(Node f, std::size_t max_chars) {
  if (print_size(f) > max_chars)
    throw PrintLimitError("printed form exceeds " + std::to_string(max_chars) + " characters");
  return print(f);
}

// Lazily streams the printed form, so that two formulas can be compared in
// canonical (lexicographic-on-printed-form) order without materializing
// possibly huge strings.
class PrintStream {
 public:
  explicit PrintStream(Node f) { push_node(f); }

  int next() {
    while (!stack_.empty()) {
      Frame& fr = stack_.back();
      if (fr.lit) {
        if (fr.lit[fr.pos]) return static_cast<unsigned char>(fr.lit[fr.pos++]);
        stack_.pop_back();
        continue;
      }
      Node f = fr.f;
      stack_.pop_back();
      expand(f);
    }
    return -1;
  }

 private:
  struct Frame {
    const char* lit = nullptr;
    std::size_t pos = 0;
    Node f = nullptr;
  };
  std::vector<Frame> stack_;

  void push_lit(const char* s) { stack_.push_back({s, 0, nullptr}); }
  void push_node(Node f) { stack_.push_back({nullptr, 0, f}); }

  // Frames are pushed in reverse emission order.
  void expand_unary(const char* op, const char* gap, Node x) {
    if (display_of(x).shape == Shape::And) {
      push_lit(")");
      push_node(x);
      push_lit("(");
      push_lit(op);
    } else {
      push_node(x);
      if (gap) push_lit(gap);
      push_lit(op);
    }
  }

  void expand(Node f) {
    Display d = display_of(f);
    switch (d.shape) {
      case Shape::Atom:
        push_lit(f->name.c_str());  // interned nodes are immortal, storage stable
        break;
      case Shape::Neg: expand_unary("~", nullptr, d.x); break;
      case Shape::Box: expand_unary("[]", nullptr, d.x); break;
      case Shape::Dia: expand_unary("<>", nullptr, d.x); break;
      case Shape::Hence: expand_unary("G", " ", d.x); break;
      case Shape::Evt: expand_unary("F", " ", d.x); break;
      case Shape::Next: expand_unary("O", " ", d.x); break;
      case Shape::And:
        if (display_of(d.y).shape == Shape::And) {
          push_lit(")");
          push_node(d.y);
          push_lit(" & (");
        } else {
          push_node(d.y);
          push_lit(" & ");
        }
        push_node(d.x);
        break;
    }
  }
};

inline int cmp_printed(Node a, Node b) {
  if (a == b) return 0;
  PrintStream sa(a), sb(b);
  for (;;) {
    int ca = sa.next(), cb = sb.next();
    if (ca != cb) return ca < cb ? -1 : 1;
    if (ca < 0) return 0;
  }
}

inline bool formula_less(Node a, Node b) { return cmp_printed(a, b) < 0; }

// ---------------------------------------------------------------------------
// Parsing.  ASCII grammar: atoms [a-z][a-zA-Z0-9_]*; ~ & | -> <-> <> [] O F G;
// precedence ~,modal > & > | > -> (right-assoc) > <->; parentheses allowed.
// ---------------------------------------------------------------------------

struct ParseError : std::runtime_error {
  std::size_t position;
  ParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)), position(pos) {}
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Node parse() {
    Node f = parse_iff();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return f;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r'))
      ++pos_;
  }

  bool eat(std::string_view tok) {
    skip_ws();
    if (text_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  bool peek(std::string_view tok) {
    skip_ws();
    return text_.substr(pos_, tok.size()) == tok;
  }

  Node parse_iff() {
    Node l = parse_impl();
    if (eat("<->")) return iff(l, parse_iff());
    return l;
  }

  Node parse_impl() {
    Node l = parse_or();
    if (peek("<->")) return l;  // handled one level up
    if (eat("->")) return impl(l, parse_impl());
    return l;
  }

  Node parse_or() {
    Node l = parse_and();
    while (true) {
      skip_ws();
      if (peek("->") || peek("<->")) return l;
      if (eat("|"))
        l = disj(l, parse_and());
      else
        return l;
    }
  }

  Node parse_and() {
    Node l = parse_unary();
    while (eat("&")) l = conj(l, parse_unary());
    return l;
  }

  Node parse_unary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    if (eat("~")) return neg(parse_unary());
    if (eat("<>")) return dia(parse_unary());
    if (eat("[]")) return box(parse_unary());
    if (eat("O")) return nxt(parse_unary());
    if (eat("F")) return evt(parse_unary());
    if (eat("G")) return hence(parse_unary());
    if (eat("(")) {
      Node f = parse_iff();
      if (!eat(")")) throw ParseError("expected ')'", pos_);
      return f;
    }
    char c = text_[pos_];
    if (c >= 'a' && c <= 'z') {
      std::size_t start = pos_;
      ++pos_;
      while (pos_ < text_.size()) {
        char d = text_[pos_];
        if ((d >= 'a' && d <= 'z') || (d >= 'A' && d <= 'Z') || (d >= '0' && d <= '9') || d == '_')
          ++pos_;
        else
          break;
      }
      return atom(text_.substr(start, pos_ - start));
    }
    throw ParseError(std::string("unknown token '") + c + "'", pos_);
  }
};

inline Node parse(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Subformulas and the closure S±.
// ---------------------------------------------------------------------------

inline void collect_subformulas(Node f, std::unordered_set<Node>& seen, std::vector<Node>& out) {
  if (!seen.insert(f).second) return;
  out.push_back(f);
  if (f->a) collect_subformulas(f->a, seen, out);
  if (f->b) collect_subformulas(f->b, seen, out);
}

inline std::vector<Node> subformulas(Node f) {
  std::unordered_set<Node> seen;
  std::vector<Node> out;
  collect_subformulas(f, seen, out);
  return out;
}

class Closure;
using ClosureRef = std::shared_ptr<const Closure>;

// S±: closed under subformulas and under single negation modulo
// double-negation collapse.  Elements are kept in canonical order
// (lexicographic on printed form).  Membership is resolved through "slots":
// a slot is a positive representative (a non-negated formula) together with
// a polarity, and every Σ-member maps to exactly one signed slot.
class Closure {
 public:
  static ClosureRef of(Node f) { return of(std::vector<Node>{f}); }

  static ClosureRef of(const std::vector<Node>& fs) {
    std::unordered_set<Node> seen;
    std::vector<Node> all;
    for (Node f : fs) collect_subformulas(f, seen, all);
    std::vector<Node> withneg = all;
    for (Node f : all) {
      Node n = (f->kind == Kind::Neg) ? f->a : neg(f);
      if (seen.insert(n).second) withneg.push_back(n);
    }
    std::sort(withneg.begin(), withneg.end(), formula_less);

    auto c = std::make_shared<Closure>();
    c->elements_ = std::move(withneg);
    std::unordered_set<Node> repset;
    for (Node e : c->elements_) {
      Node n = neg_norm(e);
      if (n->kind == Kind::Neg) n = neg_norm(n->a);
      if (repset.insert(n).second) c->posreps_.push_back(n);
    }
    std::sort(c->posreps_.begin(), c->posreps_.end(), formula_less);
    for (std::size_t i = 0; i < c->posreps_.size(); ++i)
      c->rep_index_[c->posreps_[i]] = static_cast<int>(i);

    std::uint64_t h = 1469598103934665603ull;
    std::string buf;
    for (Node e : c->elements_) {
      buf.clear();
      print_to(buf, e);
      for (char ch : buf) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ull;
      h = (h ^ 0xabu) * 1099511628211ull;
    }
    c->content_hash_ = h;

    if (c->posreps_.size() <= 64) {
      for (std::size_t i = 0; i < c->posreps_.size(); ++i) {
        std::uint64_t bit = std::uint64_t(1) << i;
        switch (c->posreps_[i]->kind) {
          case Kind::Dia: c->dia_mask_ |= bit; break;
          case Kind::Evt: c->evt_mask_ |= bit; break;
          case Kind::Next: c->next_mask_ |= bit; break;
          case Kind::And: c->and_mask_ |= bit; break;
          default: break;
        }
      }
    }
    return c;
  }

  const std::vector<Node>& elements() const { return elements_; }
  const std::vector<Node>& posreps() const { return posreps_; }
  int size() const { return static_cast<int>(elements_.size()); }
  int posrep_count() const { return static_cast<int>(posreps_.size()); }

  // (positive representative index, polarity); nullopt if f is not over Σ.
  std::optional<std::pair<int, bool>> slot(Node f) const {
    Node n = neg_norm(f);
    bool pol = true;
    if (n->kind == Kind::Neg) {
      n = neg_norm(n->a);
      pol = false;
    }
    auto it = rep_index_.find(n);
    if (it == rep_index_.end()) return std::nullopt;
    return std::make_pair(it->second, pol);
  }

  std::uint64_t content_hash() const { return content_hash_; }
  bool same(const Closure& o) const {
    return content_hash_ == o.content_hash_ && elements_.size() == o.elements_.size();
  }

  std::uint64_t dia_mask() const { return dia_mask_; }
  std::uint64_t evt_mask() const { return evt_mask_; }
  std::uint64_t next_mask() const { return next_mask_; }
  std::uint64_t and_mask() const { return and_mask_; }

 private:
  std::vector<Node> elements_;
  std::vector<Node> posreps_;
  std::unordered_map<Node, int> rep_index_;
  std::uint64_t content_hash_ = 0;
  std::uint64_t dia_mask_ = 0, evt_mask_ = 0, next_mask_ = 0, and_mask_ = 0;
};

inline ClosureRef closure_pm(Node f) { return Closure::of(f); }

}  // namespace dgl
