#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "wfreach/bsr.hpp"
#include "wfreach/engine.hpp"
#include "wfreach/errors.hpp"
#include "wfreach/la.hpp"

namespace wfreach {

// Goal files use the same atoms as node labels, in a small textual form:
//
//   # soundness by hand
//   vas: end >= 1 & start = 0 & crtPO_out = 0
//   pm: exists x:user, y:user . xcd(x, apprPO) & ua(x, Manager) & x != y
//
// Both sections are optional and default to true. The vas section is a
// disjunction (|) of conjunctions (&) of place-bound atoms; the pm section
// is an existentially quantified boolean combination of xcd/ua/pa/geq/=
// atoms over declared constants.

namespace goal_detail {

struct Token {
  enum class Kind { ident, number, sym, end };
  Kind kind;
  std::string text;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (pos_ >= text_.size()) return {Token::Kind::end, ""};
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_'))
        ++pos_;
      return {Token::Kind::ident, text_.substr(start, pos_ - start)};
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      return {Token::Kind::number, text_.substr(start, pos_ - start)};
    }
    // two-char operators first
    for (const char* op : {"!=", ">=", "<=", "=="}) {
      if (text_.compare(pos_, 2, op) == 0) {
        pos_ += 2;
        return {Token::Kind::sym, op};
      }
    }
    ++pos_;
    return {Token::Kind::sym, std::string(1, c)};
  }

 private:
  const std::string& text_;
  size_t pos_ = 0;
};

class TokenStream {
 public:
  explicit TokenStream(const std::string& text) {
    Lexer lex(text);
    for (Token t = lex.next();; t = lex.next()) {
      tokens_.push_back(t);
      if (t.kind == Token::Kind::end) break;
    }
  }

  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_ == tokens_.size() - 1 ? pos_ : pos_++]; }
  bool accept_sym(const std::string& s) {
    if (peek().kind == Token::Kind::sym && peek().text == s) {
      take();
      return true;
    }
    return false;
  }
  bool accept_ident(const std::string& s) {
    if (peek().kind == Token::Kind::ident && peek().text == s) {
      take();
      return true;
    }
    return false;
  }
  void expect_sym(const std::string& s) {
    if (!accept_sym(s))
      fail(errc::bad_input, "expected '" + s + "' near '" + peek().text + "'");
  }

 private:
  std::vector<Token> tokens_;
  size_t pos_ = 0;
};

inline LaFormula parse_vas_dnf(const std::string& text,
                               const PetriNet& net) {
  TokenStream ts(text);
  LaFormula out;
  if (ts.peek().kind == Token::Kind::end) return LaFormula::top();
  if (ts.accept_ident("true")) return LaFormula::top();
  if (ts.accept_ident("false")) return LaFormula::bottom();
  while (true) {
    LaCube cube;
    while (true) {
      Token place = ts.take();
      if (place.kind != Token::Kind::ident)
        fail(errc::bad_input, "expected a place name, found '" + place.text + "'");
      auto it = net.place_index.find(place.text);
      if (it == net.place_index.end())
        fail(errc::bad_input, "unknown place '" + place.text + "'");
      Token op = ts.take();
      auto rel = rel_from_text(op.text);
      if (op.kind != Token::Kind::sym || !rel)
        fail(errc::bad_input, "expected a relation after '" + place.text + "'");
      Token num = ts.take();
      if (num.kind != Token::Kind::number)
        fail(errc::bad_input, "expected an integer after '" + op.text + "'");
      cube.atoms.push_back({it->second, *rel, std::stoll(num.text)});
      if (!ts.accept_sym("&")) break;
    }
    out.cubes.push_back(std::move(cube));
    if (!ts.accept_sym("|")) break;
  }
  if (ts.peek().kind != Token::Kind::end)
    fail(errc::bad_input, "trailing input in vas goal: '" + ts.peek().text + "'");
  return out;
}

class PmParser {
 public:
  PmParser(const std::string& text, const RbacPolicy& policy)
      : ts_(text), policy_(policy) {}

  BsrFormula parse() {
    if (ts_.peek().kind == Token::Kind::end) return BsrFormula::top();
    if (ts_.accept_ident("exists")) {
      while (true) {
        Token name = ts_.take();
        if (name.kind != Token::Kind::ident)
          fail(errc::bad_input, "expected a variable name");
        ts_.expect_sym(":");
        Token sort = ts_.take();
        BsrSort s;
        if (sort.text == "user")
          s = BsrSort::user;
        else if (sort.text == "role")
          s = BsrSort::role;
        else
          fail(errc::bad_input, "variable sort must be user or role");
        for (const auto& v : f_.vars)
          if (v.name == name.text)
            fail(errc::bad_input, "duplicate variable '" + name.text + "'");
        f_.vars.push_back({name.text, s, -1, false});
        if (!ts_.accept_sym(",")) break;
      }
      ts_.expect_sym(".");
    }
    f_.matrix = parse_or();
    if (ts_.peek().kind != Token::Kind::end)
      fail(errc::bad_input, "trailing input in pm goal: '" + ts_.peek().text + "'");
    return std::move(f_);
  }

 private:
  BsrExpr parse_or() {
    std::vector<BsrExpr> kids{parse_and()};
    while (ts_.accept_sym("|")) kids.push_back(parse_and());
    return kids.size() == 1 ? std::move(kids[0]) : mk_or(std::move(kids));
  }

  BsrExpr parse_and() {
    std::vector<BsrExpr> kids{parse_factor()};
    while (ts_.accept_sym("&")) kids.push_back(parse_factor());
    return kids.size() == 1 ? std::move(kids[0]) : mk_and(std::move(kids));
  }

  BsrExpr parse_factor() {
    if (ts_.accept_sym("!")) return mk_not(parse_factor());
    if (ts_.accept_sym("(")) {
      BsrExpr e = parse_or();
      ts_.expect_sym(")");
      return e;
    }
    if (ts_.accept_ident("true")) return mk_true();
    if (ts_.accept_ident("false")) return mk_false();
    Token head = ts_.take();
    if (head.kind != Token::Kind::ident)
      fail(errc::bad_input, "expected an atom, found '" + head.text + "'");
    if (ts_.accept_sym("(")) {
      BsrAtomKind kind;
      BsrSort sa, sb;
      if (head.text == "xcd") {
        kind = BsrAtomKind::xcd;
        sa = BsrSort::user;
        sb = BsrSort::action;
      } else if (head.text == "ua") {
        kind = BsrAtomKind::ua;
        sa = BsrSort::user;
        sb = BsrSort::role;
      } else if (head.text == "pa") {
        kind = BsrAtomKind::pa;
        sa = BsrSort::role;
        sb = BsrSort::perm;
      } else if (head.text == "geq") {
        kind = BsrAtomKind::geq;
        sa = BsrSort::role;
        sb = BsrSort::role;
      } else {
        fail(errc::bad_input, "unknown predicate '" + head.text + "'");
      }
      BsrTerm a = resolve(ts_.take(), sa);
      ts_.expect_sym(",");
      BsrTerm b = resolve(ts_.take(), sb);
      ts_.expect_sym(")");
      return mk_atom(kind, a, b);
    }
    // equality or inequality between two terms
    std::optional<BsrTerm> lhs_var = try_var(head.text);
    Token op = ts_.take();
    if (op.kind != Token::Kind::sym || (op.text != "=" && op.text != "==" &&
                                        op.text != "!="))
      fail(errc::bad_input, "expected = or != after '" + head.text + "'");
    Token rhs = ts_.take();
    if (rhs.kind != Token::Kind::ident)
      fail(errc::bad_input, "expected a term after '" + op.text + "'");
    BsrTerm a, b;
    if (lhs_var) {
      a = *lhs_var;
      b = resolve(rhs, a.sort);
    } else if (auto rv = try_var(rhs.text)) {
      b = *rv;
      a = resolve(head, b.sort);
    } else {
      a = resolve_constant(head.text, std::nullopt);
      b = resolve(rhs, a.sort);
    }
    BsrExpr eq = mk_eq(a, b);
    return op.text == "!=" ? mk_not(std::move(eq)) : eq;
  }

  std::optional<BsrTerm> try_var(const std::string& name) const {
    for (size_t i = 0; i < f_.vars.size(); ++i)
      if (f_.vars[i].name == name)
        return BsrTerm::var(static_cast<int>(i), f_.vars[i].sort);
    return std::nullopt;
  }

  BsrTerm resolve(const Token& t, BsrSort expected) {
    if (t.kind != Token::Kind::ident)
      fail(errc::bad_input, "expected a term, found '" + t.text + "'");
    if (auto v = try_var(t.text)) {
      if (v->sort != expected)
        fail(errc::bad_input, "variable '" + t.text + "' has sort " +
                                  sort_name(v->sort) + ", expected " +
                                  sort_name(expected));
      return *v;
    }
    return resolve_constant(t.text, expected);
  }

  BsrTerm resolve_constant(const std::string& name,
                           std::optional<BsrSort> expected) {
    auto look = [&](BsrSort s) -> std::optional<BsrTerm> {
      const std::unordered_map<std::string, int>* idx = nullptr;
      switch (s) {
        case BsrSort::user: idx = &policy_.user_index; break;
        case BsrSort::role: idx = &policy_.role_index; break;
        case BsrSort::perm: idx = &policy_.perm_index; break;
        case BsrSort::action: idx = &policy_.action_index; break;
      }
      auto it = idx->find(name);
      if (it == idx->end()) return std::nullopt;
      return BsrTerm::constant(s, it->second);
    };
    if (expected) {
      if (auto t = look(*expected)) return *t;
      fail(errc::bad_input, "unknown " + std::string(sort_name(*expected)) +
                                " constant '" + name + "'");
    }
    std::vector<BsrTerm> hits;
    for (BsrSort s : {BsrSort::user, BsrSort::role, BsrSort::perm, BsrSort::action})
      if (auto t = look(s)) hits.push_back(*t);
    if (hits.empty()) fail(errc::bad_input, "unknown constant '" + name + "'");
    if (hits.size() > 1)
      fail(errc::bad_input, "constant '" + name + "' is ambiguous across sorts");
    return hits[0];
  }

  TokenStream ts_;
  const RbacPolicy& policy_;
  BsrFormula f_;
};

}  // namespace goal_detail

inline Goal parse_goal(const std::string& text, const PetriNet& net,
                       const RbacPolicy& policy) {
  std::string vas_text, pm_text;
  std::string* active = nullptr;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
    if (auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    size_t first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos) {
      std::string_view body(line);
      if (body.substr(first, 4) == "vas:") {
        vas_text.clear();
        vas_text += line.substr(first + 4);
        active = &vas_text;
      } else if (body.substr(first, 3) == "pm:") {
        pm_text.clear();
        pm_text += line.substr(first + 3);
        active = &pm_text;
      } else if (active) {
        *active += " " + line;  // continuation line
      } else {
        fail(errc::bad_input, "goal line outside a vas:/pm: section: '" + line + "'");
      }
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  Goal g;
  g.vas_part = goal_detail::parse_vas_dnf(vas_text, net);
  g.pm_part = goal_detail::PmParser(pm_text, policy).parse();
  return g;
}

}  // namespace wfreach
