#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "wfreach/errors.hpp"
#include "wfreach/rbac.hpp"

namespace wfreach {

// Existential first-order layer over the finite RBAC structure. Formulas are
// existentially quantified, quantifier-free matrices over the atoms
// xcd(u,a), ua(u,r), pa(r,p), geq(r1,r2) and typed equality; the background
// structure (the enumerated universes, ua, pa and the hierarchy closure) is
// evaluated directly against the policy rather than axiomatized, and xcd is
// the only state-dependent symbol. Universal facts (such as "xcd is empty")
// are expanded into ground literals over the finite universes.

enum class BsrSort : uint8_t { user, role, perm, action };

inline const char* sort_name(BsrSort s) {
  switch (s) {
    case BsrSort::user: return "user";
    case BsrSort::role: return "role";
    case BsrSort::perm: return "perm";
    case BsrSort::action: return "action";
  }
  return "?";
}

struct BsrTerm {
  bool is_var = false;
  BsrSort sort = BsrSort::user;
  int index = 0;  // variable index (formula-local) or constant index

  bool operator==(const BsrTerm&) const = default;

  static BsrTerm var(int index, BsrSort sort) { return {true, sort, index}; }
  static BsrTerm constant(BsrSort sort, int index) {
    return {false, sort, index};
  }
};

enum class BsrAtomKind : uint8_t { xcd, ua, pa, geq, eq };

struct BsrAtom {
  BsrAtomKind kind = BsrAtomKind::eq;
  BsrTerm a, b;
  bool operator==(const BsrAtom&) const = default;
};

struct BsrExpr {
  enum class Op : uint8_t { tru, fls, atom, neg, conj, disj };

  Op op = Op::tru;
  BsrAtom atom{};
  std::vector<BsrExpr> kids;

  bool operator==(const BsrExpr&) const = default;
};

inline BsrExpr mk_true() { return {BsrExpr::Op::tru, {}, {}}; }
inline BsrExpr mk_false() { return {BsrExpr::Op::fls, {}, {}}; }

inline BsrExpr mk_atom(BsrAtomKind kind, BsrTerm a, BsrTerm b) {
  switch (kind) {
    case BsrAtomKind::xcd:
      if (a.sort != BsrSort::user || b.sort != BsrSort::action)
        fail(errc::bad_input, "xcd expects (user, action)");
      break;
    case BsrAtomKind::ua:
      if (a.sort != BsrSort::user || b.sort != BsrSort::role)
        fail(errc::bad_input, "ua expects (user, role)");
      break;
    case BsrAtomKind::pa:
      if (a.sort != BsrSort::role || b.sort != BsrSort::perm)
        fail(errc::bad_input, "pa expects (role, permission)");
      break;
    case BsrAtomKind::geq:
      if (a.sort != BsrSort::role || b.sort != BsrSort::role)
        fail(errc::bad_input, "geq expects (role, role)");
      break;
    case BsrAtomKind::eq:
      if (a.sort != b.sort) fail(errc::bad_input, "equality between distinct sorts");
      break;
  }
  BsrExpr e;
  e.op = BsrExpr::Op::atom;
  e.atom = {kind, a, b};
  return e;
}

// equality with the syntactic folds that keep rewritten formulas small
inline BsrExpr mk_eq(BsrTerm a, BsrTerm b) {
  if (a == b) return mk_true();
  if (!a.is_var && !b.is_var && a.sort == b.sort)
    return a.index == b.index ? mk_true() : mk_false();
  return mk_atom(BsrAtomKind::eq, a, b);
}

inline BsrExpr mk_not(BsrExpr e) {
  switch (e.op) {
    case BsrExpr::Op::tru: return mk_false();
    case BsrExpr::Op::fls: return mk_true();
    case BsrExpr::Op::neg: return std::move(e.kids[0]);
    default: {
      BsrExpr n;
      n.op = BsrExpr::Op::neg;
      n.kids.push_back(std::move(e));
      return n;
    }
  }
}

inline BsrExpr mk_and(std::vector<BsrExpr> kids) {
  std::vector<BsrExpr> out;
  for (auto& k : kids) {
    if (k.op == BsrExpr::Op::tru) continue;
    if (k.op == BsrExpr::Op::fls) return mk_false();
    if (k.op == BsrExpr::Op::conj) {
      for (auto& kk : k.kids) out.push_back(std::move(kk));
    } else {
      out.push_back(std::move(k));
    }
  }
  if (out.empty()) return mk_true();
  if (out.size() == 1) return std::move(out[0]);
  BsrExpr e;
  e.op = BsrExpr::Op::conj;
  e.kids = std::move(out);
  return e;
}

inline BsrExpr mk_or(std::vector<BsrExpr> kids) {
  std::vector<BsrExpr> out;
  for (auto& k : kids) {
    if (k.op == BsrExpr::Op::fls) continue;
    if (k.op == BsrExpr::Op::tru) return mk_true();
    if (k.op == BsrExpr::Op::disj) {
      for (auto& kk : k.kids) out.push_back(std::move(kk));
    } else {
      out.push_back(std::move(k));
    }
  }
  if (out.empty()) return mk_false();
  if (out.size() == 1) return std::move(out[0]);
  BsrExpr e;
  e.op = BsrExpr::Op::disj;
  e.kids = std::move(out);
  return e;
}

struct BsrVar {
  std::string name;
  BsrSort sort = BsrSort::user;  // only user/role are quantifiable
  int step = -1;        // exploration depth that introduced the variable
  bool acting = false;  // the u_j whose (user, action) pair the update records
};

struct BsrFormula {
  std::vector<BsrVar> vars;  // existential prefix; length tracked implicitly
  BsrExpr matrix;

  static BsrFormula top() { return {{}, mk_true()}; }
  static BsrFormula bottom() { return {{}, mk_false()}; }
};

inline BsrExpr shift_vars(const BsrExpr& e, int delta) {
  BsrExpr out = e;
  switch (out.op) {
    case BsrExpr::Op::atom:
      if (out.atom.a.is_var) out.atom.a.index += delta;
      if (out.atom.b.is_var) out.atom.b.index += delta;
      break;
    case BsrExpr::Op::neg:
    case BsrExpr::Op::conj:
    case BsrExpr::Op::disj:
      for (auto& k : out.kids) k = shift_vars(k, delta);
      break;
    default:
      break;
  }
  return out;
}

// existential conjunction: prefixes concatenate, matrices conjoin
inline BsrFormula bsr_and(const BsrFormula& a, const BsrFormula& b) {
  BsrFormula out;
  out.vars = a.vars;
  out.vars.insert(out.vars.end(), b.vars.begin(), b.vars.end());
  out.matrix = mk_and({a.matrix, shift_vars(b.matrix, static_cast<int>(a.vars.size()))});
  return out;
}

// evaluate rigid ground atoms against the concrete structure
inline BsrExpr fold_rigid(const BsrExpr& e, const RbacPolicy& policy) {
  switch (e.op) {
    case BsrExpr::Op::atom: {
      const auto& a = e.atom;
      if (a.a.is_var || a.b.is_var) return e;
      switch (a.kind) {
        case BsrAtomKind::eq: return a.a.index == a.b.index ? mk_true() : mk_false();
        case BsrAtomKind::ua:
          return policy.ua_has(a.a.index, a.b.index) ? mk_true() : mk_false();
        case BsrAtomKind::pa:
          return policy.pa_has(a.a.index, a.b.index) ? mk_true() : mk_false();
        case BsrAtomKind::geq:
          return policy.geq_has(a.a.index, a.b.index) ? mk_true() : mk_false();
        case BsrAtomKind::xcd: return e;  // state-dependent
      }
      return e;
    }
    case BsrExpr::Op::neg:
      return mk_not(fold_rigid(e.kids[0], policy));
    case BsrExpr::Op::conj: {
      std::vector<BsrExpr> kids;
      kids.reserve(e.kids.size());
      for (const auto& k : e.kids) kids.push_back(fold_rigid(k, policy));
      return mk_and(std::move(kids));
    }
    case BsrExpr::Op::disj: {
      std::vector<BsrExpr> kids;
      kids.reserve(e.kids.size());
      for (const auto& k : e.kids) kids.push_back(fold_rigid(k, policy));
      return mk_or(std::move(kids));
    }
    default:
      return e;
  }
}

// "xcd is empty", expanded over the finite universes
inline BsrFormula pm_initial(const RbacPolicy& policy) {
  std::vector<BsrExpr> lits;
  for (int u = 0; u < policy.num_users(); ++u)
    for (int a = 0; a < static_cast<int>(policy.actions.size()); ++a)
      lits.push_back(mk_not(mk_atom(BsrAtomKind::xcd,
                                    BsrTerm::constant(BsrSort::user, u),
                                    BsrTerm::constant(BsrSort::action, a))));
  return {{}, mk_and(std::move(lits))};
}

// Guarded transition for one action: existential prefix, quantifier-free
// guard, and the fixed update shape recording (u_acting, action) into xcd.
struct GuardedPmTransition {
  std::string action;
  int action_index = -1;
  std::vector<BsrVar> vars;
  int acting = 0;
  BsrExpr guard = mk_true();

  int user_prefix_length() const {
    int n = 0;
    for (const auto& v : vars) n += v.sort == BsrSort::user;
    return n;
  }
};

namespace detail {

inline BsrExpr membership(BsrTerm t, const std::vector<int>& domain, BsrSort sort) {
  if (domain.empty()) return mk_true();  // full domain
  std::vector<BsrExpr> alts;
  for (int c : domain) alts.push_back(mk_eq(t, BsrTerm::constant(sort, c)));
  return mk_or(std::move(alts));
}

}  // namespace detail

// One guarded transition per declared action. The guard conjoins the
// permission check (some explicitly held role dominates a role carrying the
// action's permission) with one clause per authorization constraint whose
// second action is this one. Actions without a permission get a tautological
// guard; constraints targeting them are reported and have no effect.
inline std::vector<GuardedPmTransition> compile_constraints(
    const RbacPolicy& policy, const std::vector<AuthConstraint>& constraints,
    std::vector<std::string>* warnings = nullptr) {
  for (const auto& c : constraints) {
    if (c.t1 < 0 || c.t1 >= static_cast<int>(policy.actions.size()) ||
        c.t2 < 0 || c.t2 >= static_cast<int>(policy.actions.size()))
      fail(errc::unknown_action, "constraint references an undeclared action");
  }
  std::vector<GuardedPmTransition> out;
  for (int a = 0; a < static_cast<int>(policy.actions.size()); ++a) {
    GuardedPmTransition t;
    t.action = policy.actions[a];
    t.action_index = a;
    t.vars.push_back({"u", BsrSort::user, -1, true});
    t.acting = 0;
    BsrTerm u = BsrTerm::var(0, BsrSort::user);

    const int perm = policy.perm_of_action[a];
    if (perm < 0) {
      for (const auto& c : constraints)
        if (c.t2 == a && warnings)
          warnings->push_back(
              "ConstraintOnUnguardedAction: constraint on '" + t.action +
              "' has no effect (no permission is attached to the action)");
      out.push_back(std::move(t));
      continue;
    }

    int role_counter = 0, user_counter = 0;
    auto fresh = [&](BsrSort sort) {
      std::string name = sort == BsrSort::user
                             ? "x" + std::to_string(++user_counter)
                             : "r" + std::to_string(++role_counter);
      t.vars.push_back({name, sort, -1, false});
      return BsrTerm::var(static_cast<int>(t.vars.size()) - 1, sort);
    };

    std::vector<BsrExpr> conj;
    BsrTerm held = fresh(BsrSort::role);   // explicitly assigned role
    BsrTerm owner = fresh(BsrSort::role);  // role carrying the permission
    conj.push_back(mk_atom(BsrAtomKind::ua, u, held));
    conj.push_back(mk_atom(BsrAtomKind::geq, held, owner));
    conj.push_back(mk_atom(BsrAtomKind::pa, owner,
                           BsrTerm::constant(BsrSort::perm, perm)));

    for (const auto& c : constraints) {
      if (c.t2 != a) continue;
      BsrTerm prior = fresh(BsrSort::user);
      conj.push_back(mk_atom(BsrAtomKind::xcd, prior,
                             BsrTerm::constant(BsrSort::action, c.t1)));
      if (c.domain_kind == AuthConstraint::Domain::user) {
        conj.push_back(detail::membership(prior, c.domain, BsrSort::user));
        conj.push_back(detail::membership(u, c.domain, BsrSort::user));
        switch (c.relation) {
          case AuthConstraint::Relation::neq:
            conj.push_back(mk_not(mk_eq(prior, u)));
            break;
          case AuthConstraint::Relation::eq:
            conj.push_back(mk_eq(prior, u));
            break;
          case AuthConstraint::Relation::pairs: {
            std::vector<BsrExpr> alts;
            for (auto [x, y] : c.pairs)
              alts.push_back(
                  mk_and({mk_eq(prior, BsrTerm::constant(BsrSort::user, x)),
                          mk_eq(u, BsrTerm::constant(BsrSort::user, y))}));
            conj.push_back(mk_or(std::move(alts)));
            break;
          }
          case AuthConstraint::Relation::senior:
            fail(errc::bad_input, "'senior' is a role-domain relation");
        }
      } else {
        BsrTerm r1 = fresh(BsrSort::role);  // role of the prior performer
        BsrTerm r2 = fresh(BsrSort::role);  // role of the acting user
        conj.push_back(mk_atom(BsrAtomKind::ua, prior, r1));
        conj.push_back(mk_atom(BsrAtomKind::ua, u, r2));
        conj.push_back(detail::membership(r1, c.domain, BsrSort::role));
        conj.push_back(detail::membership(r2, c.domain, BsrSort::role));
        switch (c.relation) {
          case AuthConstraint::Relation::neq:
            conj.push_back(mk_not(mk_eq(r1, r2)));
            break;
          case AuthConstraint::Relation::eq:
            conj.push_back(mk_eq(r1, r2));
            break;
          case AuthConstraint::Relation::senior:
            conj.push_back(mk_atom(BsrAtomKind::geq, r2, r1));
            conj.push_back(mk_not(mk_eq(r1, r2)));
            break;
          case AuthConstraint::Relation::pairs: {
            std::vector<BsrExpr> alts;
            for (auto [x, y] : c.pairs)
              alts.push_back(
                  mk_and({mk_eq(r1, BsrTerm::constant(BsrSort::role, x)),
                          mk_eq(r2, BsrTerm::constant(BsrSort::role, y))}));
            conj.push_back(mk_or(std::move(alts)));
            break;
          }
        }
      }
    }
    t.guard = mk_and(std::move(conj));
    out.push_back(std::move(t));
  }
  return out;
}

// Completeness bound of the PM level: n_u^k * n. By default k counts only
// user-typed existential variables (role variables range over a fixed finite
// set and do not enlarge the reachable xcd space); count_all_vars gives the
// conservative variant.
inline int64_t pm_bound(const RbacPolicy& policy,
                        const std::vector<GuardedPmTransition>& transitions,
                        bool count_all_vars = false) {
  if (transitions.empty()) return 0;
  int64_t k = 0;
  for (const auto& t : transitions)
    k = std::max<int64_t>(k, count_all_vars ? static_cast<int64_t>(t.vars.size())
                                            : t.user_prefix_length());
  const int64_t cap = std::numeric_limits<int64_t>::max();
  int64_t result = static_cast<int64_t>(transitions.size());
  for (int64_t i = 0; i < k; ++i) {
    if (policy.num_users() != 0 && result > cap / policy.num_users()) return cap;
    result *= policy.num_users();
  }
  return result;
}

namespace detail {

// xcd(s,t) -> not(s = u_j and t = action) and xcd(s,t); equality on the
// action constant folds, so only atoms over the updated action grow.
inline BsrExpr rewrite_xcd(const BsrExpr& e, const BsrTerm& uj, int action) {
  switch (e.op) {
    case BsrExpr::Op::atom: {
      if (e.atom.kind != BsrAtomKind::xcd) return e;
      BsrExpr same_pair =
          mk_and({mk_eq(e.atom.a, uj),
                  mk_eq(e.atom.b, BsrTerm::constant(BsrSort::action, action))});
      return mk_and({mk_not(std::move(same_pair)), e});
    }
    case BsrExpr::Op::neg:
      return mk_not(rewrite_xcd(e.kids[0], uj, action));
    case BsrExpr::Op::conj: {
      std::vector<BsrExpr> kids;
      kids.reserve(e.kids.size());
      for (const auto& k : e.kids) kids.push_back(rewrite_xcd(k, uj, action));
      return mk_and(std::move(kids));
    }
    case BsrExpr::Op::disj: {
      std::vector<BsrExpr> kids;
      kids.reserve(e.kids.size());
      for (const auto& k : e.kids) kids.push_back(rewrite_xcd(k, uj, action));
      return mk_or(std::move(kids));
    }
    default:
      return e;
  }
}

}  // namespace detail

struct BsrModel {
  std::vector<int> assignment;                 // constant index per variable
  std::vector<std::pair<int, int>> xcd_pairs;  // ground (user, action) true
};

// Decides satisfiability by grounding over the declared finite universes:
// backtracking over the existential variables in declaration order with
// constant indices ascending, unit propagation of ground xcd literals
// through the top-level conjunction, and branching over whatever ground xcd
// atoms remain undetermined (absent pairs read as false, so the reported
// relation is minimal). The first model found is the lexicographically least
// assignment under the declared constant order.
class GroundSolver {
 public:
  GroundSolver(const BsrFormula& f, const RbacPolicy& policy,
               uint64_t budget = 50'000'000)
      : f_(f), policy_(policy), budget_(budget) {
    assignment_.assign(f_.vars.size(), -1);
    flatten(f_.matrix);
    num_actions_ = static_cast<int>(policy_.actions.size());
  }

  // Evaluate against one fixed total xcd relation instead of searching one.
  void fix_xcd(const std::vector<std::pair<int, int>>& pairs) {
    fixed_ = std::vector<char>(
        static_cast<size_t>(policy_.num_users()) * num_actions_, 0);
    for (auto [u, a] : pairs) (*fixed_)[u * num_actions_ + a] = 1;
  }

  std::optional<BsrModel> solve() {
    result_.reset();
    enumerate_ = false;
    run();
    return result_;
  }

  // Visit every model; exact over the ground xcd atoms the formula mentions
  // (pairs the formula never constrains are reported absent).
  void enumerate(const std::function<void(const BsrModel&)>& cb) {
    enumerate_ = true;
    callback_ = &cb;
    run();
    callback_ = nullptr;
  }

 private:
  enum : int8_t { F = 0, T = 1, U = 2 };

  void run() {
    trail_.clear();
    hyp_.clear();
    size_t mark = trail_.size();
    if (propagate()) search(0);
    undo(mark);
  }

  void flatten(const BsrExpr& e) {
    if (e.op == BsrExpr::Op::conj) {
      for (const auto& k : e.kids) flatten(k);
    } else {
      conjuncts_.push_back(&e);
    }
  }

  void charge(uint64_t amount) {
    if (budget_ < amount)
      fail(errc::grounding_budget_exceeded,
           "grounding work exceeded the configured budget");
    budget_ -= amount;
  }

  int term_value(const BsrTerm& t) const {
    return t.is_var ? assignment_[t.index] : t.index;
  }

  int domain_size(BsrSort sort) const {
    return sort == BsrSort::user ? policy_.num_users() : policy_.num_roles();
  }

  int8_t atom_ground(BsrAtomKind kind, int x, int y) const {
    switch (kind) {
      case BsrAtomKind::eq: return x == y ? T : F;
      case BsrAtomKind::ua: return policy_.ua_has(x, y) ? T : F;
      case BsrAtomKind::pa: return policy_.pa_has(x, y) ? T : F;
      case BsrAtomKind::geq: return policy_.geq_has(x, y) ? T : F;
      case BsrAtomKind::xcd: {
        if (fixed_) return (*fixed_)[x * num_actions_ + y] ? T : F;
        auto it = hyp_.find(x * num_actions_ + y);
        return it == hyp_.end() ? U : (it->second ? T : F);
      }
    }
    return U;
  }

  // An atom whose unassigned variables cannot change its value is decided
  // right away; this lets a contradiction such as "xcd(u_j, a) but every
  // pair of column a is false" surface before u_j is ever branched on.
  int8_t atom_value(const BsrAtom& a) const {
    int x = term_value(a.a), y = term_value(a.b);
    if (x >= 0 && y >= 0) return atom_ground(a.kind, x, y);
    int8_t agreed = -1;
    int nx = x >= 0 ? 1 : domain_size(a.a.sort);
    int ny = y >= 0 ? 1 : domain_size(a.b.sort);
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        int8_t v = atom_ground(a.kind, x >= 0 ? x : i, y >= 0 ? y : j);
        if (v == U) return U;
        if (agreed == -1)
          agreed = v;
        else if (agreed != v)
          return U;
      }
    }
    return agreed == -1 ? static_cast<int8_t>(U) : agreed;
  }

  int8_t eval(const BsrExpr& e) const {
    switch (e.op) {
      case BsrExpr::Op::tru: return T;
      case BsrExpr::Op::fls: return F;
      case BsrExpr::Op::atom: return atom_value(e.atom);
      case BsrExpr::Op::neg: {
        int8_t v = eval(e.kids[0]);
        return v == U ? U : (v == T ? F : T);
      }
      case BsrExpr::Op::conj: {
        bool unknown = false;
        for (const auto& k : e.kids) {
          int8_t v = eval(k);
          if (v == F) return F;
          unknown |= v == U;
        }
        return unknown ? U : T;
      }
      case BsrExpr::Op::disj: {
        bool unknown = false;
        for (const auto& k : e.kids) {
          int8_t v = eval(k);
          if (v == T) return T;
          unknown |= v == U;
        }
        return unknown ? U : F;
      }
    }
    return U;
  }

  // literal forced if this expression must evaluate to `want`
  std::optional<std::pair<int, bool>> forced_literal(const BsrExpr& e,
                                                     bool want) const {
    switch (e.op) {
      case BsrExpr::Op::atom: {
        if (e.atom.kind != BsrAtomKind::xcd || fixed_) return std::nullopt;
        int x = term_value(e.atom.a), y = term_value(e.atom.b);
        if (x < 0 || y < 0) return std::nullopt;
        int key = x * num_actions_ + y;
        if (hyp_.count(key)) return std::nullopt;
        return std::make_pair(key, want);
      }
      case BsrExpr::Op::neg:
        return forced_literal(e.kids[0], !want);
      case BsrExpr::Op::conj:
        if (want) {  // every kid must hold; pick the first forcible unknown
          for (const auto& k : e.kids)
            if (eval(k) == U)
              if (auto lit = forced_literal(k, true)) return lit;
          return std::nullopt;
        } else {  // exactly one kid may still avoid being true
          const BsrExpr* open = nullptr;
          for (const auto& k : e.kids) {
            int8_t v = eval(k);
            if (v == F) return std::nullopt;  // already false
            if (v == U) {
              if (open) return std::nullopt;
              open = &k;
            }
          }
          return open ? forced_literal(*open, false) : std::nullopt;
        }
      case BsrExpr::Op::disj:
        if (want) {
          const BsrExpr* open = nullptr;
          for (const auto& k : e.kids) {
            int8_t v = eval(k);
            if (v == T) return std::nullopt;
            if (v == U) {
              if (open) return std::nullopt;
              open = &k;
            }
          }
          return open ? forced_literal(*open, true) : std::nullopt;
        } else {
          for (const auto& k : e.kids)
            if (eval(k) == U)
              if (auto lit = forced_literal(k, false)) return lit;
          return std::nullopt;
        }
      default:
        return std::nullopt;
    }
  }

  void set_hyp(int key, bool value) {
    hyp_.emplace(key, value);
    trail_.push_back(key);
  }

  void undo(size_t mark) {
    while (trail_.size() > mark) {
      hyp_.erase(trail_.back());
      trail_.pop_back();
    }
  }

  bool propagate() {
    bool changed = true;
    while (changed) {
      changed = false;
      charge(conjuncts_.size() + 1);
      for (const auto* c : conjuncts_) {
        int8_t v = eval(*c);
        if (v == F) return false;
        if (v == U) {
          if (auto lit = forced_literal(*c, true)) {
            set_hyp(lit->first, lit->second);
            changed = true;
          }
        }
      }
    }
    return true;
  }

  // search returns true to stop (solve mode found a model)
  bool search(size_t var) {
    charge(1);
    if (var == f_.vars.size()) return finish();
    int domain = domain_size(f_.vars[var].sort);
    for (int c = 0; c < domain; ++c) {
      assignment_[var] = c;
      size_t mark = trail_.size();
      if (propagate() && search(var + 1)) return true;
      undo(mark);
    }
    assignment_[var] = -1;
    return false;
  }

  std::optional<int> find_unknown_xcd(const BsrExpr& e) const {
    switch (e.op) {
      case BsrExpr::Op::atom: {
        if (e.atom.kind != BsrAtomKind::xcd) return std::nullopt;
        int x = term_value(e.atom.a), y = term_value(e.atom.b);
        int key = x * num_actions_ + y;
        if (!hyp_.count(key)) return key;
        return std::nullopt;
      }
      case BsrExpr::Op::neg:
      case BsrExpr::Op::conj:
      case BsrExpr::Op::disj:
        for (const auto& k : e.kids)
          if (auto r = find_unknown_xcd(k)) return r;
        return std::nullopt;
      default:
        return std::nullopt;
    }
  }

  bool finish() {
    charge(1);
    int8_t v = eval(f_.matrix);
    if (v == F) return false;
    std::optional<int> open;
    if (v == U) {
      open = find_unknown_xcd(f_.matrix);
    } else if (enumerate_ && !fixed_) {
      // exactness: models must not leave mentioned pairs floating
      open = find_unknown_xcd(f_.matrix);
    }
    if (open) {
      for (bool value : {false, true}) {
        size_t mark = trail_.size();
        set_hyp(*open, value);
        if (propagate() && finish()) return true;
        undo(mark);
      }
      return false;
    }
    if (v != T) return false;
    BsrModel m;
    m.assignment = assignment_;
    if (fixed_) {
      for (int u = 0; u < policy_.num_users(); ++u)
        for (int a = 0; a < num_actions_; ++a)
          if ((*fixed_)[u * num_actions_ + a]) m.xcd_pairs.emplace_back(u, a);
    } else {
      for (const auto& [key, value] : hyp_)
        if (value) m.xcd_pairs.emplace_back(key / num_actions_, key % num_actions_);
      std::sort(m.xcd_pairs.begin(), m.xcd_pairs.end());
    }
    if (enumerate_) {
      (*callback_)(m);
      return false;  // keep going
    }
    result_ = std::move(m);
    return true;
  }

  const BsrFormula& f_;
  const RbacPolicy& policy_;
  uint64_t budget_;
  int num_actions_ = 0;
  std::vector<const BsrExpr*> conjuncts_;
  std::vector<int> assignment_;
  std::unordered_map<int, bool> hyp_;
  std::vector<int> trail_;
  std::optional<std::vector<char>> fixed_;
  bool enumerate_ = false;
  const std::function<void(const BsrModel&)>* callback_ = nullptr;
  std::optional<BsrModel> result_;
};

inline std::optional<BsrModel> bsr_model(const BsrFormula& f,
                                         const RbacPolicy& policy,
                                         uint64_t budget = 50'000'000) {
  return GroundSolver(f, policy, budget).solve();
}

inline bool bsr_sat(const BsrFormula& f, const RbacPolicy& policy,
                    uint64_t budget = 50'000'000) {
  return bsr_model(f, policy, budget).has_value();
}

// distinct ground xcd relations satisfying f
inline std::set<std::vector<std::pair<int, int>>> bsr_xcd_models(
    const BsrFormula& f, const RbacPolicy& policy,
    uint64_t budget = 50'000'000) {
  std::set<std::vector<std::pair<int, int>>> out;
  GroundSolver solver(f, policy, budget);
  solver.enumerate([&](const BsrModel& m) { out.insert(m.xcd_pairs); });
  return out;
}

// does the fixed total relation satisfy f (for some witness assignment)?
inline bool bsr_holds_for_xcd(const BsrFormula& f, const RbacPolicy& policy,
                              const std::vector<std::pair<int, int>>& xcd,
                              uint64_t budget = 50'000'000) {
  GroundSolver solver(f, policy, budget);
  solver.fix_xcd(xcd);
  return solver.solve().has_value();
}

// Post-image under the corrected two-disjunct shape: either the recorded
// pair was already present and the state is unchanged, or the pre-state is
// the post-state with the pair removed. Both disjuncts carry the positive
// xcd(u_j, t) literal the update forces. Unsatisfiable disjuncts are pruned
// here so label growth along a path stays linear.
inline BsrFormula post_image_r(const BsrFormula& k, const GuardedPmTransition& t,
                               const RbacPolicy& policy, int step = -1,
                               uint64_t prune_budget = 50'000'000) {
  BsrFormula out;
  out.vars = k.vars;
  const int base = static_cast<int>(k.vars.size());
  for (const auto& v : t.vars) {
    BsrVar nv = v;
    nv.step = step;
    out.vars.push_back(nv);
  }
  BsrTerm uj = BsrTerm::var(base + t.acting, BsrSort::user);
  BsrExpr guard = shift_vars(t.guard, base);
  BsrExpr pair = mk_atom(BsrAtomKind::xcd, uj,
                         BsrTerm::constant(BsrSort::action, t.action_index));

  BsrExpr d1 = fold_rigid(mk_and({k.matrix, pair, guard}), policy);
  BsrExpr d2 = fold_rigid(
      mk_and({pair, detail::rewrite_xcd(k.matrix, uj, t.action_index),
              detail::rewrite_xcd(guard, uj, t.action_index)}),
      policy);

  auto keeps = [&](const BsrExpr& d) {
    if (d.op == BsrExpr::Op::fls) return false;
    BsrFormula probe{out.vars, d};
    try {
      return bsr_sat(probe, policy, prune_budget);
    } catch (const error& e) {
      if (e.code() == errc::grounding_budget_exceeded) return true;  // keep
      throw;
    }
  };
  std::vector<BsrExpr> live;
  if (keeps(d1)) live.push_back(std::move(d1));
  if (keeps(d2)) live.push_back(std::move(d2));
  out.matrix = mk_or(std::move(live));
  return out;
}

inline std::string render_term(const BsrTerm& t, const BsrFormula& f,
                               const RbacPolicy& policy) {
  if (t.is_var) {
    const auto& v = f.vars[t.index];
    return v.step >= 0 ? v.name + "#" + std::to_string(v.step) : v.name;
  }
  switch (t.sort) {
    case BsrSort::user: return policy.users[t.index];
    case BsrSort::role: return policy.roles[t.index];
    case BsrSort::perm: return policy.permissions[t.index];
    case BsrSort::action: return policy.actions[t.index];
  }
  return "?";
}

inline std::string render_expr(const BsrExpr& e, const BsrFormula& f,
                               const RbacPolicy& policy) {
  switch (e.op) {
    case BsrExpr::Op::tru: return "true";
    case BsrExpr::Op::fls: return "false";
    case BsrExpr::Op::atom: {
      const auto& a = e.atom;
      std::string lhs = render_term(a.a, f, policy);
      std::string rhs = render_term(a.b, f, policy);
      switch (a.kind) {
        case BsrAtomKind::xcd: return "xcd(" + lhs + "," + rhs + ")";
        case BsrAtomKind::ua: return "ua(" + lhs + "," + rhs + ")";
        case BsrAtomKind::pa: return "pa(" + lhs + "," + rhs + ")";
        case BsrAtomKind::geq: return "geq(" + lhs + "," + rhs + ")";
        case BsrAtomKind::eq: return lhs + "=" + rhs;
      }
      return "?";
    }
    case BsrExpr::Op::neg:
      return "!" + render_expr(e.kids[0], f, policy);
    case BsrExpr::Op::conj:
    case BsrExpr::Op::disj: {
      std::string sep = e.op == BsrExpr::Op::conj ? " & " : " | ";
      std::string out = "(";
      for (size_t i = 0; i < e.kids.size(); ++i) {
        if (i) out += sep;
        out += render_expr(e.kids[i], f, policy);
      }
      return out + ")";
    }
  }
  return "?";
}

inline std::string render_bsr(const BsrFormula& f, const RbacPolicy& policy) {
  std::string out;
  if (!f.vars.empty()) {
    out += "E ";
    for (size_t i = 0; i < f.vars.size(); ++i) {
      if (i) out += ",";
      const auto& v = f.vars[i];
      out += v.step >= 0 ? v.name + "#" + std::to_string(v.step) : v.name;
      out += ":";
      out += sort_name(v.sort);
    }
    out += ". ";
  }
  return out + render_expr(f.matrix, f, policy);
}

}  // namespace wfreach
