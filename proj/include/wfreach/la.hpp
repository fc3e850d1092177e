#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wfreach/errors.hpp"

namespace wfreach {

// Linear-arithmetic state formulas over non-negative integer variables, kept
// in disjunctive normal form. The fragment only ever contains unary bound
// atoms (x_i <rel> c), which is what the VAS post-image produces, so
// satisfiability and entailment reduce to per-variable integer set
// reasoning; no general arithmetic solver is involved.

enum class Rel : uint8_t { eq, ne, gt, ge, lt, le };

inline const char* rel_text(Rel r) {
  switch (r) {
    case Rel::eq: return "=";
    case Rel::ne: return "!=";
    case Rel::gt: return ">";
    case Rel::ge: return ">=";
    case Rel::lt: return "<";
    case Rel::le: return "<=";
  }
  return "?";
}

inline std::optional<Rel> rel_from_text(const std::string& s) {
  if (s == "=" || s == "==") return Rel::eq;
  if (s == "!=") return Rel::ne;
  if (s == ">") return Rel::gt;
  if (s == ">=") return Rel::ge;
  if (s == "<") return Rel::lt;
  if (s == "<=") return Rel::le;
  return std::nullopt;
}

struct LaAtom {
  int var = 0;
  Rel rel = Rel::eq;
  int64_t c = 0;

  auto operator<=>(const LaAtom&) const = default;

  bool holds(int64_t v) const {
    switch (rel) {
      case Rel::eq: return v == c;
      case Rel::ne: return v != c;
      case Rel::gt: return v > c;
      case Rel::ge: return v >= c;
      case Rel::lt: return v < c;
      case Rel::le: return v <= c;
    }
    return false;
  }
};

// one conjunction of atoms
struct LaCube {
  std::vector<LaAtom> atoms;
  auto operator<=>(const LaCube&) const = default;

  bool holds(const std::vector<int64_t>& v) const {
    for (const auto& a : atoms)
      if (!a.holds(v[a.var])) return false;
    return true;
  }
};

// disjunction of cubes; no cubes means false, a cube with no atoms means true
struct LaFormula {
  std::vector<LaCube> cubes;
  auto operator<=>(const LaFormula&) const = default;

  static LaFormula top() { return LaFormula{{LaCube{}}}; }
  static LaFormula bottom() { return LaFormula{}; }

  bool holds(const std::vector<int64_t>& v) const {
    for (const auto& c : cubes)
      if (c.holds(v)) return true;
    return false;
  }
};

namespace la {

// Admissible values of one variable under a cube: an integer interval over
// the naturals, minus finitely many holes.
struct VarSet {
  int64_t lo = 0;
  std::optional<int64_t> hi;
  std::vector<int64_t> holes;  // sorted, deduped, inside [lo, hi]

  void clamp_holes() {
    std::sort(holes.begin(), holes.end());
    holes.erase(std::unique(holes.begin(), holes.end()), holes.end());
    std::vector<int64_t> kept;
    for (int64_t h : holes)
      if (h >= lo && (!hi || h <= *hi)) kept.push_back(h);
    holes = std::move(kept);
  }

  bool is_empty() const {
    if (hi && *hi < lo) return true;
    if (hi) {
      // finite range fully punched out?
      return static_cast<uint64_t>(holes.size()) ==
             static_cast<uint64_t>(*hi - lo + 1);
    }
    return false;
  }

  bool contains(int64_t v) const {
    if (v < lo || (hi && v > *hi)) return false;
    return !std::binary_search(holes.begin(), holes.end(), v);
  }

  std::optional<int64_t> least() const {
    int64_t v = lo;
    while (!hi || v <= *hi) {
      if (!std::binary_search(holes.begin(), holes.end(), v)) return v;
      ++v;
    }
    return std::nullopt;
  }

  bool subset_of(const VarSet& o) const {
    if (lo < o.lo && !contains_none_below(o.lo)) return false;
    if (o.hi && (!hi || *hi > *o.hi) && !contains_none_above(*o.hi)) return false;
    for (int64_t h : o.holes)
      if (contains(h)) return false;
    return true;
  }

 private:
  bool contains_none_below(int64_t bound) const {
    for (int64_t v = lo; v < bound; ++v)
      if (contains(v)) return false;
    return true;
  }
  bool contains_none_above(int64_t bound) const {
    if (!hi) return false;  // infinitely many values above
    for (int64_t v = bound + 1; v <= *hi; ++v)
      if (contains(v)) return false;
    return true;
  }
};

inline void apply_atom(VarSet& s, const LaAtom& a) {
  switch (a.rel) {
    case Rel::eq:
      s.lo = std::max(s.lo, a.c);
      s.hi = s.hi ? std::min(*s.hi, a.c) : a.c;
      break;
    case Rel::ne:
      if (a.c >= 0) s.holes.push_back(a.c);
      break;
    case Rel::gt:
      s.lo = std::max(s.lo, a.c + 1);
      break;
    case Rel::ge:
      s.lo = std::max(s.lo, a.c);
      break;
    case Rel::lt:
      s.hi = s.hi ? std::min(*s.hi, a.c - 1) : a.c - 1;
      break;
    case Rel::le:
      s.hi = s.hi ? std::min(*s.hi, a.c) : a.c;
      break;
  }
}

// Per-variable summary of a cube; nullopt when the cube is contradictory.
inline std::optional<std::vector<VarSet>> cube_summary(const LaCube& cube,
                                                       int num_vars) {
  std::vector<VarSet> sets(num_vars);
  for (const auto& a : cube.atoms) {
    if (a.var < 0 || a.var >= num_vars)
      fail(errc::non_unary_atom, "atom references undeclared variable x" +
                                     std::to_string(a.var + 1));
    apply_atom(sets[a.var], a);
  }
  for (auto& s : sets) {
    s.clamp_holes();
    if (s.is_empty()) return std::nullopt;
  }
  return sets;
}

inline LaCube cube_from_summary(const std::vector<VarSet>& sets) {
  LaCube out;
  for (int v = 0; v < static_cast<int>(sets.size()); ++v) {
    const auto& s = sets[v];
    if (s.hi && *s.hi == s.lo) {
      out.atoms.push_back({v, Rel::eq, s.lo});
      continue;
    }
    if (s.lo > 0) out.atoms.push_back({v, Rel::ge, s.lo});
    if (s.hi) out.atoms.push_back({v, Rel::le, *s.hi});
    for (int64_t h : s.holes) out.atoms.push_back({v, Rel::ne, h});
  }
  return out;
}

}  // namespace la

// Canonical form: contradictory cubes dropped, atoms regenerated from the
// per-variable summaries, cubes sorted and deduped.
inline LaFormula la_normalize(const LaFormula& f, int num_vars) {
  LaFormula out;
  for (const auto& cube : f.cubes) {
    auto summary = la::cube_summary(cube, num_vars);
    if (!summary) continue;
    out.cubes.push_back(la::cube_from_summary(*summary));
  }
  std::sort(out.cubes.begin(), out.cubes.end());
  out.cubes.erase(std::unique(out.cubes.begin(), out.cubes.end()),
                  out.cubes.end());
  return out;
}

// Satisfiability plus a witness: the least admissible value per variable,
// taken from the first satisfiable disjunct.
inline std::optional<std::vector<int64_t>> la_model(const LaFormula& f,
                                                    int num_vars) {
  for (const auto& cube : f.cubes) {
    auto summary = la::cube_summary(cube, num_vars);
    if (!summary) continue;
    std::vector<int64_t> model(num_vars, 0);
    bool ok = true;
    for (int v = 0; v < num_vars; ++v) {
      auto least = (*summary)[v].least();
      if (!least) {
        ok = false;
        break;
      }
      model[v] = *least;
    }
    if (ok) return model;
  }
  return std::nullopt;
}

inline bool la_sat(const LaFormula& f, int num_vars) {
  return la_model(f, num_vars).has_value();
}

namespace la {

// Does C (a product of per-variable sets) lie inside the union of the Ds?
// Splits the first variable's range into segments on which membership in
// every D is constant, picks one representative per segment, and recurses
// over the remaining variables with the still-matching Ds.
class CoverCheck {
 public:
  CoverCheck(const std::vector<VarSet>* c, const std::vector<std::vector<VarSet>>* ds)
      : c_(c), ds_(ds) {}

  bool covered(int var, std::vector<int> js) {
    if (js.empty()) return false;
    const int n = static_cast<int>(c_->size());
    if (var == n) return true;
    for (int j : js) {
      bool whole = true;
      for (int v = var; v < n && whole; ++v)
        whole = (*c_)[v].subset_of((*ds_)[j][v]);
      if (whole) return true;
    }
    auto key = std::make_pair(var, js);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    const VarSet& cv = (*c_)[var];
    std::vector<int64_t> cuts{cv.lo};
    auto add_cut = [&](int64_t v) {
      if (v >= cv.lo && (!cv.hi || v <= *cv.hi)) cuts.push_back(v);
    };
    for (int j : js) {
      const VarSet& d = (*ds_)[j][var];
      add_cut(d.lo);
      if (d.hi) add_cut(*d.hi + 1);
      for (int64_t h : d.holes) {
        add_cut(h);
        add_cut(h + 1);
      }
    }
    for (int64_t h : cv.holes) add_cut(h + 1);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    bool ok = true;
    for (size_t i = 0; i < cuts.size() && ok; ++i) {
      int64_t seg_lo = cuts[i];
      std::optional<int64_t> seg_hi;  // inclusive
      if (i + 1 < cuts.size())
        seg_hi = cuts[i + 1] - 1;
      else
        seg_hi = cv.hi;  // may be unbounded
      // representative inside C, skipping C's holes
      std::optional<int64_t> rep;
      for (int64_t v = seg_lo; !seg_hi || v <= *seg_hi; ++v) {
        if (cv.contains(v)) {
          rep = v;
          break;
        }
        if (v - seg_lo > static_cast<int64_t>(cv.holes.size())) break;
      }
      if (!rep) continue;  // segment holds no point of C
      std::vector<int> next;
      for (int j : js)
        if ((*ds_)[j][var].contains(*rep)) next.push_back(j);
      ok = covered(var + 1, std::move(next));
    }
    memo_.emplace(std::move(key), ok);
    return ok;
  }

 private:
  const std::vector<VarSet>* c_;
  const std::vector<std::vector<VarSet>>* ds_;
  std::map<std::pair<int, std::vector<int>>, bool> memo_;
};

}  // namespace la

// f1 => f2 over the non-negative integers. Negation of the right-hand side
// stays inside the fragment because every atom's complement is again made of
// unary bounds; operationally each satisfiable cube of f1 must be covered by
// the union of f2's cubes.
inline bool la_entails(const LaFormula& f1, const LaFormula& f2, int num_vars) {
  std::vector<std::vector<la::VarSet>> ds;
  for (const auto& cube : f2.cubes) {
    auto s = la::cube_summary(cube, num_vars);
    if (s) ds.push_back(std::move(*s));
  }
  std::vector<int> all(ds.size());
  for (size_t i = 0; i < ds.size(); ++i) all[i] = static_cast<int>(i);
  for (const auto& cube : f1.cubes) {
    auto c = la::cube_summary(cube, num_vars);
    if (!c) continue;
    la::CoverCheck check(&*c, &ds);
    if (!check.covered(0, all)) return false;
  }
  return true;
}

inline LaFormula la_and(const LaFormula& a, const LaFormula& b, int num_vars) {
  LaFormula out;
  for (const auto& ca : a.cubes) {
    for (const auto& cb : b.cubes) {
      LaCube c = ca;
      c.atoms.insert(c.atoms.end(), cb.atoms.begin(), cb.atoms.end());
      out.cubes.push_back(std::move(c));
    }
  }
  return la_normalize(out, num_vars);
}

inline LaFormula la_or(const LaFormula& a, const LaFormula& b) {
  LaFormula out = a;
  out.cubes.insert(out.cubes.end(), b.cubes.begin(), b.cubes.end());
  return out;
}

// Bounded model enumeration for test oracles: all models with every
// variable in [0, cap].
inline std::vector<std::vector<int64_t>> la_models_bounded(const LaFormula& f,
                                                           int num_vars,
                                                           int64_t cap) {
  std::vector<std::vector<int64_t>> out;
  std::vector<int64_t> v(num_vars, 0);
  while (true) {
    if (f.holds(v)) out.push_back(v);
    int i = 0;
    for (; i < num_vars; ++i) {
      if (++v[i] <= cap) break;
      v[i] = 0;
    }
    if (i == num_vars) break;
  }
  return out;
}

inline std::string la_render(const LaFormula& f,
                             const std::vector<std::string>& names) {
  if (f.cubes.empty()) return "false";
  std::string out;
  for (size_t i = 0; i < f.cubes.size(); ++i) {
    if (i) out += " | ";
    const auto& cube = f.cubes[i];
    if (cube.atoms.empty()) {
      out += "true";
      continue;
    }
    for (size_t k = 0; k < cube.atoms.size(); ++k) {
      if (k) out += " & ";
      const auto& a = cube.atoms[k];
      out += names.empty() ? "x" + std::to_string(a.var + 1) : names[a.var];
      out += rel_text(a.rel);
      out += std::to_string(a.c);
    }
  }
  return out;
}

}  // namespace wfreach
