#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "wfreach/errors.hpp"
#include "wfreach/la.hpp"
#include "wfreach/petri.hpp"

namespace wfreach {

// One VAS transition: consume a token from every place in dec, produce one
// into every place in inc, leave keep untouched. The enabling guard is
// x_i >= 1 on the pre-state for each input place, which after the post-image
// substitution becomes x_i >= 0 on the post-state.
struct VasTransition {
  std::string id;
  std::string label;
  std::vector<int> inc;   // output places
  std::vector<int> dec;   // input places
  std::vector<int> keep;  // everything else
  std::vector<int> guard_places;  // = dec
};

struct VasSystem {
  std::vector<std::string> var_names;  // canonical place order
  LaFormula init;
  std::vector<VasTransition> transitions;

  int num_vars() const { return static_cast<int>(var_names.size()); }
};

// One integer variable per place, initial condition pinning every variable
// to its token count, one transition per net transition.
inline VasSystem vas_from_net(const PetriNet& net, const Marking& m0) {
  VasSystem sys;
  sys.var_names = net.places;
  LaCube init;
  for (int p = 0; p < net.num_places(); ++p)
    init.atoms.push_back({p, Rel::eq, m0.tokens[p]});
  sys.init.cubes.push_back(std::move(init));
  for (int t = 0; t < net.num_transitions(); ++t) {
    VasTransition tr;
    tr.id = net.transitions[t].id;
    tr.label = net.transitions[t].label;
    tr.dec = net.pre[t];
    tr.inc = net.post[t];
    std::vector<int> touched = tr.dec;
    touched.insert(touched.end(), tr.inc.begin(), tr.inc.end());
    std::sort(touched.begin(), touched.end());
    if (std::adjacent_find(touched.begin(), touched.end()) != touched.end())
      fail(errc::malformed_net,
           "transition '" + tr.id + "' has a place as both input and output; "
           "such nets are outside the VAS shape");
    for (int p = 0; p < net.num_places(); ++p)
      if (!std::binary_search(touched.begin(), touched.end(), p))
        tr.keep.push_back(p);
    tr.guard_places = tr.dec;
    sys.transitions.push_back(std::move(tr));
  }
  return sys;
}

// Post-image of K under t: express the pre-state in post-state variables
// (x_j -> x_j - 1 for produced places, x_k -> x_k + 1 for consumed ones,
// which turns an atom's constant into c+1 resp. c-1), conjoin the shifted
// guard, and conjoin x_j >= 1 for produced places: the eliminated pre-state
// value x_j - 1 ranges over the naturals, a constraint the substitution
// alone loses when K leaves x_j underconstrained. Result is renormalized,
// so tautologies such as x_k >= 0 vanish.
inline LaFormula post_image_v(const LaFormula& k, const VasTransition& t,
                              int num_vars) {
  LaFormula out;
  std::vector<int8_t> delta(num_vars, 0);
  for (int j : t.inc) delta[j] = 1;   // constant moves up
  for (int d : t.dec) delta[d] = -1;  // constant moves down
  for (const auto& cube : k.cubes) {
    LaCube shifted;
    for (const auto& a : cube.atoms)
      shifted.atoms.push_back({a.var, a.rel, a.c + delta[a.var]});
    for (int g : t.guard_places) shifted.atoms.push_back({g, Rel::ge, 0});
    for (int j : t.inc) shifted.atoms.push_back({j, Rel::ge, 1});
    out.cubes.push_back(std::move(shifted));
  }
  return la_normalize(out, num_vars);
}

}  // namespace wfreach
