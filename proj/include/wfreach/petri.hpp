#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "wfreach/errors.hpp"

namespace wfreach {

// Petri net over string identifiers. Places and transitions keep their
// insertion order; that order is the canonical index order used by the VAS
// layer (place i <-> state variable x_i), so it must be stable across runs.
struct PetriNet {
  struct Transition {
    std::string id;
    std::string label;  // action label seen by the policy layer
  };

  std::vector<std::string> places;
  std::vector<Transition> transitions;
  // arcs as (from, to) id pairs, place->transition or transition->place
  std::vector<std::pair<std::string, std::string>> arcs;

  // derived, filled by finalize()
  std::unordered_map<std::string, int> place_index;
  std::unordered_map<std::string, int> transition_index;
  std::vector<std::vector<int>> pre;    // per transition: input place indices
  std::vector<std::vector<int>> post;   // per transition: output place indices
  std::vector<std::vector<int>> place_out;  // per place: consuming transitions
  std::vector<std::vector<int>> place_in;   // per place: producing transitions

  int num_places() const { return static_cast<int>(places.size()); }
  int num_transitions() const { return static_cast<int>(transitions.size()); }

  // Checks structural well-formedness and builds the adjacency indices:
  // disjoint id spaces, arc endpoints declared, arcs bipartite, no duplicates.
  void finalize() {
    place_index.clear();
    transition_index.clear();
    for (int i = 0; i < num_places(); ++i) {
      if (!place_index.emplace(places[i], i).second)
        fail(errc::malformed_net, "duplicate place id '" + places[i] + "'");
    }
    for (int i = 0; i < num_transitions(); ++i) {
      const auto& id = transitions[i].id;
      if (place_index.count(id))
        fail(errc::malformed_net, "id '" + id + "' used as place and transition");
      if (!transition_index.emplace(id, i).second)
        fail(errc::malformed_net, "duplicate transition id '" + id + "'");
    }
    pre.assign(transitions.size(), {});
    post.assign(transitions.size(), {});
    place_out.assign(places.size(), {});
    place_in.assign(places.size(), {});
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& [from, to] : arcs) {
      if (!seen.insert({from, to}).second)
        fail(errc::malformed_net, "duplicate arc " + from + " -> " + to);
      auto pf = place_index.find(from);
      auto pt = place_index.find(to);
      if (pf != place_index.end()) {
        auto tt = transition_index.find(to);
        if (tt == transition_index.end())
          fail(errc::malformed_net, "arc " + from + " -> " + to +
                                        " does not end in a transition");
        place_out[pf->second].push_back(tt->second);
        pre[tt->second].push_back(pf->second);
      } else {
        auto tf = transition_index.find(from);
        if (tf == transition_index.end())
          fail(errc::malformed_net, "arc source '" + from + "' undeclared");
        if (pt == place_index.end())
          fail(errc::malformed_net, "arc " + from + " -> " + to +
                                        " does not end in a place");
        post[tf->second].push_back(pt->second);
        place_in[pt->second].push_back(tf->second);
      }
    }
    for (auto& v : pre) std::sort(v.begin(), v.end());
    for (auto& v : post) std::sort(v.begin(), v.end());
    for (auto& v : place_out) std::sort(v.begin(), v.end());
    for (auto& v : place_in) std::sort(v.begin(), v.end());
  }
};

inline PetriNet make_net(std::vector<std::string> places,
                         std::vector<PetriNet::Transition> transitions,
                         std::vector<std::pair<std::string, std::string>> arcs) {
  PetriNet net;
  net.places = std::move(places);
  net.transitions = std::move(transitions);
  net.arcs = std::move(arcs);
  net.finalize();
  return net;
}

// Total token map, dense over the net's canonical place order.
struct Marking {
  std::vector<int64_t> tokens;

  bool operator==(const Marking&) const = default;
  auto operator<=>(const Marking&) const = default;
};

inline Marking marking_from_map(const PetriNet& net,
                                const std::map<std::string, int64_t>& m) {
  Marking out;
  out.tokens.assign(net.places.size(), 0);
  for (const auto& [place, count] : m) {
    auto it = net.place_index.find(place);
    if (it == net.place_index.end())
      fail(errc::malformed_net, "marking mentions unknown place '" + place + "'");
    if (count < 0)
      fail(errc::malformed_net, "negative token count for '" + place + "'");
    out.tokens[it->second] = count;
  }
  return out;
}

struct MarkingHash {
  size_t operator()(const Marking& m) const {
    size_t h = 0xcbf29ce484222325ull;
    for (int64_t t : m.tokens) {
      h ^= static_cast<size_t>(t) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

struct WfNetInfo {
  std::string source;
  std::string sink;
  bool acyclic = false;
  // Depth at which forward reachability from {source:1} is guaranteed to
  // stabilize; only present for acyclic nets. See fire_count_bound below.
  std::optional<int64_t> max_transition_path_length;
};

namespace detail {

// Cycle test on the bipartite graph (P u T, F). Nodes 0..P-1 are places,
// P..P+T-1 transitions.
inline bool net_has_cycle(const PetriNet& net) {
  const int n = net.num_places() + net.num_transitions();
  auto successors = [&](int v, std::vector<int>& out) {
    out.clear();
    if (v < net.num_places()) {
      for (int t : net.place_out[v]) out.push_back(net.num_places() + t);
    } else {
      for (int p : net.post[v - net.num_places()]) out.push_back(p);
    }
  };
  std::vector<int> state(n, 0);  // 0 fresh, 1 on stack, 2 done
  std::vector<int> succ;
  for (int start = 0; start < n; ++start) {
    if (state[start]) continue;
    std::vector<std::pair<int, int>> stack{{start, 0}};
    state[start] = 1;
    while (!stack.empty()) {
      auto& [v, k] = stack.back();
      successors(v, succ);
      if (k < static_cast<int>(succ.size())) {
        int w = succ[k++];
        if (state[w] == 1) return true;
        if (state[w] == 0) {
          state[w] = 1;
          stack.push_back({w, 0});
        }
      } else {
        state[v] = 2;
        stack.pop_back();
      }
    }
  }
  return false;
}

}  // namespace detail

// Upper bound on the number of firings any run from m0 can perform, for an
// acyclic net: tokens(p) = m0(p) + sum of fires over producers of p,
// fires(t) = min over input places of tokens(p), evaluated in topological
// order; the bound is the sum of all fires(t). Forward reachability
// stabilizes at this depth. On structured (choice-free, balanced) nets with
// one initial token this is exactly the length of a maximal run, e.g. 8 on
// the purchase-order net.
inline int64_t fire_count_bound(const PetriNet& net, const Marking& m0) {
  if (detail::net_has_cycle(net)) fail(errc::cyclic_net, "fire_count_bound requires an acyclic net");
  const int np = net.num_places(), nt = net.num_transitions();
  // topological order over the bipartite graph
  std::vector<int> indeg(np + nt, 0);
  for (int p = 0; p < np; ++p) indeg[p] = static_cast<int>(net.place_in[p].size());
  for (int t = 0; t < nt; ++t) indeg[np + t] = static_cast<int>(net.pre[t].size());
  std::queue<int> q;
  for (int v = 0; v < np + nt; ++v)
    if (indeg[v] == 0) q.push(v);
  std::vector<int64_t> tokens(np, 0), fires(nt, 0);
  for (int p = 0; p < np; ++p) tokens[p] = m0.tokens[p];
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    if (v < np) {
      for (int t : net.place_out[v])
        if (--indeg[np + t] == 0) q.push(np + t);
    } else {
      int t = v - np;
      int64_t f = std::numeric_limits<int64_t>::max();
      if (net.pre[t].empty()) f = 0;  // sourceless transitions cannot occur in a WF net
      for (int p : net.pre[t]) f = std::min(f, tokens[p]);
      fires[t] = f;
      for (int p : net.post[t]) {
        tokens[p] += f;
        if (--indeg[p] == 0) q.push(p);
      }
    }
  }
  int64_t total = 0;
  for (int64_t f : fires) total += f;
  return total;
}

// WF-net validation: exactly one place with empty preset (source), exactly
// one with empty postset (sink), every transition on some source->sink path.
// A transition lies on such a path iff it is reachable from the source and
// the sink is reachable from it.
inline WfNetInfo validate_wf_net(const PetriNet& net) {
  if (net.places.empty()) fail(errc::no_unique_source, "net has no places");
  std::vector<int> sources, sinks;
  for (int p = 0; p < net.num_places(); ++p) {
    if (net.place_in[p].empty()) sources.push_back(p);
    if (net.place_out[p].empty()) sinks.push_back(p);
  }
  if (sources.size() != 1) {
    std::string who;
    for (int p : sources) who += (who.empty() ? "" : ", ") + net.places[p];
    fail(errc::no_unique_source,
         sources.empty() ? "no place with empty preset"
                         : "candidates: " + who);
  }
  if (sinks.size() != 1) {
    std::string who;
    for (int p : sinks) who += (who.empty() ? "" : ", ") + net.places[p];
    fail(errc::no_unique_sink,
         sinks.empty() ? "no place with empty postset" : "candidates: " + who);
  }
  const int source = sources[0], sink = sinks[0];

  const int np = net.num_places(), nt = net.num_transitions();
  auto bfs = [&](int start_place, bool forward) {
    std::vector<char> seen(np + nt, 0);
    std::queue<int> q;
    seen[start_place] = 1;
    q.push(start_place);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      auto push = [&](int w) {
        if (!seen[w]) {
          seen[w] = 1;
          q.push(w);
        }
      };
      if (v < np) {
        const auto& ts = forward ? net.place_out[v] : net.place_in[v];
        for (int t : ts) push(np + t);
      } else {
        const auto& ps = forward ? net.post[v - np] : net.pre[v - np];
        for (int p : ps) push(p);
      }
    }
    return seen;
  };
  auto from_source = bfs(source, true);
  auto to_sink = bfs(sink, false);
  for (int t = 0; t < nt; ++t) {
    if (!from_source[np + t] || !to_sink[np + t])
      fail(errc::transition_not_covered,
           "transition '" + net.transitions[t].id +
               "' lies on no source->sink path");
  }

  WfNetInfo info;
  info.source = net.places[source];
  info.sink = net.places[sink];
  info.acyclic = !detail::net_has_cycle(net);
  if (info.acyclic) {
    Marking one;
    one.tokens.assign(np, 0);
    one.tokens[source] = 1;
    info.max_transition_path_length = fire_count_bound(net, one);
  }
  return info;
}

inline int require_transition(const PetriNet& net, const std::string& t) {
  auto it = net.transition_index.find(t);
  if (it == net.transition_index.end())
    fail(errc::unknown_transition, "'" + t + "'");
  return it->second;
}

inline bool enabled(const PetriNet& net, const Marking& m, int t) {
  for (int p : net.pre[t])
    if (m.tokens[p] < 1) return false;
  return true;
}

inline bool enabled(const PetriNet& net, const Marking& m, const std::string& t) {
  return enabled(net, m, require_transition(net, t));
}

inline Marking fire(const PetriNet& net, const Marking& m, int t) {
  if (!enabled(net, m, t))
    fail(errc::not_enabled, "transition '" + net.transitions[t].id + "'");
  Marking out = m;
  for (int p : net.pre[t]) out.tokens[p] -= 1;
  for (int p : net.post[t]) out.tokens[p] += 1;
  return out;
}

inline Marking fire(const PetriNet& net, const Marking& m, const std::string& t) {
  return fire(net, m, require_transition(net, t));
}

// Exact set of markings reachable in at most `depth` firings; breadth-first.
// This is the ground-truth oracle the symbolic layers are tested against.
inline std::unordered_set<Marking, MarkingHash> explicit_reachable(
    const PetriNet& net, const Marking& m0, int64_t depth,
    size_t state_budget = 1u << 20) {
  std::unordered_set<Marking, MarkingHash> seen{m0};
  std::vector<Marking> frontier{m0};
  for (int64_t d = 0; d < depth && !frontier.empty(); ++d) {
    std::vector<Marking> next;
    for (const auto& m : frontier) {
      for (int t = 0; t < net.num_transitions(); ++t) {
        if (!enabled(net, m, t)) continue;
        Marking m2 = fire(net, m, t);
        if (seen.size() >= state_budget && !seen.count(m2))
          fail(errc::state_budget_exceeded,
               "more than " + std::to_string(state_budget) + " markings");
        if (seen.insert(m2).second) next.push_back(m2);
      }
    }
    frontier = std::move(next);
  }
  return seen;
}

}  // namespace wfreach
