#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wfreach/bsr.hpp"
#include "wfreach/errors.hpp"
#include "wfreach/la.hpp"
#include "wfreach/petri.hpp"
#include "wfreach/rbac.hpp"
#include "wfreach/vas.hpp"

namespace wfreach {

struct Goal {
  LaFormula vas_part = LaFormula::top();
  BsrFormula pm_part = BsrFormula::top();
};

// x_sink >= 1 and every other place empty: termination with no garbage.
inline Goal soundness_goal(const PetriNet& net, const WfNetInfo& info) {
  Goal g;
  LaCube cube;
  int sink = net.place_index.at(info.sink);
  for (int p = 0; p < net.num_places(); ++p) {
    if (p == sink)
      cube.atoms.push_back({p, Rel::ge, 1});
    else
      cube.atoms.push_back({p, Rel::eq, 0});
  }
  g.vas_part = LaFormula{{cube}};
  return g;
}

// The combined system: one VAS transition and one guarded PM transition per
// net transition, bound by action label. The policy's action universe is
// extended with any net labels it does not declare; those actions are
// unguarded.
struct TwoLevelSystem {
  PetriNet net;
  Marking m0;
  WfNetInfo info;
  VasSystem vas;
  RbacPolicy policy;
  BsrFormula pm_init;  // "xcd is empty" unless overridden after build
  std::vector<GuardedPmTransition> compiled;  // per policy action
  std::vector<int> binding;                   // net transition -> action index
  std::vector<std::string> warnings;

  const GuardedPmTransition& pm_of(int t) const { return compiled[binding[t]]; }
  int num_transitions() const { return net.num_transitions(); }
};

inline TwoLevelSystem build_system(const PetriNet& net, const Marking& m0,
                                   const RbacPolicy& policy_in,
                                   bool strict = true) {
  TwoLevelSystem sys;
  sys.net = net;
  sys.m0 = m0;
  sys.info = validate_wf_net(sys.net);
  if (!sys.info.acyclic)
    fail(errc::cyclic_net, "the engine requires an acyclic WF net");
  if (m0.tokens.size() != net.places.size())
    fail(errc::bad_input, "marking size does not match the net");

  std::set<std::string> labels;
  for (const auto& t : sys.net.transitions)
    if (!labels.insert(t.label).second)
      fail(errc::bad_input, "duplicate action label '" + t.label +
                                "'; PM binding is by label");

  sys.policy = policy_in;
  for (const auto& t : sys.net.transitions) {
    if (!sys.policy.action_index.count(t.label)) {
      sys.policy.actions.push_back(t.label);
      sys.policy.perm_of_action.push_back(-1);
    }
  }
  sys.policy.finalize();

  if (strict) {
    for (const auto& t : sys.net.transitions) {
      int a = sys.policy.action_index.at(t.label);
      if (sys.policy.perm_of_action[a] >= 0) continue;
      for (const auto& c : sys.policy.constraints)
        if (c.t2 == a)
          fail(errc::unbound_action,
               "'" + t.label + "' is constrained but carries no permission");
    }
  }

  sys.vas = vas_from_net(sys.net, sys.m0);
  sys.pm_init = pm_initial(sys.policy);
  sys.compiled =
      compile_constraints(sys.policy, sys.policy.constraints, &sys.warnings);
  for (const auto& t : sys.net.transitions)
    sys.binding.push_back(sys.policy.action_index.at(t.label));
  return sys;
}

// min of the two per-level bounds, per the combined-system completeness
// property. The PM bound's argument assumes transitions fire at most once
// along a run; when the token-flow bound exceeds the transition count that
// assumption is broken (re-firing), so only the WF-level bound is trusted.
inline int64_t completeness_bound(const TwoLevelSystem& sys) {
  int64_t wf = fire_count_bound(sys.net, sys.m0);
  if (wf > sys.num_transitions()) return wf;
  return std::min(wf, pm_bound(sys.policy, sys.compiled));
}

struct SymbolicNode {
  LaFormula vas_label;
  BsrFormula pm_label;
  int64_t depth = 0;
  int incoming = -1;  // transition index, -1 at the root
  int parent = -1;
};

struct SymbolicTree {
  std::vector<SymbolicNode> nodes;
  int64_t bound = 0;
  int64_t depth_reached = 0;
  std::optional<int64_t> fixpoint_depth;
  bool complete = false;
  bool goal_stopped = false;
  uint64_t la_posts = 0;
  uint64_t bsr_posts = 0;
};

struct ExploreOptions {
  std::optional<int64_t> max_depth;
  uint64_t node_budget = 200'000;
  uint64_t grounding_budget = 50'000'000;
  bool subsumption = false;
  bool semantic_fixpoint = true;
  uint64_t fixpoint_model_cap = 2048;
};

// The combined post-image is the conjunction of the per-level post-images,
// each computed independently: the transition relation is a product of the
// two level relations.
inline std::pair<LaFormula, BsrFormula> post_image(const TwoLevelSystem& sys,
                                                   const SymbolicNode& node,
                                                   int t, int step = -1,
                                                   uint64_t grounding_budget =
                                                       50'000'000) {
  return {post_image_v(node.vas_label, sys.vas.transitions[t],
                       sys.vas.num_vars()),
          post_image_r(node.pm_label, sys.pm_of(t), sys.policy, step,
                       grounding_budget)};
}

namespace detail {

// frontier => accumulated, per level; used for early fix-point detection.
// Conservative: gives up (returns false) when model enumeration would
// exceed the configured cap, in which case exploration runs to the bound.
inline bool frontier_entailed(const TwoLevelSystem& sys,
                              const SymbolicTree& tree,
                              const std::vector<int>& frontier,
                              size_t accumulated_end,
                              const ExploreOptions& opt) {
  LaFormula front, acc;
  for (int n : frontier)
    front.cubes.insert(front.cubes.end(), tree.nodes[n].vas_label.cubes.begin(),
                       tree.nodes[n].vas_label.cubes.end());
  for (size_t i = 0; i < accumulated_end; ++i)
    acc.cubes.insert(acc.cubes.end(), tree.nodes[i].vas_label.cubes.begin(),
                     tree.nodes[i].vas_label.cubes.end());
  if (!la_entails(front, acc, sys.vas.num_vars())) return false;

  try {
    for (int n : frontier) {
      std::set<std::vector<std::pair<int, int>>> models;
      GroundSolver solver(tree.nodes[n].pm_label, sys.policy,
                          opt.grounding_budget);
      bool overflow = false;
      solver.enumerate([&](const BsrModel& m) {
        if (models.size() >= opt.fixpoint_model_cap)
          overflow = true;
        else
          models.insert(m.xcd_pairs);
      });
      if (overflow) return false;
      for (const auto& xcd : models) {
        bool held = false;
        for (size_t i = 0; i < accumulated_end && !held; ++i)
          held = bsr_holds_for_xcd(tree.nodes[i].pm_label, sys.policy, xcd,
                                   opt.grounding_budget);
        if (!held) return false;
      }
    }
  } catch (const error& e) {
    if (e.code() == errc::grounding_budget_exceeded) return false;
    throw;
  }
  return true;
}

inline bool pm_ground_equivalent(const TwoLevelSystem& sys, const BsrFormula& a,
                                 const BsrFormula& b,
                                 const ExploreOptions& opt) {
  try {
    auto ma = bsr_xcd_models(a, sys.policy, opt.grounding_budget);
    auto mb = bsr_xcd_models(b, sys.policy, opt.grounding_budget);
    if (ma.size() > opt.fixpoint_model_cap || mb.size() > opt.fixpoint_model_cap)
      return false;
    return ma == mb;
  } catch (const error& e) {
    if (e.code() == errc::grounding_budget_exceeded) return false;
    throw;
  }
}

}  // namespace detail

// Breadth-first construction of the symbolic execution tree. Children are
// materialized only when both the VAS and PM post-images are satisfiable;
// expansion stops at the completeness bound (or the explicit depth) or as
// soon as the depth-(d+1) labels are entailed by everything at depths <= d.
// The `visit` hook sees every materialized node and may stop exploration.
inline SymbolicTree explore(
    const TwoLevelSystem& sys, const ExploreOptions& opt = {},
    const std::function<bool(const SymbolicTree&, int)>& visit = nullptr) {
  SymbolicTree tree;
  tree.bound = completeness_bound(sys);
  const int64_t cap = opt.max_depth.value_or(tree.bound);

  SymbolicNode root;
  root.vas_label = la_normalize(sys.vas.init, sys.vas.num_vars());
  root.pm_label = sys.pm_init;
  tree.nodes.push_back(std::move(root));
  if (visit && visit(tree, 0)) {
    tree.goal_stopped = true;
    return tree;
  }

  std::vector<int> frontier{0};
  int64_t depth = 0;
  while (!frontier.empty()) {
    if (depth >= cap && cap < tree.bound) {
      // truncated by an explicit depth below the bound
      tree.complete = false;
      tree.depth_reached = depth;
      return tree;
    }
    // depth == bound still expands once: the children must all be
    // unsatisfiable, which verifies the fix-point at the bound.
    size_t accumulated_end = tree.nodes.size();
    std::vector<int> next;
    for (int node_index : frontier) {
      for (int t = 0; t < sys.num_transitions(); ++t) {
        ++tree.la_posts;
        LaFormula kv = post_image_v(tree.nodes[node_index].vas_label,
                                    sys.vas.transitions[t], sys.vas.num_vars());
        if (kv.cubes.empty()) continue;
        ++tree.bsr_posts;
        BsrFormula kr =
            post_image_r(tree.nodes[node_index].pm_label, sys.pm_of(t),
                         sys.policy, static_cast<int>(depth) + 1,
                         opt.grounding_budget);
        if (kr.matrix.op == BsrExpr::Op::fls) continue;
        if (tree.nodes.size() >= opt.node_budget)
          fail(errc::node_budget_exceeded,
               std::to_string(tree.nodes.size()) + " nodes");
        if (opt.subsumption) {
          bool dropped = false;
          for (int sib : next) {
            if (la_entails(kv, tree.nodes[sib].vas_label, sys.vas.num_vars()) &&
                detail::pm_ground_equivalent(sys, kr, tree.nodes[sib].pm_label,
                                             opt)) {
              dropped = true;
              break;
            }
          }
          if (dropped) continue;
        }
        SymbolicNode child;
        child.vas_label = std::move(kv);
        child.pm_label = std::move(kr);
        child.depth = depth + 1;
        child.incoming = t;
        child.parent = node_index;
        tree.nodes.push_back(std::move(child));
        int child_index = static_cast<int>(tree.nodes.size()) - 1;
        next.push_back(child_index);
        if (visit && visit(tree, child_index)) {
          tree.goal_stopped = true;
          tree.depth_reached = depth + 1;
          return tree;
        }
      }
    }
    if (next.empty()) {
      tree.fixpoint_depth = depth;
      tree.complete = true;
      tree.depth_reached = depth;
      return tree;
    }
    tree.depth_reached = depth + 1;
    if (depth >= tree.bound)
      throw std::logic_error(
          "completeness bound violated: states found past the bound");
    if (opt.semantic_fixpoint &&
        detail::frontier_entailed(sys, tree, next, accumulated_end, opt)) {
      tree.fixpoint_depth = depth;
      tree.complete = true;
      return tree;
    }
    frontier = std::move(next);
    ++depth;
  }
  tree.complete = true;
  return tree;
}

struct WitnessStep {
  int transition = -1;
  std::string transition_id;
  std::string action;
  std::string user;
};

struct Verdict {
  enum class Status { reachable, unreachable, incomplete };

  Status status = Status::incomplete;
  std::vector<WitnessStep> witness;  // reachable only
  // the satisfying ground state backing a reachable verdict
  std::vector<int64_t> goal_marking;
  std::vector<std::pair<int, int>> goal_xcd;  // (user, action) indices
  std::optional<int64_t> fixpoint_depth;
  int64_t bound = 0;
  int64_t depth_explored = 0;
  int64_t nodes = 0;
  uint64_t la_posts = 0;
  uint64_t bsr_posts = 0;
};

// Decides goal reachability: explores to completeness, testing at every new
// node whether vas_label & G_V and pm_label & G_R are both satisfiable (the
// two independent per-level checks); on a hit the witness users are read off
// the satisfying assignment of the conjoined PM formula, whose variables
// remember the step that introduced them.
inline Verdict check_goal(const TwoLevelSystem& sys, const Goal& goal,
                          const ExploreOptions& opt = {}) {
  Verdict v;
  std::optional<BsrModel> hit_model;
  int hit_node = -1;

  std::vector<int64_t> hit_marking;
  auto visit = [&](const SymbolicTree& tree, int index) {
    const auto& node = tree.nodes[index];
    LaFormula both = la_and(node.vas_label, goal.vas_part, sys.vas.num_vars());
    auto marking = la_model(both, sys.vas.num_vars());
    if (!marking) return false;
    BsrFormula pm_both = bsr_and(node.pm_label, goal.pm_part);
    auto model = bsr_model(pm_both, sys.policy, opt.grounding_budget);
    if (!model) return false;
    hit_model = std::move(model);
    hit_marking = std::move(*marking);
    hit_node = index;
    return true;
  };

  SymbolicTree tree = explore(sys, opt, visit);
  v.bound = tree.bound;
  v.depth_explored = tree.depth_reached;
  v.nodes = static_cast<int64_t>(tree.nodes.size());
  v.la_posts = tree.la_posts;
  v.bsr_posts = tree.bsr_posts;

  if (hit_node >= 0) {
    v.status = Verdict::Status::reachable;
    v.goal_marking = std::move(hit_marking);
    v.goal_xcd = hit_model->xcd_pairs;
    const auto& label_vars = tree.nodes[hit_node].pm_label.vars;
    std::vector<int> path;  // transition per step, root to hit
    for (int n = hit_node; tree.nodes[n].parent >= 0; n = tree.nodes[n].parent)
      path.push_back(tree.nodes[n].incoming);
    std::reverse(path.begin(), path.end());
    for (size_t s = 0; s < path.size(); ++s) {
      WitnessStep step;
      step.transition = path[s];
      step.transition_id = sys.net.transitions[path[s]].id;
      step.action = sys.net.transitions[path[s]].label;
      for (size_t i = 0; i < label_vars.size(); ++i) {
        if (label_vars[i].step == static_cast<int>(s) + 1 &&
            label_vars[i].acting) {
          step.user = sys.policy.users[hit_model->assignment[i]];
          break;
        }
      }
      v.witness.push_back(std::move(step));
    }
    return v;
  }
  if (tree.complete) {
    v.status = Verdict::Status::unreachable;
    v.fixpoint_depth = tree.fixpoint_depth;
  }
  return v;
}

struct ReplayResult {
  bool ok = false;
  int failed_step = -1;  // -1: goal evaluation at the end
  std::string reason;
};

// Replays a witness on the explicit semantics: markings are fired directly
// and each step's guard is evaluated against the concrete xcd relation with
// the acting user pinned to the witness user.
inline ReplayResult replay_witness_detailed(const TwoLevelSystem& sys,
                                            const std::vector<WitnessStep>& steps,
                                            const Goal& goal) {
  Marking m = sys.m0;
  std::vector<std::pair<int, int>> xcd;
  for (size_t s = 0; s < steps.size(); ++s) {
    auto it = sys.net.transition_index.find(steps[s].transition_id);
    if (it == sys.net.transition_index.end())
      fail(errc::replay_step_failed,
           "step " + std::to_string(s) + ": unknown transition '" +
               steps[s].transition_id + "'");
    int t = it->second;
    if (!enabled(sys.net, m, t))
      return {false, static_cast<int>(s), "transition not enabled"};
    const auto& tr = sys.pm_of(t);
    auto uit = sys.policy.user_index.find(steps[s].user);
    if (uit == sys.policy.user_index.end())
      fail(errc::replay_step_failed, "step " + std::to_string(s) +
                                         ": unknown user '" + steps[s].user +
                                         "'");
    BsrFormula guard{tr.vars,
                     mk_and({tr.guard, mk_eq(BsrTerm::var(tr.acting, BsrSort::user),
                                             BsrTerm::constant(BsrSort::user,
                                                               uit->second))})};
    if (!bsr_holds_for_xcd(guard, sys.policy, xcd))
      return {false, static_cast<int>(s), "guard not satisfied"};
    m = fire(sys.net, m, t);
    std::pair<int, int> pair{uit->second, tr.action_index};
    if (std::find(xcd.begin(), xcd.end(), pair) == xcd.end()) xcd.push_back(pair);
  }
  if (!goal.vas_part.holds(m.tokens))
    return {false, -1, "final marking does not satisfy the goal"};
  std::sort(xcd.begin(), xcd.end());
  if (!bsr_holds_for_xcd(goal.pm_part, sys.policy, xcd))
    return {false, -1, "final xcd does not satisfy the goal"};
  return {true, -1, ""};
}

inline bool replay_witness(const TwoLevelSystem& sys,
                           const std::vector<WitnessStep>& steps,
                           const Goal& goal) {
  return replay_witness_detailed(sys, steps, goal).ok;
}

}  // namespace wfreach
