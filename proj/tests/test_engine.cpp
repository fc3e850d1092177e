#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "wfreach/bpel.hpp"
#include "wfreach/engine.hpp"
#include "wfreach/goal.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace wfreach;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TwoLevelSystem po_system(const std::string& policy_file = "po_policy.json") {
  ProcessAst ast = parse_bpel(slurp(std::string(FIXTURE_DIR) + "/po.bpel"));
  PetriNet net = translate(ast);
  Marking m0 = initial_marking(net, validate_wf_net(net));
  RbacPolicy policy =
      load_policy_text(slurp(std::string(FIXTURE_DIR) + "/" + policy_file));
  return build_system(net, m0, policy);
}

// all transition-projected maximal/partial firing sequences of the explicit
// product semantics, as id sequences, up to the run bound
std::set<std::vector<int>> oracle_sequences(const TwoLevelSystem& sys) {
  std::set<std::vector<int>> out;
  struct Item {
    oracle::ProductState state;
    std::vector<int> path;
  };
  std::vector<Item> stack{{{sys.m0, 0}, {}}};
  while (!stack.empty()) {
    Item item = std::move(stack.back());
    stack.pop_back();
    out.insert(item.path);
    for (int t = 0; t < sys.num_transitions(); ++t) {
      if (!enabled(sys.net, item.state.m, t)) continue;
      std::set<uint64_t> next_xcds;
      for (int u = 0; u < sys.policy.num_users(); ++u)
        if (oracle::guard_holds(sys, t, u, item.state.xcd))
          next_xcds.insert(item.state.xcd |
                           oracle::xcd_bit(sys.policy, u, sys.binding[t]));
      if (next_xcds.empty()) continue;
      // one tree path per transition regardless of the acting user
      Item next{{fire(sys.net, item.state.m, t), *next_xcds.begin()}, item.path};
      next.path.push_back(t);
      // explore all xcd variants to keep guard evaluation faithful
      for (uint64_t x : next_xcds)
        stack.push_back({{next.state.m, x}, next.path});
    }
  }
  return out;
}

std::set<std::vector<int>> tree_paths(const SymbolicTree& tree) {
  std::set<std::vector<int>> out;
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    std::vector<int> path;
    for (int n = static_cast<int>(i); tree.nodes[n].parent >= 0;
         n = tree.nodes[n].parent)
      path.push_back(tree.nodes[n].incoming);
    std::reverse(path.begin(), path.end());
    out.insert(std::move(path));
  }
  return out;
}

}  // namespace

TEST_CASE("building the purchase-order system") {
  TwoLevelSystem sys = po_system();
  CHECK(sys.num_transitions() == 8);
  CHECK(sys.warnings.empty());
  int tautological = 0;
  for (int t = 0; t < sys.num_transitions(); ++t)
    tautological += sys.pm_of(t).guard.op == BsrExpr::Op::tru;
  CHECK(tautological == 3);  // crtPO, flow split, flow join
  CHECK(completeness_bound(sys) == 8);
}

TEST_CASE("strict mode rejects constrained actions without permissions") {
  ProcessAst ast = parse_bpel(slurp(std::string(FIXTURE_DIR) + "/po.bpel"));
  PetriNet net = translate(ast);
  Marking m0 = initial_marking(net, validate_wf_net(net));
  RbacPolicy policy =
      load_policy_text(slurp(std::string(FIXTURE_DIR) + "/po_policy.json"));
  AuthConstraint c;
  c.domain_kind = AuthConstraint::Domain::user;
  c.relation = AuthConstraint::Relation::neq;
  c.t1 = policy.action_index.at("apprPO");
  c.t2 = policy.action_index.at("crtPO");  // crtPO carries no permission
  policy.constraints.push_back(c);
  CHECK_THROWS_MATCHES(build_system(net, m0, policy, true), error,
                       Catch::Matchers::Predicate<error>([](const error& e) {
                         return e.code() == errc::unbound_action;
                       }));
  TwoLevelSystem sys = build_system(net, m0, policy, false);
  CHECK_FALSE(sys.warnings.empty());
}

TEST_CASE("labels missing from the policy become unguarded actions") {
  PetriNet net = make_net({"i", "o"}, {{"t", "mystery"}}, {{"i", "t"}, {"t", "o"}});
  Marking m0 = marking_from_map(net, {{"i", 1}});
  RbacPolicy policy = load_policy_text(R"({"users": ["u"], "roles": ["r"]})");
  TwoLevelSystem sys = build_system(net, m0, policy);
  CHECK(sys.policy.actions == std::vector<std::string>{"mystery"});
  CHECK(sys.pm_of(0).guard.op == BsrExpr::Op::tru);
}

TEST_CASE("exploring the purchase-order tree") {
  TwoLevelSystem sys = po_system();
  SymbolicTree tree = explore(sys);
  CHECK(tree.complete);
  REQUIRE(tree.fixpoint_depth.has_value());
  CHECK(*tree.fixpoint_depth == 8);
  CHECK(tree.depth_reached == 8);

  int leaves = 0;
  int sink = sys.net.place_index.at("end");
  for (const auto& node : tree.nodes) {
    if (node.depth < 8) continue;
    ++leaves;
    auto model = la_model(node.vas_label, sys.vas.num_vars());
    REQUIRE(model);
    for (int p = 0; p < sys.vas.num_vars(); ++p)
      CHECK((*model)[p] == (p == sink ? 1 : 0));
    // and that is the only model
    CHECK(la_entails(node.vas_label,
                     LaFormula{{LaCube{{{sink, Rel::eq, 1}}}}},
                     sys.vas.num_vars()));
  }
  // three interleavings of crtPay against signGRN/ctrsignGRN
  CHECK(leaves == 3);

  // path correspondence with the explicit product semantics
  CHECK(tree_paths(tree) == oracle_sequences(sys));
}

TEST_CASE("depth zero tree is the root alone") {
  TwoLevelSystem sys = po_system();
  ExploreOptions opt;
  opt.max_depth = 0;
  SymbolicTree tree = explore(sys, opt);
  CHECK(tree.nodes.size() == 1);
  CHECK_FALSE(tree.complete);
}

TEST_CASE("node budget is enforced") {
  TwoLevelSystem sys = po_system();
  ExploreOptions opt;
  opt.node_budget = 1;
  CHECK_THROWS_MATCHES(explore(sys, opt), error,
                       Catch::Matchers::Predicate<error>([](const error& e) {
                         return e.code() == errc::node_budget_exceeded;
                       }));
}

TEST_CASE("purchase-order soundness goal is reachable with a valid witness") {
  TwoLevelSystem sys = po_system();
  Goal goal = soundness_goal(sys.net, sys.info);
  Verdict v = check_goal(sys, goal);
  REQUIRE(v.status == Verdict::Status::reachable);
  REQUIRE(v.witness.size() == 8);
  CHECK(v.witness.front().action == "crtPO");
  CHECK(v.witness.back().action == "apprPay");

  // explicit replay validates the witness
  CHECK(replay_witness(sys, v.witness, goal));

  // the reported goal state is the sink marking plus one pair per step
  REQUIRE(v.goal_marking.size() == static_cast<size_t>(sys.vas.num_vars()));
  CHECK(v.goal_marking[sys.net.place_index.at("end")] == 1);
  std::vector<std::pair<int, int>> steps_xcd;
  for (const auto& s : v.witness)
    steps_xcd.emplace_back(sys.policy.user_index.at(s.user),
                           sys.policy.action_index.at(s.action));
  std::sort(steps_xcd.begin(), steps_xcd.end());
  CHECK(v.goal_xcd == steps_xcd);

  // users honor the constraints
  std::map<std::string, std::string> by_action;
  for (const auto& s : v.witness) by_action[s.action] = s.user;
  CHECK(by_action["apprPO"] != by_action["signGRN"]);
  CHECK(by_action["apprPO"] != by_action["ctrsignGRN"]);
  CHECK(by_action["signGRN"] != by_action["ctrsignGRN"]);
  const auto& p = sys.policy;
  int payer = p.user_index.at(by_action["crtPay"]);
  int approver = p.user_index.at(by_action["apprPay"]);
  bool strictly_senior = false;
  for (int r1 = 0; r1 < p.num_roles(); ++r1)
    for (int r2 = 0; r2 < p.num_roles(); ++r2)
      if (p.ua_has(payer, r1) && p.ua_has(approver, r2) && p.geq_has(r2, r1) &&
          r1 != r2)
        strictly_senior = true;
  CHECK(strictly_senior);

  // agreement with the explicit product oracle
  CHECK(oracle::check_goal(sys, goal));
}

TEST_CASE("removing the managers makes soundness unreachable") {
  TwoLevelSystem sys = po_system("po_policy_no_managers.json");
  Goal goal = soundness_goal(sys.net, sys.info);
  Verdict v = check_goal(sys, goal);
  REQUIRE(v.status == Verdict::Status::unreachable);
  CHECK(v.fixpoint_depth.has_value());
  CHECK_FALSE(oracle::check_goal(sys, goal));
}

TEST_CASE("goal equal to the initial condition is reachable at depth zero") {
  TwoLevelSystem sys = po_system();
  Goal goal;
  goal.vas_part = sys.vas.init;
  goal.pm_part = pm_initial(sys.policy);
  Verdict v = check_goal(sys, goal);
  REQUIRE(v.status == Verdict::Status::reachable);
  CHECK(v.witness.empty());
  CHECK(replay_witness(sys, v.witness, goal));
}

TEST_CASE("overriding the initial executed relation") {
  TwoLevelSystem sys = po_system();
  // start from a history where u1 already approved the order
  const auto& p = sys.policy;
  std::vector<BsrExpr> lits;
  for (int u = 0; u < p.num_users(); ++u)
    for (int a = 0; a < static_cast<int>(p.actions.size()); ++a) {
      BsrExpr atom = mk_atom(BsrAtomKind::xcd,
                             BsrTerm::constant(BsrSort::user, u),
                             BsrTerm::constant(BsrSort::action, a));
      bool set = u == p.user_index.at("u1") && a == p.action_index.at("apprPO");
      lits.push_back(set ? atom : mk_not(std::move(atom)));
    }
  sys.pm_init = BsrFormula{{}, mk_and(std::move(lits))};

  Goal g = parse_goal("pm: exists x:user . xcd(x, apprPO)", sys.net, sys.policy);
  Verdict v = check_goal(sys, g);
  REQUIRE(v.status == Verdict::Status::reachable);
  CHECK(v.witness.empty());  // already true initially

  // u1 signing requires some *other* approver: the net can still fire apprPO
  // (the token game is unchanged), so xcd(u1, signGRN) alone stays reachable,
  // but never without a second approver in the history
  Goal sod = parse_goal(
      "pm: xcd(u1, signGRN) & !xcd(u2, apprPO) & !xcd(u3, apprPO) & "
      "!xcd(u4, apprPO) & !xcd(u5, apprPO)",
      sys.net, sys.policy);
  CHECK(check_goal(sys, sod).status == Verdict::Status::unreachable);
  Goal ok = parse_goal("pm: xcd(u1, signGRN)", sys.net, sys.policy);
  CHECK(check_goal(sys, ok).status == Verdict::Status::reachable);
}

TEST_CASE("separation-of-duty violation state is unreachable") {
  TwoLevelSystem sys = po_system();
  Goal goal = parse_goal("pm: exists x:user . xcd(x, apprPO) & xcd(x, signGRN)",
                         sys.net, sys.policy);
  Verdict v = check_goal(sys, goal);
  CHECK(v.status == Verdict::Status::unreachable);
  CHECK_FALSE(oracle::check_goal(sys, goal));

  // but the binding-of-duty style pair on distinct users is reachable
  Goal ok = parse_goal(
      "pm: exists x:user, y:user . xcd(x, apprPO) & xcd(y, signGRN) & x != y",
      sys.net, sys.policy);
  CHECK(check_goal(sys, ok).status == Verdict::Status::reachable);
  CHECK(oracle::check_goal(sys, ok));
}

TEST_CASE("combined post-image is the conjunction of the level post-images") {
  TwoLevelSystem sys = po_system();
  SymbolicTree tree = explore(sys);
  std::mt19937 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto& node =
        tree.nodes[gen::pick(rng, 0, static_cast<int>(tree.nodes.size()) - 1)];
    int t = gen::pick(rng, 0, sys.num_transitions() - 1);
    auto [kv, kr] = post_image(sys, node, t, static_cast<int>(node.depth) + 1);
    CHECK(kv == post_image_v(node.vas_label, sys.vas.transitions[t],
                             sys.vas.num_vars()));
    auto expected = post_image_r(node.pm_label, sys.pm_of(t), sys.policy,
                                 static_cast<int>(node.depth) + 1);
    CHECK(kr.matrix == expected.matrix);
  }
}

TEST_CASE("witness with swapped users fails replay") {
  TwoLevelSystem sys = po_system();
  Goal goal = soundness_goal(sys.net, sys.info);
  Verdict v = check_goal(sys, goal);
  REQUIRE(v.status == Verdict::Status::reachable);
  auto witness = v.witness;
  std::string* appr = nullptr;
  std::string* sign = nullptr;
  for (auto& s : witness) {
    if (s.action == "apprPO") appr = &s.user;
    if (s.action == "signGRN") sign = &s.user;
  }
  REQUIRE(appr);
  REQUIRE(sign);
  *sign = *appr;  // violates separation of duty
  CHECK_FALSE(replay_witness(sys, witness, goal));

  auto detail = replay_witness_detailed(sys, witness, goal);
  CHECK_FALSE(detail.ok);
  CHECK(detail.reason == "guard not satisfied");

  auto broken = v.witness;
  broken[0].transition_id = "nope";
  CHECK_THROWS_MATCHES(replay_witness(sys, broken, goal), error,
                       Catch::Matchers::Predicate<error>([](const error& e) {
                         return e.code() == errc::replay_step_failed;
                       }));
}

TEST_CASE("interleaving order of the concurrent branch does not change verdicts") {
  // crtPay before, between, and after signGRN/ctrsignGRN
  auto serialized = [&](int position) {
    std::vector<std::string> ops = {"signGRN", "ctrsignGRN"};
    ops.insert(ops.begin() + position, "crtPay");
    std::string xml =
        "<process name=\"PO\"><sequence><receive operation=\"crtPO\"/>"
        "<invoke operation=\"apprPO\"/>";
    for (const auto& op : ops) xml += "<invoke operation=\"" + op + "\"/>";
    xml += "<invoke operation=\"apprPay\"/></sequence></process>";
    PetriNet net = translate(parse_bpel(xml));
    Marking m0 = initial_marking(net, validate_wf_net(net));
    RbacPolicy policy =
        load_policy_text(slurp(std::string(FIXTURE_DIR) + "/po_policy.json"));
    return build_system(net, m0, policy, false);
  };
  std::vector<Verdict::Status> soundness, sod;
  for (int pos = 0; pos <= 2; ++pos) {
    TwoLevelSystem sys = serialized(pos);
    soundness.push_back(
        check_goal(sys, soundness_goal(sys.net, sys.info)).status);
    Goal g = parse_goal("pm: exists x:user . xcd(x, apprPO) & xcd(x, signGRN)",
                        sys.net, sys.policy);
    sod.push_back(check_goal(sys, g).status);
  }
  CHECK(soundness[0] == soundness[1]);
  CHECK(soundness[1] == soundness[2]);
  CHECK(soundness[0] == Verdict::Status::reachable);
  CHECK(sod[0] == sod[1]);
  CHECK(sod[1] == sod[2]);
}

TEST_CASE("verdicts agree with the explicit product oracle on random systems") {
  std::mt19937 rng(314159);
  int instances = 0;
  while (instances < 25) {
    auto inst = gen::random_net(rng, 10);
    RbacPolicy policy = gen::random_policy(rng, inst.net, 3, 3, 3);
    if (oracle::xcd_bits(policy) > 36) continue;
    TwoLevelSystem sys = build_system(inst.net, inst.m0, policy);
    ++instances;
    for (int g = 0; g < 5; ++g) {
      Goal goal = gen::random_goal(rng, sys);
      Verdict v = check_goal(sys, goal);
      bool expected = oracle::check_goal(sys, goal);
      INFO("instance " << instances << " goal " << g);
      REQUIRE(v.status != Verdict::Status::incomplete);
      CHECK((v.status == Verdict::Status::reachable) == expected);
      if (v.status == Verdict::Status::reachable)
        CHECK(replay_witness(sys, v.witness, goal));
    }
  }
}

TEST_CASE("exploring one level past the bound changes nothing") {
  std::mt19937 rng(2718);
  for (int i = 0; i < 8; ++i) {
    auto inst = gen::random_net(rng, 9);
    RbacPolicy policy = gen::random_policy(rng, inst.net, 2, 2, 2);
    if (oracle::xcd_bits(policy) > 24) continue;
    TwoLevelSystem sys = build_system(inst.net, inst.m0, policy);
    ExploreOptions beyond;
    beyond.max_depth = completeness_bound(sys) + 1;
    for (int g = 0; g < 4; ++g) {
      Goal goal = gen::random_goal(rng, sys);
      CHECK(check_goal(sys, goal).status ==
            check_goal(sys, goal, beyond).status);
    }
  }
}

TEST_CASE("subsumption pruning keeps verdicts") {
  TwoLevelSystem sys = po_system();
  ExploreOptions opt;
  opt.subsumption = true;
  Goal goal = soundness_goal(sys.net, sys.info);
  CHECK(check_goal(sys, goal, opt).status == Verdict::Status::reachable);
  Goal sod = parse_goal("pm: exists x:user . xcd(x, apprPO) & xcd(x, signGRN)",
                        sys.net, sys.policy);
  CHECK(check_goal(sys, sod, opt).status == Verdict::Status::unreachable);
}

TEST_CASE("contract-signing-scale instance") {
  gen::DcsInstance dcs = gen::dcs_instance();
  CHECK(dcs.net.num_places() == 50);
  CHECK(dcs.net.num_transitions() == 26);
  TwoLevelSystem sys = build_system(dcs.net, dcs.m0, dcs.policy);
  int unguarded = 0;
  for (int t = 0; t < sys.num_transitions(); ++t)
    unguarded += sys.pm_of(t).guard.op == BsrExpr::Op::tru;
  CHECK(unguarded == 2);
  CHECK(sys.policy.users.size() == 5);
  CHECK(sys.policy.roles.size() == 4);
  CHECK(sys.policy.permissions.size() == 24);
  CHECK(completeness_bound(sys) == 26);

  auto t0 = std::chrono::steady_clock::now();
  Verdict v = check_goal(sys, dcs.goal);
  double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  REQUIRE(v.status == Verdict::Status::reachable);
  CHECK(v.witness.size() == 26);
  CHECK(replay_witness(sys, v.witness, dcs.goal));
  CHECK(seconds < 10.0);
}
