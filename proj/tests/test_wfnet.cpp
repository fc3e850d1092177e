#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "wfreach/bpel.hpp"
#include "wfreach/net_json.hpp"
#include "wfreach/petri.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace wfreach;

namespace {

// the purchase-order net built by hand, isomorphic to the BPEL translation
PetriNet po_net() {
  return make_net(
      {"p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "p10"},
      {{"crtPO", "crtPO"},
       {"apprPO", "apprPO"},
       {"split", "split"},
       {"signGRN", "signGRN"},
       {"ctrsignGRN", "ctrsignGRN"},
       {"crtPay", "crtPay"},
       {"join", "join"},
       {"apprPay", "apprPay"}},
      {{"p1", "crtPO"},   {"crtPO", "p2"},      {"p2", "apprPO"},
       {"apprPO", "p3"},  {"p3", "split"},      {"split", "p4"},
       {"split", "p5"},   {"p4", "signGRN"},    {"signGRN", "p7"},
       {"p7", "ctrsignGRN"}, {"ctrsignGRN", "p6"}, {"p5", "crtPay"},
       {"crtPay", "p8"},  {"p6", "join"},       {"p8", "join"},
       {"join", "p9"},    {"p9", "apprPay"},    {"apprPay", "p10"}});
}

Marking po_m0(const PetriNet& net) { return marking_from_map(net, {{"p1", 1}}); }

}  // namespace

TEST_CASE("wf validation of the purchase-order net") {
  PetriNet net = po_net();
  WfNetInfo info = validate_wf_net(net);
  CHECK(info.source == "p1");
  CHECK(info.sink == "p10");
  CHECK(info.acyclic);
  REQUIRE(info.max_transition_path_length.has_value());
  CHECK(*info.max_transition_path_length == 8);
}

TEST_CASE("single place net is a WF net with bound zero") {
  PetriNet net = make_net({"p1"}, {}, {});
  WfNetInfo info = validate_wf_net(net);
  CHECK(info.source == "p1");
  CHECK(info.sink == "p1");
  CHECK(info.acyclic);
  CHECK(*info.max_transition_path_length == 0);
}

TEST_CASE("validation failures") {
  SECTION("two sources") {
    PetriNet net = make_net({"a", "b", "o"}, {{"t", "t"}},
                            {{"a", "t"}, {"b", "t"}, {"t", "o"}});
    CHECK_THROWS_MATCHES(validate_wf_net(net), error,
                         Catch::Matchers::Predicate<error>([](const error& e) {
                           return e.code() == errc::no_unique_source;
                         }));
  }
  SECTION("two sinks") {
    PetriNet net = make_net({"i", "a", "b"}, {{"t", "t"}},
                            {{"i", "t"}, {"t", "a"}, {"t", "b"}});
    CHECK_THROWS_MATCHES(validate_wf_net(net), error,
                         Catch::Matchers::Predicate<error>([](const error& e) {
                           return e.code() == errc::no_unique_sink;
                         }));
  }
  SECTION("transition off every source-sink path") {
    PetriNet net = make_net({"i", "o"}, {{"t1", "t1"}, {"t2", "t2"}},
                            {{"i", "t1"}, {"t1", "o"}, {"i", "t2"}});
    CHECK_THROWS_MATCHES(validate_wf_net(net), error,
                         Catch::Matchers::Predicate<error>([](const error& e) {
                           return e.code() == errc::transition_not_covered;
                         }));
  }
  SECTION("duplicate arc") {
    CHECK_THROWS_AS(make_net({"i", "o"}, {{"t", "t"}},
                             {{"i", "t"}, {"i", "t"}, {"t", "o"}}),
                    error);
  }
  SECTION("cycle detected") {
    PetriNet net = make_net(
        {"i", "a", "o"}, {{"t1", "t1"}, {"t2", "t2"}, {"t3", "t3"}},
        {{"i", "t1"}, {"t1", "a"}, {"a", "t2"}, {"t2", "a"}, {"a", "t3"},
         {"t3", "o"}});
    // t2 is a self loop on place a
    WfNetInfo info = validate_wf_net(net);
    CHECK_FALSE(info.acyclic);
    CHECK_FALSE(info.max_transition_path_length.has_value());
    Marking m0 = marking_from_map(net, {{"i", 1}});
    CHECK_THROWS_AS(fire_count_bound(net, m0), error);
  }
}

TEST_CASE("enabled and fire on the purchase-order net") {
  PetriNet net = po_net();
  Marking m0 = po_m0(net);
  CHECK(enabled(net, m0, "crtPO"));
  CHECK_FALSE(enabled(net, m0, "apprPay"));
  CHECK_THROWS_AS(enabled(net, m0, "nope"), error);

  Marking two = m0;
  two.tokens[net.place_index.at("p1")] = 2;
  CHECK(enabled(net, two, "crtPO"));

  Marking m1 = fire(net, m0, "crtPO");
  CHECK(m1.tokens[net.place_index.at("p1")] == 0);
  CHECK(m1.tokens[net.place_index.at("p2")] == 1);

  Marking m3 = marking_from_map(net, {{"p3", 1}});
  Marking split = fire(net, m3, "split");
  CHECK(split.tokens[net.place_index.at("p4")] == 1);
  CHECK(split.tokens[net.place_index.at("p5")] == 1);
  CHECK(split.tokens[net.place_index.at("p3")] == 0);

  CHECK_THROWS_AS(fire(net, m0, "apprPay"), error);

  // token conservation: firing changes the total by |post| - |pre|
  int t = net.transition_index.at("split");
  int64_t before = 0, after = 0;
  for (auto v : m3.tokens) before += v;
  for (auto v : split.tokens) after += v;
  CHECK(after - before ==
        static_cast<int64_t>(net.post[t].size() - net.pre[t].size()));
}

TEST_CASE("explicit reachability on the purchase-order net") {
  PetriNet net = po_net();
  Marking m0 = po_m0(net);
  auto depth0 = explicit_reachable(net, m0, 0);
  CHECK(depth0.size() == 1);
  CHECK(depth0.count(m0) == 1);

  auto all = explicit_reachable(net, m0, 8);
  Marking done = marking_from_map(net, {{"p10", 1}});
  CHECK(all.count(done) == 1);

  // the net is 1-safe from this marking
  for (const auto& m : all)
    for (auto count : m.tokens) CHECK(count <= 1);

  // monotone in depth, stable at the bound
  for (int64_t d = 0; d < 8; ++d) {
    auto a = explicit_reachable(net, m0, d);
    auto b = explicit_reachable(net, m0, d + 1);
    for (const auto& m : a) CHECK(b.count(m) == 1);
  }
  CHECK(explicit_reachable(net, m0, 8) == explicit_reachable(net, m0, 11));
}

TEST_CASE("explicit reachability respects the state budget") {
  PetriNet net = po_net();
  CHECK_THROWS_MATCHES(explicit_reachable(net, po_m0(net), 8, 3), error,
                       Catch::Matchers::Predicate<error>([](const error& e) {
                         return e.code() == errc::state_budget_exceeded;
                       }));
}

TEST_CASE("fire-count bound equals explicit stabilization depth on generated nets") {
  std::mt19937 rng(20240811);
  for (int i = 0; i < 40; ++i) {
    auto inst = gen::random_net(rng, 12);
    REQUIRE(inst.info.acyclic);
    int64_t bound = *inst.info.max_transition_path_length;
    // choice-free structured nets: every maximal run fires all transitions
    CHECK(bound == inst.net.num_transitions());
    int64_t stable = oracle::stabilization_depth(inst.net, inst.m0, bound + 2);
    CHECK(stable <= bound);
    CHECK(explicit_reachable(inst.net, inst.m0, bound) ==
          explicit_reachable(inst.net, inst.m0, bound + 3));
  }
}

TEST_CASE("fire-count bound is exact on an unbalanced join") {
  // two producers feed c; t4 fires twice, which no single graph path shows
  PetriNet net = make_net(
      {"i", "a", "b", "c", "o"},
      {{"t1", "t1"}, {"t2", "t2"}, {"t3", "t3"}, {"t4", "t4"}},
      {{"i", "t1"}, {"t1", "a"}, {"t1", "b"}, {"a", "t2"}, {"t2", "c"},
       {"b", "t3"}, {"t3", "c"}, {"c", "t4"}, {"t4", "o"}});
  Marking m0 = marking_from_map(net, {{"i", 1}});
  CHECK(fire_count_bound(net, m0) == 5);
  CHECK(oracle::stabilization_depth(net, m0, 8) == 5);
}

TEST_CASE("net json round trip is canonical") {
  PetriNet net = po_net();
  Marking m0 = po_m0(net);
  std::string text = net_to_json_text(net, m0);
  NetDocument doc = net_from_json_text(text);
  CHECK(doc.net.places == net.places);
  CHECK(doc.initial_marking == m0);
  CHECK(net_to_json_text(doc.net, doc.initial_marking) == text);
  CHECK_THROWS_AS(net_from_json_text("{nope"), error);
  CHECK_THROWS_AS(net_from_json_text("{\"places\": [\"p\"]}"), error);
}

TEST_CASE("bpel parse of the purchase-order process") {
  std::string text = R"(<?xml version="1.0"?>
<process name="PO">
  <sequence>
    <receive operation="crtPO"></receive>
    <invoke operation="apprPO"></invoke>
    <flow>
      <sequence>
        <invoke operation="signGRN"/>
        <invoke operation="ctrsignGRN"/>
      </sequence>
      <invoke operation="crtPay"/>
    </flow>
    <invoke operation="apprPay"/>
  </sequence>
</process>)";
  ProcessAst ast = parse_bpel(text);
  CHECK(ast.name == "PO");
  REQUIRE(ast.body.kind == Activity::Kind::sequence);
  REQUIRE(ast.body.children.size() == 4);
  CHECK(ast.body.children[0].kind == Activity::Kind::receive);
  CHECK(ast.body.children[0].operation == "crtPO");
  CHECK(ast.body.children[2].kind == Activity::Kind::flow);
  REQUIRE(ast.body.children[2].children.size() == 2);
  CHECK(ast.body.children[2].children[0].kind == Activity::Kind::sequence);
  CHECK(ast.body.children[2].children[0].children[1].operation == "ctrsignGRN");
  CHECK(ast.body.children[3].operation == "apprPay");
}

TEST_CASE("bpel parse errors") {
  CHECK_THROWS_MATCHES(parse_bpel("<process><sequence>"), error,
                       Catch::Matchers::Predicate<error>([](const error& e) {
                         return e.code() == errc::xml_syntax;
                       }));
  CHECK_THROWS_MATCHES(
      parse_bpel("<process name=\"x\"><while><invoke operation=\"a\"/></while>"
                 "</process>"),
      error, Catch::Matchers::Predicate<error>([](const error& e) {
        return e.code() == errc::unsupported_element;
      }));
  CHECK_THROWS_MATCHES(
      parse_bpel("<process name=\"x\"><sequence><invoke operation=\"a\"/>"
                 "<invoke operation=\"a\"/></sequence></process>"),
      error, Catch::Matchers::Predicate<error>([](const error& e) {
        return e.code() == errc::duplicate_operation;
      }));
  // lenient mode skips the unknown element but keeps the rest
  std::vector<std::string> warnings;
  ProcessAst ast = parse_bpel(
      "<process name=\"x\"><sequence><invoke operation=\"a\"/>"
      "<while/></sequence></process>",
      false, &warnings);
  CHECK(ast.body.children.size() == 1);
  CHECK(warnings.size() == 1);
}

TEST_CASE("translation of a single invoke") {
  ProcessAst ast = parse_bpel(
      "<process name=\"m\"><sequence><invoke operation=\"a\"/></sequence>"
      "</process>");
  PetriNet net = translate(ast);
  CHECK(net.num_places() == 2);
  CHECK(net.num_transitions() == 1);
  WfNetInfo info = validate_wf_net(net);
  CHECK(info.acyclic);
  CHECK(*info.max_transition_path_length == 1);
}

TEST_CASE("translation of a two-branch flow") {
  ProcessAst ast = parse_bpel(
      "<process name=\"m\"><flow><invoke operation=\"a\"/>"
      "<invoke operation=\"b\"/></flow></process>");
  PetriNet net = translate(ast);
  CHECK(net.num_places() == 6);
  CHECK(net.num_transitions() == 4);
  WfNetInfo info = validate_wf_net(net);
  Marking m0 = initial_marking(net, info);
  Marking done;
  done.tokens.assign(net.places.size(), 0);
  done.tokens[net.place_index.at(info.sink)] = 1;
  auto states = explicit_reachable(net, m0, 4);
  CHECK(states.count(done) == 1);
}

TEST_CASE("translation of the purchase-order process matches the reference net") {
  std::ifstream in(std::string(FIXTURE_DIR) + "/po.bpel");
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  ProcessAst ast = parse_bpel(ss.str());
  PetriNet net = translate(ast);
  REQUIRE(net.num_places() == 10);
  REQUIRE(net.num_transitions() == 8);
  std::vector<std::string> ids;
  for (const auto& t : net.transitions) ids.push_back(t.id);
  CHECK(ids == std::vector<std::string>{"crtPO", "apprPO", "flow1_split",
                                        "signGRN", "ctrsignGRN", "crtPay",
                                        "flow1_join", "apprPay"});
  WfNetInfo info = validate_wf_net(net);
  CHECK(info.acyclic);
  CHECK(*info.max_transition_path_length == 8);

  // isomorphic to the hand-built reference: same explicit state space size
  // at every depth and same per-transition degree structure
  PetriNet ref = po_net();
  Marking m0 = initial_marking(net, info);
  Marking ref_m0 = po_m0(ref);
  for (int64_t d = 0; d <= 9; ++d)
    CHECK(explicit_reachable(net, m0, d).size() ==
          explicit_reachable(ref, ref_m0, d).size());
  auto degrees = [](const PetriNet& n) {
    std::multiset<std::pair<size_t, size_t>> out;
    for (int t = 0; t < n.num_transitions(); ++t)
      out.insert({n.pre[t].size(), n.post[t].size()});
    return out;
  };
  CHECK(degrees(net) == degrees(ref));
}

TEST_CASE("flow branch order yields isomorphic nets") {
  auto build = [](const std::string& first, const std::string& second) {
    return translate(parse_bpel("<process name=\"m\"><flow><invoke operation=\"" +
                                first + "\"/><invoke operation=\"" + second +
                                "\"/></flow></process>"));
  };
  PetriNet ab = build("a", "b");
  PetriNet ba = build("b", "a");
  CHECK(ab.num_places() == ba.num_places());
  CHECK(ab.num_transitions() == ba.num_transitions());
  // same net up to renaming: arcs relabelled through the transition map agree
  auto canon = [](const PetriNet& n) {
    std::multiset<std::string> out;
    for (int t = 0; t < n.num_transitions(); ++t)
      out.insert(n.transitions[t].label + "/" + std::to_string(n.pre[t].size()) +
                 "/" + std::to_string(n.post[t].size()));
    return out;
  };
  CHECK(canon(ab) == canon(ba));
}

TEST_CASE("translation determinism") {
  std::string text =
      "<process name=\"m\"><sequence><invoke operation=\"a\"/>"
      "<flow><invoke operation=\"b\"/><invoke operation=\"c\"/></flow>"
      "</sequence></process>";
  PetriNet n1 = translate(parse_bpel(text));
  PetriNet n2 = translate(parse_bpel(text));
  WfNetInfo i1 = validate_wf_net(n1);
  CHECK(net_to_json_text(n1, initial_marking(n1, i1)) ==
        net_to_json_text(n2, initial_marking(n2, validate_wf_net(n2))));
}

TEST_CASE("generated nets always translate to valid acyclic WF nets") {
  std::mt19937 rng(7);
  for (int i = 0; i < 60; ++i) {
    auto inst = gen::random_net(rng, 14);
    CHECK(inst.info.acyclic);
    CHECK(inst.net.num_places() <= 14);
  }
}
