#pragma once

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "wfreach/errors.hpp"
#include "wfreach/petri.hpp"

namespace wfreach {

// Restricted BPEL subset: process / sequence / flow / invoke / receive with
// the operation (resp. name) attribute. Everything else is rejected in
// strict mode and skipped with a warning in lenient mode.
struct Activity {
  enum class Kind { sequence, flow, invoke, receive };
  Kind kind;
  std::string operation;           // invoke/receive only
  std::vector<Activity> children;  // sequence/flow only
};

struct ProcessAst {
  std::string name;
  Activity body;
};

namespace detail {

inline bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

struct BpelParser {
  bool strict;
  std::vector<std::string>* warnings;
  std::set<std::string> operations;

  void warn_or_fail(errc code, const std::string& msg) {
    if (strict) fail(code, msg);
    if (warnings) warnings->push_back(std::string(errc_name(code)) + ": " + msg);
  }

  void check_attributes(const boost::property_tree::ptree& node,
                        const std::string& element,
                        const std::set<std::string>& allowed) {
    auto attrs = node.get_child_optional("<xmlattr>");
    if (!attrs) return;
    for (const auto& [key, value] : *attrs) {
      if (!allowed.count(key))
        warn_or_fail(errc::unsupported_element,
                     "attribute '" + key + "' on <" + element + ">");
    }
  }

  Activity parse_activity(const std::string& name,
                          const boost::property_tree::ptree& node) {
    Activity a;
    if (name == "sequence" || name == "flow") {
      a.kind = name == "sequence" ? Activity::Kind::sequence : Activity::Kind::flow;
      check_attributes(node, name, {"name"});
      for (const auto& [child_name, child] : node) {
        if (child_name == "<xmlattr>" || child_name == "<xmlcomment>") continue;
        if (child_name == "<xmltext>") {
          if (!is_blank(child.data()))
            warn_or_fail(errc::unsupported_element, "text content in <" + name + ">");
          continue;
        }
        if (child_name == "sequence" || child_name == "flow" ||
            child_name == "invoke" || child_name == "receive") {
          a.children.push_back(parse_activity(child_name, child));
        } else {
          warn_or_fail(errc::unsupported_element, "<" + child_name + ">");
        }
      }
      if (a.children.empty())
        fail(errc::xml_syntax, "<" + name + "> has no supported child activity");
    } else {
      a.kind = name == "invoke" ? Activity::Kind::invoke : Activity::Kind::receive;
      check_attributes(node, name, {"operation", "name", "partnerLink", "portType"});
      auto op = node.get_optional<std::string>("<xmlattr>.operation");
      if (!op || op->empty())
        fail(errc::xml_syntax, "<" + name + "> without operation attribute");
      if (!operations.insert(*op).second)
        fail(errc::duplicate_operation, "'" + *op + "'");
      a.operation = *op;
      for (const auto& [child_name, child] : node) {
        if (child_name == "<xmlattr>" || child_name == "<xmlcomment>") continue;
        if (child_name == "<xmltext>" && is_blank(child.data())) continue;
        warn_or_fail(errc::unsupported_element,
                     "content inside <" + name + " operation=\"" + *op + "\">");
      }
    }
    return a;
  }
};

}  // namespace detail

inline ProcessAst parse_bpel(const std::string& xml_text, bool strict = true,
                             std::vector<std::string>* warnings = nullptr) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(xml_text);
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    fail(errc::xml_syntax, e.message());
  }

  detail::BpelParser parser{strict, warnings, {}};
  const pt::ptree* process = nullptr;
  for (const auto& [name, node] : tree) {
    if (name == "<xmlcomment>") continue;
    if (name == "process" && !process) {
      process = &node;
    } else {
      parser.warn_or_fail(errc::unsupported_element, "top-level <" + name + ">");
    }
  }
  if (!process) fail(errc::xml_syntax, "no <process> element");

  ProcessAst ast;
  ast.name = process->get<std::string>("<xmlattr>.name", "process");
  parser.check_attributes(*process, "process", {"name", "targetNamespace", "xmlns"});

  std::vector<Activity> top;
  for (const auto& [name, node] : *process) {
    if (name == "<xmlattr>" || name == "<xmlcomment>") continue;
    if (name == "<xmltext>") {
      if (!detail::is_blank(node.data()))
        parser.warn_or_fail(errc::unsupported_element, "text content in <process>");
      continue;
    }
    if (name == "sequence" || name == "flow" || name == "invoke" ||
        name == "receive") {
      top.push_back(parser.parse_activity(name, node));
    } else {
      parser.warn_or_fail(errc::unsupported_element, "<" + name + ">");
    }
  }
  if (top.size() != 1)
    fail(errc::xml_syntax, "process must contain exactly one activity, found " +
                               std::to_string(top.size()));
  ast.body = std::move(top[0]);
  return ast;
}

namespace detail {

// Structural translation. Each activity is wired between a given entry and
// exit place; sequences thread fresh boundary places between children (the
// exit of one child is the entry of the next), flows add one split and one
// join transition with fresh per-branch entry/exit places.
struct NetBuilder {
  PetriNet net;
  int flow_counter = 0;
  int seq_counter = 0;

  void add_place(const std::string& id) { net.places.push_back(id); }
  void add_transition(const std::string& id, const std::string& label) {
    net.transitions.push_back({id, label});
  }
  void arc(const std::string& from, const std::string& to) {
    net.arcs.emplace_back(from, to);
  }

  std::string hint(const Activity& a) {
    switch (a.kind) {
      case Activity::Kind::invoke:
      case Activity::Kind::receive:
        return a.operation;
      case Activity::Kind::flow:
        return "flow" + std::to_string(++flow_counter);
      case Activity::Kind::sequence:
        return "seq" + std::to_string(++seq_counter);
    }
    return {};
  }

  void build(const Activity& a, const std::string& entry, const std::string& exit,
             const std::string& name) {
    switch (a.kind) {
      case Activity::Kind::invoke:
      case Activity::Kind::receive:
        add_transition(a.operation, a.operation);
        arc(entry, a.operation);
        arc(a.operation, exit);
        break;
      case Activity::Kind::sequence: {
        std::vector<std::string> names;
        names.reserve(a.children.size());
        for (const auto& c : a.children) names.push_back(hint(c));
        std::string at = entry;
        for (size_t i = 0; i < a.children.size(); ++i) {
          std::string next = i + 1 == a.children.size() ? exit : names[i] + "_out";
          if (i + 1 != a.children.size()) add_place(next);
          build(a.children[i], at, next, names[i]);
          at = next;
        }
        break;
      }
      case Activity::Kind::flow: {
        std::vector<std::string> names;
        names.reserve(a.children.size());
        for (const auto& c : a.children) names.push_back(hint(c));
        add_transition(name + "_split", name + "_split");
        arc(entry, name + "_split");
        for (size_t i = 0; i < a.children.size(); ++i) {
          std::string br = name + "_br" + std::to_string(i + 1);
          add_place(br + "_in");
          add_place(br + "_out");
          arc(name + "_split", br + "_in");
          arc(br + "_out", name + "_join");
          build(a.children[i], br + "_in", br + "_out", names[i]);
        }
        add_transition(name + "_join", name + "_join");
        arc(name + "_join", exit);
        break;
      }
    }
  }
};

}  // namespace detail

// Always produces a valid acyclic WF net with source "start" and sink "end";
// the canonical initial marking is one token in "start".
inline PetriNet translate(const ProcessAst& ast) {
  detail::NetBuilder b;
  b.add_place("start");
  b.add_place("end");
  b.build(ast.body, "start", "end", b.hint(ast.body));
  b.net.finalize();
  return b.net;
}

inline Marking initial_marking(const PetriNet& net, const WfNetInfo& info) {
  Marking m;
  m.tokens.assign(net.places.size(), 0);
  m.tokens[net.place_index.at(info.source)] = 1;
  return m;
}

}  // namespace wfreach
