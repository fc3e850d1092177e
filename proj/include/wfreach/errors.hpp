#pragma once

#include <stdexcept>
#include <string>

namespace wfreach {

// Every failure the library reports deliberately, tagged so callers (and the
// CLI exit-code mapping) can tell input problems from budget exhaustion.
enum class errc {
  // net structure
  malformed_net,
  no_unique_source,
  no_unique_sink,
  transition_not_covered,
  cyclic_net,
  unknown_transition,
  not_enabled,
  state_budget_exceeded,
  // bpel
  xml_syntax,
  unsupported_element,
  duplicate_operation,
  // formulas
  non_unary_atom,
  // policy
  hierarchy_not_antisymmetric,
  undeclared_constant,
  unknown_action,
  // engine
  unbound_action,
  node_budget_exceeded,
  grounding_budget_exceeded,
  replay_step_failed,
  // smt bridge
  solver_not_found,
  solver_crashed,
  solver_parse_error,
  // generic
  bad_input,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::malformed_net: return "MalformedNet";
    case errc::no_unique_source: return "NoUniqueSource";
    case errc::no_unique_sink: return "NoUniqueSink";
    case errc::transition_not_covered: return "TransitionNotCovered";
    case errc::cyclic_net: return "CyclicNet";
    case errc::unknown_transition: return "UnknownTransition";
    case errc::not_enabled: return "NotEnabled";
    case errc::state_budget_exceeded: return "StateBudgetExceeded";
    case errc::xml_syntax: return "XmlSyntax";
    case errc::unsupported_element: return "UnsupportedElement";
    case errc::duplicate_operation: return "DuplicateOperation";
    case errc::non_unary_atom: return "NonUnaryAtom";
    case errc::hierarchy_not_antisymmetric: return "HierarchyNotAntisymmetric";
    case errc::undeclared_constant: return "UndeclaredConstant";
    case errc::unknown_action: return "UnknownAction";
    case errc::unbound_action: return "UnboundAction";
    case errc::node_budget_exceeded: return "NodeBudgetExceeded";
    case errc::grounding_budget_exceeded: return "GroundingBudgetExceeded";
    case errc::replay_step_failed: return "ReplayStepFailed";
    case errc::solver_not_found: return "SolverNotFound";
    case errc::solver_crashed: return "SolverCrashed";
    case errc::solver_parse_error: return "SolverParseError";
    case errc::bad_input: return "BadInput";
  }
  return "Unknown";
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& detail) {
  throw error(code, detail);
}

}  // namespace wfreach
