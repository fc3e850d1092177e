// Command-line front end: translate BPEL to a net, decide goal reachability
// against an RBAC policy, dump symbolic execution trees, export the final
// proof obligations as SMT-LIB2, and sanity-check policies.
//
// Exit codes are a contract: 0 = goal unreachable (or plain success),
// 10 = goal reachable, 2 = input parse error, 3 = validation error,
// 11 = budget exceeded, 12 = I/O error, 13 = solver error, 14 = exploration
// truncated below the completeness bound, 1 = internal error.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wfreach/bpel.hpp"
#include "wfreach/dot.hpp"
#include "wfreach/engine.hpp"
#include "wfreach/goal.hpp"
#include "wfreach/net_json.hpp"
#include "wfreach/rbac.hpp"
#include "wfreach/smt.hpp"

namespace {

using namespace wfreach;

constexpr int kExitUnreachable = 0;
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitReachable = 10;
constexpr int kExitBudget = 11;
constexpr int kExitIo = 12;
constexpr int kExitSolver = 13;
constexpr int kExitIncomplete = 14;

int exit_code_for(const error& e) {
  switch (e.code()) {
    case errc::xml_syntax:
    case errc::unsupported_element:
    case errc::duplicate_operation:
    case errc::bad_input:
      return kExitParse;
    case errc::state_budget_exceeded:
    case errc::node_budget_exceeded:
    case errc::grounding_budget_exceeded:
      return kExitBudget;
    case errc::solver_not_found:
    case errc::solver_crashed:
    case errc::solver_parse_error:
      return kExitSolver;
    default:
      return kExitValidation;
  }
}

struct IoError {
  std::string path;
};

std::string read_file_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw IoError{path};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_or_throw(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw IoError{path};
  out << content;
  if (!out.good()) throw IoError{path};
}

struct CommonOptions {
  std::string bpel_path;
  std::string net_path;
  std::string policy_path;
  bool lenient = false;
};

struct LoadedSystem {
  TwoLevelSystem sys;
};

NetDocument load_workflow(const CommonOptions& opt) {
  if (!opt.bpel_path.empty() && !opt.net_path.empty())
    fail(errc::bad_input, "give either --bpel or --net, not both");
  if (opt.bpel_path.empty() && opt.net_path.empty())
    fail(errc::bad_input, "a workflow input (--bpel or --net) is required");
  if (!opt.bpel_path.empty()) {
    std::vector<std::string> warnings;
    ProcessAst ast =
        parse_bpel(read_file_or_throw(opt.bpel_path), !opt.lenient, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    PetriNet net = translate(ast);
    WfNetInfo info = validate_wf_net(net);
    Marking m0 = initial_marking(net, info);
    return {std::move(net), std::move(m0)};
  }
  return net_from_json_text(read_file_or_throw(opt.net_path));
}

TwoLevelSystem load_system(const CommonOptions& opt) {
  NetDocument doc = load_workflow(opt);
  RbacPolicy policy = load_policy_text(read_file_or_throw(opt.policy_path));
  return build_system(doc.net, doc.initial_marking, policy, !opt.lenient);
}

Goal load_goal(const TwoLevelSystem& sys, const std::string& goal_path,
               bool soundness) {
  if (soundness != goal_path.empty())
    fail(errc::bad_input, "exactly one of --goal and --soundness is required");
  if (soundness) return soundness_goal(sys.net, sys.info);
  return parse_goal(read_file_or_throw(goal_path), sys.net, sys.policy);
}

// the final proof obligations, split per level over the explored tree
struct Obligations {
  LaFormula fr_v_and_goal;
  BsrFormula fr_r_and_goal;
  bool la_sat_internal = false;
  bool bsr_sat_internal = false;
};

Obligations proof_obligations(const TwoLevelSystem& sys, const SymbolicTree& tree,
                              const Goal& goal) {
  Obligations out;
  out.fr_r_and_goal.matrix = mk_false();
  for (const auto& node : tree.nodes) {
    LaFormula conj = la_and(node.vas_label, goal.vas_part, sys.vas.num_vars());
    out.fr_v_and_goal.cubes.insert(out.fr_v_and_goal.cubes.end(),
                                   conj.cubes.begin(), conj.cubes.end());
    // disjunction with variables renamed apart
    BsrFormula pm = bsr_and(node.pm_label, goal.pm_part);
    int base = static_cast<int>(out.fr_r_and_goal.vars.size());
    out.fr_r_and_goal.vars.insert(out.fr_r_and_goal.vars.end(), pm.vars.begin(),
                                  pm.vars.end());
    out.fr_r_and_goal.matrix =
        mk_or({out.fr_r_and_goal.matrix, shift_vars(pm.matrix, base)});
  }
  out.la_sat_internal = la_sat(out.fr_v_and_goal, sys.vas.num_vars());
  out.bsr_sat_internal = bsr_sat(out.fr_r_and_goal, sys.policy);
  return out;
}

nlohmann::json verdict_report(const TwoLevelSystem& sys, const Verdict& v,
                              bool timing, double elapsed_ms) {
  nlohmann::json j;
  switch (v.status) {
    case Verdict::Status::reachable: j["status"] = "reachable"; break;
    case Verdict::Status::unreachable: j["status"] = "unreachable"; break;
    case Verdict::Status::incomplete: j["status"] = "incomplete"; break;
  }
  j["bound"] = v.bound;
  j["wf_bound"] = fire_count_bound(sys.net, sys.m0);
  j["pm_bound"] = pm_bound(sys.policy, sys.compiled);
  j["depth_explored"] = v.depth_explored;
  j["nodes"] = v.nodes;
  j["post_images"] = {{"vas", v.la_posts}, {"pm", v.bsr_posts}};
  if (v.fixpoint_depth)
    j["fixpoint_depth"] = *v.fixpoint_depth;
  else
    j["fixpoint_depth"] = nullptr;
  if (v.status == Verdict::Status::reachable) {
    auto& steps = j["witness"] = nlohmann::json::array();
    int k = 0;
    for (const auto& s : v.witness) {
      steps.push_back({{"step", ++k},
                       {"transition", s.transition_id},
                       {"action", s.action},
                       {"user", s.user.empty() ? nlohmann::json() : nlohmann::json(s.user)}});
    }
    auto& state = j["goal_state"];
    auto& marking = state["marking"] = nlohmann::json::object();
    for (size_t p = 0; p < v.goal_marking.size(); ++p)
      if (v.goal_marking[p] != 0) marking[sys.net.places[p]] = v.goal_marking[p];
    auto& xcd = state["xcd"] = nlohmann::json::array();
    for (auto [u, a] : v.goal_xcd)
      xcd.push_back({sys.policy.users[u], sys.policy.actions[a]});
  }
  if (timing) j["elapsed_ms"] = elapsed_ms;
  return j;
}

int cmd_translate(const CommonOptions& common, const std::string& out_path) {
  if (common.bpel_path.empty())
    fail(errc::bad_input, "translate needs a --bpel input");
  ProcessAst ast = parse_bpel(read_file_or_throw(common.bpel_path), !common.lenient);
  PetriNet net = translate(ast);
  WfNetInfo info = validate_wf_net(net);
  std::string text = net_to_json_text(net, initial_marking(net, info));
  if (out_path.empty())
    std::cout << text;
  else
    write_file_or_throw(out_path, text);
  return kExitOk;
}

int cmd_policy_check(const CommonOptions& common) {
  RbacPolicy p = load_policy_text(read_file_or_throw(common.policy_path));
  nlohmann::json j;
  j["users"] = p.users.size();
  j["roles"] = p.roles.size();
  j["permissions"] = p.permissions.size();
  j["actions"] = p.actions.size();
  j["constraints"] = p.constraints.size();
  auto& closure = j["hierarchy_closure"] = nlohmann::json::array();
  for (int r1 = 0; r1 < p.num_roles(); ++r1)
    for (int r2 = 0; r2 < p.num_roles(); ++r2)
      if (r1 != r2 && p.geq_has(r1, r2))
        closure.push_back({p.roles[r1], p.roles[r2]});
  auto& grants = j["can_get"] = nlohmann::json::object();
  for (int u = 0; u < p.num_users(); ++u) {
    auto& row = grants[p.users[u]] = nlohmann::json::array();
    for (size_t q = 0; q < p.permissions.size(); ++q)
      if (p.can_get(u, static_cast<int>(q))) row.push_back(p.permissions[q]);
  }
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"workflow + RBAC goal reachability"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string goal_path, report_path, out_path, out_prefix, solver_path;
  bool soundness = false, no_timing = false, subsume = false, cross_check = false;
  std::optional<int64_t> depth;
  uint64_t node_budget = 200'000;
  uint64_t grounding_budget = 50'000'000;
  int solver_timeout_ms = 30000;
  size_t dot_width = 60;

  auto add_workflow = [&](CLI::App* cmd) {
    cmd->add_option("--bpel", common.bpel_path, "BPEL process file");
    cmd->add_option("--net", common.net_path, "net JSON file");
    cmd->add_flag("--lenient", common.lenient,
                  "skip unknown BPEL elements and relax binding checks");
  };
  auto add_policy = [&](CLI::App* cmd) {
    cmd->add_option("--policy", common.policy_path, "policy JSON file")
        ->required();
  };
  auto add_engine = [&](CLI::App* cmd) {
    cmd->add_option("--depth", depth, "explicit exploration depth");
    cmd->add_option("--node-budget", node_budget, "max symbolic nodes");
    cmd->add_option("--grounding-budget", grounding_budget,
                    "max grounding work per satisfiability check");
    cmd->add_flag("--subsume", subsume, "drop sibling-subsumed nodes");
  };
  auto add_goal = [&](CLI::App* cmd) {
    cmd->add_option("--goal", goal_path, "goal file");
    cmd->add_flag("--soundness", soundness,
                  "use the built-in termination-without-garbage goal");
  };

  CLI::App* translate = app.add_subcommand("translate", "BPEL -> net JSON");
  add_workflow(translate);
  translate->add_option("-o,--out", out_path, "output file (default stdout)");

  CLI::App* verify = app.add_subcommand("verify", "decide goal reachability");
  add_workflow(verify);
  add_policy(verify);
  add_goal(verify);
  add_engine(verify);
  verify->add_option("--report", report_path, "write the JSON report here too");
  verify->add_flag("--no-timing", no_timing, "omit timing from the report");
  verify->add_flag("--cross-check", cross_check,
                   "confirm the verdict with an external SMT solver");
  verify->add_option("--solver-path", solver_path, "SMT solver executable");
  verify->add_option("--solver-timeout-ms", solver_timeout_ms,
                     "solver timeout per job");

  CLI::App* dump = app.add_subcommand("dump-tree", "symbolic execution tree as DOT");
  add_workflow(dump);
  add_policy(dump);
  add_engine(dump);
  dump->add_option("-o,--out", out_path, "output file (default stdout)");
  dump->add_option("--dot-width", dot_width, "label truncation width");

  CLI::App* export_smt = app.add_subcommand(
      "export-smt", "emit the final proof obligations as SMT-LIB2");
  add_workflow(export_smt);
  add_policy(export_smt);
  add_goal(export_smt);
  add_engine(export_smt);
  export_smt->add_option("--out-prefix", out_prefix, "prefix for the .smt2 files")
      ->required();

  CLI::App* policy_check =
      app.add_subcommand("policy-check", "load a policy and report its closure");
  add_policy(policy_check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitParse;
  }

  try {
    ExploreOptions opt;
    opt.max_depth = depth;
    opt.node_budget = node_budget;
    opt.grounding_budget = grounding_budget;
    opt.subsumption = subsume;

    if (*translate) return cmd_translate(common, out_path);
    if (*policy_check) return cmd_policy_check(common);

    if (*dump) {
      TwoLevelSystem sys = load_system(common);
      SymbolicTree tree = explore(sys, opt);
      std::string dot = tree_to_dot(tree, sys, dot_width);
      if (out_path.empty())
        std::cout << dot;
      else
        write_file_or_throw(out_path, dot);
      return kExitOk;
    }

    if (*export_smt) {
      TwoLevelSystem sys = load_system(common);
      Goal goal = load_goal(sys, goal_path, soundness);
      SymbolicTree tree = explore(sys, opt);
      Obligations ob = proof_obligations(sys, tree, goal);
      write_file_or_throw(out_prefix + "_la.smt2",
                          emit_la(ob.fr_v_and_goal, sys.vas.num_vars()).script);
      write_file_or_throw(out_prefix + "_bsr.smt2",
                          emit_bsr(ob.fr_r_and_goal, sys.policy).script);
      std::cerr << "wrote " << out_prefix << "_la.smt2 and " << out_prefix
                << "_bsr.smt2\n";
      return kExitOk;
    }

    // verify
    auto t0 = std::chrono::steady_clock::now();
    TwoLevelSystem sys = load_system(common);
    for (const auto& w : sys.warnings) std::cerr << "warning: " << w << "\n";
    Goal goal = load_goal(sys, goal_path, soundness);
    Verdict verdict = check_goal(sys, goal, opt);
    double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  t0)
            .count();
    nlohmann::json report = verdict_report(sys, verdict, !no_timing, elapsed);

    if (verdict.status == Verdict::Status::reachable) {
      ReplayResult replay = replay_witness_detailed(sys, verdict.witness, goal);
      report["replay_ok"] = replay.ok;
      if (!replay.ok) {
        std::cerr << "internal error: witness failed replay at step "
                  << replay.failed_step << ": " << replay.reason << "\n";
        std::cout << report.dump(2) << "\n";
        return kExitInternal;
      }
    }

    if (cross_check) {
      std::string path = solver_path;
      if (path.empty())
        if (auto p = default_solver_path()) path = *p;
      SolverConfig config{path, solver_timeout_ms};
      SymbolicTree tree = explore(sys, opt);
      Obligations ob = proof_obligations(sys, tree, goal);
      SmtStatus la = run_solver(emit_la(ob.fr_v_and_goal, sys.vas.num_vars()),
                                config);
      SmtStatus bsr = run_solver(emit_bsr(ob.fr_r_and_goal, sys.policy), config);
      auto matches = [](bool internal, SmtStatus s) {
        return s == SmtStatus::unknown ||
               (internal ? s == SmtStatus::sat : s == SmtStatus::unsat);
      };
      if (!matches(ob.la_sat_internal, la) || !matches(ob.bsr_sat_internal, bsr)) {
        std::cerr << "cross-check mismatch: internal LA="
                  << (ob.la_sat_internal ? "sat" : "unsat")
                  << " solver=" << smt_status_name(la)
                  << ", internal BSR=" << (ob.bsr_sat_internal ? "sat" : "unsat")
                  << " solver=" << smt_status_name(bsr) << "\n";
        return kExitSolver;
      }
      report["cross_check"] = "ok";
    }

    std::string text = report.dump(2) + "\n";
    std::cout << text;
    if (!report_path.empty()) write_file_or_throw(report_path, text);
    switch (verdict.status) {
      case Verdict::Status::reachable: return kExitReachable;
      case Verdict::Status::unreachable: return kExitUnreachable;
      case Verdict::Status::incomplete: return kExitIncomplete;
    }
    return kExitInternal;
  } catch (const IoError& e) {
    std::cerr << "io error: cannot open '" << e.path << "'\n";
    return kExitIo;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
