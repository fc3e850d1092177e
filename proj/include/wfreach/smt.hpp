#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "wfreach/bsr.hpp"
#include "wfreach/errors.hpp"
#include "wfreach/la.hpp"
#include "wfreach/rbac.hpp"

namespace wfreach {

// SMT-LIB2 bridge: renders the library's two formula classes as
// self-contained scripts and drives an external solver over stdin/stdout as
// an independent cross-check. The internal decision procedures stay
// authoritative; the solver never contributes witnesses.

enum class SmtStatus { sat, unsat, unknown };

inline const char* smt_status_name(SmtStatus s) {
  switch (s) {
    case SmtStatus::sat: return "sat";
    case SmtStatus::unsat: return "unsat";
    case SmtStatus::unknown: return "unknown";
  }
  return "?";
}

struct SmtJob {
  std::string logic;
  std::string script;
  std::optional<SmtStatus> expected;  // caller's expectation, if known
};

namespace smt_detail {

inline std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')
      out += c;
    else
      out += "_";
  }
  return out.empty() ? "_" : out;
}

}  // namespace smt_detail

// Integer constants x1..xm, non-negative, plus the DNF as one assertion.
inline SmtJob emit_la(const LaFormula& k, int num_vars) {
  SmtJob job;
  job.logic = "QF_LIA";
  std::string s = "(set-logic QF_LIA)\n";
  for (int v = 0; v < num_vars; ++v) {
    std::string x = "x" + std::to_string(v + 1);
    s += "(declare-const " + x + " Int)\n(assert (>= " + x + " 0))\n";
  }
  auto atom = [](const LaAtom& a) {
    std::string x = "x" + std::to_string(a.var + 1);
    std::string c = a.c < 0 ? "(- " + std::to_string(-a.c) + ")" : std::to_string(a.c);
    switch (a.rel) {
      case Rel::eq: return "(= " + x + " " + c + ")";
      case Rel::ne: return "(not (= " + x + " " + c + "))";
      case Rel::gt: return "(> " + x + " " + c + ")";
      case Rel::ge: return "(>= " + x + " " + c + ")";
      case Rel::lt: return "(< " + x + " " + c + ")";
      case Rel::le: return "(<= " + x + " " + c + ")";
    }
    return std::string("false");
  };
  std::string body;
  if (k.cubes.empty()) {
    body = "false";
  } else {
    std::vector<std::string> cubes;
    for (const auto& cube : k.cubes) {
      if (cube.atoms.empty()) {
        cubes.push_back("true");
        continue;
      }
      std::string c = "(and";
      for (const auto& a : cube.atoms) c += " " + atom(a);
      cubes.push_back(c + ")");
    }
    if (cubes.size() == 1) {
      body = cubes[0];
    } else {
      body = "(or";
      for (const auto& c : cubes) body += " " + c;
      body += ")";
    }
  }
  s += "(assert " + body + ")\n(check-sat)\n";
  job.script = std::move(s);
  return job;
}

// Finite sorts via declared constants plus distinctness/coverage axioms, the
// definitional axioms for ua and pa, ground literals for the hierarchy
// closure of both polarities together with the partial-order axioms, xcd as
// an uninterpreted predicate, and the formula's existential closure.
inline SmtJob emit_bsr(const BsrFormula& k, const RbacPolicy& policy) {
  if (policy.users.empty() || policy.roles.empty())
    fail(errc::bad_input, "SMT rendering needs non-empty user/role universes");
  SmtJob job;
  job.logic = "UF";
  std::string s = "(set-logic UF)\n";

  struct SortInfo {
    const char* sort;
    const char* prefix;
    const std::vector<std::string>* names;
  };
  std::vector<SortInfo> sorts = {{"User", "U_", &policy.users},
                                 {"Role", "R_", &policy.roles},
                                 {"Perm", "P_", &policy.permissions},
                                 {"Action", "A_", &policy.actions}};
  auto constant = [&](BsrSort sort, int index) {
    const SortInfo& si = sorts[static_cast<int>(sort)];
    return std::string(si.prefix) + smt_detail::sanitize((*si.names)[index]);
  };
  for (const auto& si : sorts) {
    if (si.names->empty()) continue;  // unused sort, leave undeclared
    s += "(declare-sort " + std::string(si.sort) + " 0)\n";
    for (const auto& n : *si.names)
      s += "(declare-fun " + std::string(si.prefix) + smt_detail::sanitize(n) +
           " () " + si.sort + ")\n";
    if (si.names->size() > 1) {
      s += "(assert (distinct";
      for (const auto& n : *si.names)
        s += " " + std::string(si.prefix) + smt_detail::sanitize(n);
      s += "))\n";
    }
    s += "(assert (forall ((x " + std::string(si.sort) + ")) (or";
    for (const auto& n : *si.names)
      s += " (= x " + std::string(si.prefix) + smt_detail::sanitize(n) + ")";
    s += ")))\n";
  }

  s += "(declare-fun ua (User Role) Bool)\n";
  s += "(assert (forall ((u User) (r Role)) (= (ua u r) (or";
  if (policy.ua.empty()) s += " false";
  for (auto [u, r] : policy.ua)
    s += " (and (= u " + constant(BsrSort::user, u) + ") (= r " +
         constant(BsrSort::role, r) + "))";
  s += "))))\n";

  if (!policy.permissions.empty()) {
    s += "(declare-fun pa (Role Perm) Bool)\n";
    s += "(assert (forall ((r Role) (p Perm)) (= (pa r p) (or";
    if (policy.pa.empty()) s += " false";
    for (auto [r, p] : policy.pa)
      s += " (and (= r " + constant(BsrSort::role, r) + ") (= p " +
           constant(BsrSort::perm, p) + "))";
    s += "))))\n";
  }

  s += "(declare-fun geq (Role Role) Bool)\n";
  for (int r1 = 0; r1 < policy.num_roles(); ++r1)
    for (int r2 = 0; r2 < policy.num_roles(); ++r2)
      s += policy.geq_has(r1, r2)
               ? "(assert (geq " + constant(BsrSort::role, r1) + " " +
                     constant(BsrSort::role, r2) + "))\n"
               : "(assert (not (geq " + constant(BsrSort::role, r1) + " " +
                     constant(BsrSort::role, r2) + ")))\n";
  s += "(assert (forall ((r Role)) (geq r r)))\n";
  s += "(assert (forall ((r1 Role) (r2 Role) (r3 Role)) "
       "(=> (and (geq r1 r2) (geq r2 r3)) (geq r1 r3))))\n";
  s += "(assert (forall ((r1 Role) (r2 Role)) "
       "(=> (and (geq r1 r2) (geq r2 r1)) (= r1 r2))))\n";

  if (!policy.actions.empty())
    s += "(declare-fun xcd (User Action) Bool)\n";

  auto var_name = [&](int i) {
    return "v" + std::to_string(i) + "_" + smt_detail::sanitize(k.vars[i].name);
  };
  auto term = [&](const BsrTerm& t) {
    return t.is_var ? var_name(t.index) : constant(t.sort, t.index);
  };
  std::function<std::string(const BsrExpr&)> expr = [&](const BsrExpr& e) {
    switch (e.op) {
      case BsrExpr::Op::tru: return std::string("true");
      case BsrExpr::Op::fls: return std::string("false");
      case BsrExpr::Op::atom: {
        const auto& a = e.atom;
        switch (a.kind) {
          case BsrAtomKind::xcd:
            return "(xcd " + term(a.a) + " " + term(a.b) + ")";
          case BsrAtomKind::ua:
            return "(ua " + term(a.a) + " " + term(a.b) + ")";
          case BsrAtomKind::pa:
            return "(pa " + term(a.a) + " " + term(a.b) + ")";
          case BsrAtomKind::geq:
            return "(geq " + term(a.a) + " " + term(a.b) + ")";
          case BsrAtomKind::eq:
            return "(= " + term(a.a) + " " + term(a.b) + ")";
        }
        return std::string("false");
      }
      case BsrExpr::Op::neg:
        return "(not " + expr(e.kids[0]) + ")";
      case BsrExpr::Op::conj:
      case BsrExpr::Op::disj: {
        std::string out = e.op == BsrExpr::Op::conj ? "(and" : "(or";
        for (const auto& kid : e.kids) out += " " + expr(kid);
        return out + ")";
      }
    }
    return std::string("false");
  };
  std::string body = expr(k.matrix);
  if (!k.vars.empty()) {
    std::string decls;
    for (size_t i = 0; i < k.vars.size(); ++i)
      decls += "(" + var_name(static_cast<int>(i)) + " " +
               (k.vars[i].sort == BsrSort::user ? "User" : "Role") + ") ";
    body = "(exists (" + decls + ") " + body + ")";
  }
  s += "(assert " + body + ")\n(check-sat)\n";
  job.script = std::move(s);
  return job;
}

struct SolverConfig {
  std::string path;        // solver executable; reads SMT-LIB2 on stdin
  int timeout_ms = 30000;  // timeout maps to unknown
};

inline std::optional<std::string> default_solver_path() {
  if (const char* env = std::getenv("WFREACH_SOLVER"); env && *env)
    return std::string(env);
  return std::nullopt;
}

// Launches the solver, feeds the script on stdin, reads stdout until EOF or
// timeout, and reports the first status token.
inline SmtStatus run_solver(const SmtJob& job, const SolverConfig& config) {
  if (config.path.empty())
    fail(errc::solver_not_found, "no solver path configured");
  if (access(config.path.c_str(), X_OK) != 0)
    fail(errc::solver_not_found, config.path);

  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
    fail(errc::solver_crashed, "pipe() failed");
  pid_t pid = fork();
  if (pid < 0) fail(errc::solver_crashed, "fork() failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl(config.path.c_str(), config.path.c_str(), (char*)nullptr);
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);

  // write the script; the jobs are small enough that chunked writes with a
  // closed read end are the only failure mode worth handling
  size_t written = 0;
  while (written < job.script.size()) {
    ssize_t n = write(in_pipe[1], job.script.data() + written,
                      job.script.size() - written);
    if (n <= 0) break;
    written += static_cast<size_t>(n);
  }
  close(in_pipe[1]);

  std::string output;
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::milliseconds(config.timeout_ms);
  bool timed_out = false;
  char buf[4096];
  while (true) {
    auto now = std::chrono::steady_clock::now();
    int remaining = static_cast<int>(
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now)
            .count());
    if (remaining <= 0) {
      timed_out = true;
      break;
    }
    struct pollfd pfd{out_pipe[0], POLLIN, 0};
    int pr = poll(&pfd, 1, remaining);
    if (pr <= 0) {
      timed_out = pr == 0;
      break;
    }
    ssize_t n = read(out_pipe[0], buf, sizeof buf);
    if (n <= 0) break;
    output.append(buf, static_cast<size_t>(n));
  }
  close(out_pipe[0]);
  if (timed_out) kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);
  if (timed_out) return SmtStatus::unknown;

  // first status token wins
  size_t pos = 0;
  while (pos < output.size()) {
    size_t end = output.find('\n', pos);
    std::string line = output.substr(pos, end == std::string::npos
                                              ? std::string::npos
                                              : end - pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line == "sat") return SmtStatus::sat;
    if (line == "unsat") return SmtStatus::unsat;
    if (line == "unknown") return SmtStatus::unknown;
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  if (WIFEXITED(status) && WEXITSTATUS(status) == 127)
    fail(errc::solver_not_found, config.path + " could not be executed");
  if (WIFEXITED(status) && WEXITSTATUS(status) != 0)
    fail(errc::solver_crashed,
         "exit " + std::to_string(WEXITSTATUS(status)) + "; output: " +
             output.substr(0, 200));
  fail(errc::solver_parse_error, "no status token in: " + output.substr(0, 200));
}

}  // namespace wfreach
