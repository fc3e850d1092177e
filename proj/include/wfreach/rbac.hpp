#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "wfreach/errors.hpp"

namespace wfreach {

// History-dependent authorization constraint <D, (t1, t2), rho>: the
// performers of t1 and t2 (users, or their explicitly assigned roles) must
// stand in the relation. neq is separation of duty, eq binding of duty,
// senior requires the performer of t2 to hold a strictly more senior role
// than the performer of t1.
struct AuthConstraint {
  enum class Domain { user, role };
  enum class Relation { neq, eq, senior, pairs };

  Domain domain_kind = Domain::user;
  std::vector<int> domain;  // empty means the full set
  int t1 = -1;
  int t2 = -1;
  Relation relation = Relation::neq;
  std::vector<std::pair<int, int>> pairs;  // for Relation::pairs
};

struct RbacPolicy {
  std::vector<std::string> users, roles, permissions, actions;
  std::vector<std::pair<int, int>> ua;         // (user, role)
  std::vector<std::pair<int, int>> pa;         // (role, permission)
  std::vector<std::pair<int, int>> hierarchy;  // declared (senior, junior)
  std::vector<int> perm_of_action;             // per action, -1 = unguarded
  std::vector<AuthConstraint> constraints;

  // derived
  std::unordered_map<std::string, int> user_index, role_index, perm_index,
      action_index;
  std::vector<std::vector<bool>> ua_set;   // [user][role]
  std::vector<std::vector<bool>> pa_set;   // [role][perm]
  std::vector<std::vector<bool>> geq;      // reflexive-transitive closure

  int num_users() const { return static_cast<int>(users.size()); }
  int num_roles() const { return static_cast<int>(roles.size()); }

  bool ua_has(int u, int r) const { return ua_set[u][r]; }
  bool pa_has(int r, int p) const { return pa_set[r][p]; }
  bool geq_has(int r1, int r2) const { return geq[r1][r2]; }

  // u can get p: some role r' explicitly assigned to u dominates a role r
  // that carries the permission.
  bool can_get(int u, int p) const {
    for (int rp = 0; rp < num_roles(); ++rp) {
      if (!pa_set[rp][p]) continue;
      for (int re = 0; re < num_roles(); ++re)
        if (ua_set[u][re] && geq[re][rp]) return true;
    }
    return false;
  }

  int require_user(const std::string& s) const {
    auto it = user_index.find(s);
    if (it == user_index.end()) fail(errc::undeclared_constant, "user '" + s + "'");
    return it->second;
  }
  int require_role(const std::string& s) const {
    auto it = role_index.find(s);
    if (it == role_index.end()) fail(errc::undeclared_constant, "role '" + s + "'");
    return it->second;
  }
  int require_perm(const std::string& s) const {
    auto it = perm_index.find(s);
    if (it == perm_index.end())
      fail(errc::undeclared_constant, "permission '" + s + "'");
    return it->second;
  }
  int require_action(const std::string& s) const {
    auto it = action_index.find(s);
    if (it == action_index.end()) fail(errc::unknown_action, "'" + s + "'");
    return it->second;
  }

  // Recomputes indices, assignment matrices and the hierarchy closure.
  // The closure is what the geq relation denotes everywhere downstream.
  void finalize() {
    auto index = [](const std::vector<std::string>& names,
                    std::unordered_map<std::string, int>& map,
                    const char* what) {
      map.clear();
      for (int i = 0; i < static_cast<int>(names.size()); ++i)
        if (!map.emplace(names[i], i).second)
          fail(errc::bad_input,
               std::string("duplicate ") + what + " '" + names[i] + "'");
    };
    index(users, user_index, "user");
    index(roles, role_index, "role");
    index(permissions, perm_index, "permission");
    index(actions, action_index, "action");

    ua_set.assign(users.size(), std::vector<bool>(roles.size(), false));
    for (auto [u, r] : ua) ua_set[u][r] = true;
    pa_set.assign(roles.size(), std::vector<bool>(permissions.size(), false));
    for (auto [r, p] : pa) pa_set[r][p] = true;

    const int nr = num_roles();
    geq.assign(nr, std::vector<bool>(nr, false));
    for (int r = 0; r < nr; ++r) geq[r][r] = true;
    for (auto [senior, junior] : hierarchy) geq[senior][junior] = true;
    for (int k = 0; k < nr; ++k)
      for (int i = 0; i < nr; ++i)
        if (geq[i][k])
          for (int j = 0; j < nr; ++j)
            if (geq[k][j]) geq[i][j] = true;
    for (int i = 0; i < nr; ++i)
      for (int j = i + 1; j < nr; ++j)
        if (geq[i][j] && geq[j][i])
          fail(errc::hierarchy_not_antisymmetric,
               "roles '" + roles[i] + "' and '" + roles[j] +
                   "' dominate each other");

    if (perm_of_action.empty()) perm_of_action.assign(actions.size(), -1);
    if (perm_of_action.size() != actions.size())
      fail(errc::bad_input, "perm_of_action size mismatch");
  }
};

namespace detail {

inline std::pair<int, int> lookup_pair(
    const nlohmann::json& j, const std::unordered_map<std::string, int>& first,
    const std::unordered_map<std::string, int>& second, const char* what) {
  if (!j.is_array() || j.size() != 2)
    fail(errc::bad_input, std::string(what) + " entries must be pairs");
  auto a = first.find(j[0].get<std::string>());
  if (a == first.end())
    fail(errc::undeclared_constant, j[0].get<std::string>());
  auto b = second.find(j[1].get<std::string>());
  if (b == second.end())
    fail(errc::undeclared_constant, j[1].get<std::string>());
  return {a->second, b->second};
}

}  // namespace detail

// Policy document:
// {"users": [...], "roles": [...], "permissions": [...], "actions": [...],
//  "ua": [[user, role]...], "pa": [[role, permission]...],
//  "hierarchy": [[senior, junior]...], "perm_of_action": {action: permission},
//  "constraints": [{"domain_kind": "user"|"role", "domain": [...]?,
//                   "t1": action, "t2": action,
//                   "relation": "neq"|"eq"|"senior"|{"pairs": [[a,b]...]}}]}
inline RbacPolicy load_policy(const nlohmann::json& j) {
  if (!j.is_object()) fail(errc::bad_input, "policy document must be a JSON object");
  RbacPolicy p;
  try {
    for (const auto& u : j.at("users")) p.users.push_back(u.get<std::string>());
    for (const auto& r : j.at("roles")) p.roles.push_back(r.get<std::string>());
    for (const auto& q : j.value("permissions", nlohmann::json::array()))
      p.permissions.push_back(q.get<std::string>());
    for (const auto& a : j.value("actions", nlohmann::json::array()))
      p.actions.push_back(a.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(errc::bad_input, std::string("policy document: ") + e.what());
  }

  // pre-compute indexes for pair lookups, finalize() redoes them
  auto index = [](const std::vector<std::string>& names) {
    std::unordered_map<std::string, int> m;
    for (int i = 0; i < static_cast<int>(names.size()); ++i) m[names[i]] = i;
    return m;
  };
  auto ui = index(p.users), ri = index(p.roles), qi = index(p.permissions),
       ai = index(p.actions);

  for (const auto& e : j.value("ua", nlohmann::json::array()))
    p.ua.push_back(detail::lookup_pair(e, ui, ri, "ua"));
  for (const auto& e : j.value("pa", nlohmann::json::array()))
    p.pa.push_back(detail::lookup_pair(e, ri, qi, "pa"));
  for (const auto& e : j.value("hierarchy", nlohmann::json::array()))
    p.hierarchy.push_back(detail::lookup_pair(e, ri, ri, "hierarchy"));

  p.perm_of_action.assign(p.actions.size(), -1);
  if (j.contains("perm_of_action")) {
    for (const auto& [action, perm] : j.at("perm_of_action").items()) {
      auto a = ai.find(action);
      if (a == ai.end()) fail(errc::unknown_action, "'" + action + "'");
      auto q = qi.find(perm.get<std::string>());
      if (q == qi.end())
        fail(errc::undeclared_constant, perm.get<std::string>());
      p.perm_of_action[a->second] = q->second;
    }
  }

  for (const auto& c : j.value("constraints", nlohmann::json::array())) {
    AuthConstraint ac;
    std::string kind = c.at("domain_kind").get<std::string>();
    if (kind == "user")
      ac.domain_kind = AuthConstraint::Domain::user;
    else if (kind == "role")
      ac.domain_kind = AuthConstraint::Domain::role;
    else
      fail(errc::bad_input, "domain_kind must be 'user' or 'role'");
    const auto& members = kind == "user" ? ui : ri;
    for (const auto& d : c.value("domain", nlohmann::json::array())) {
      auto it = members.find(d.get<std::string>());
      if (it == members.end()) fail(errc::undeclared_constant, d.get<std::string>());
      ac.domain.push_back(it->second);
    }
    std::sort(ac.domain.begin(), ac.domain.end());
    auto t1 = ai.find(c.at("t1").get<std::string>());
    auto t2 = ai.find(c.at("t2").get<std::string>());
    if (t1 == ai.end()) fail(errc::unknown_action, c.at("t1").get<std::string>());
    if (t2 == ai.end()) fail(errc::unknown_action, c.at("t2").get<std::string>());
    ac.t1 = t1->second;
    ac.t2 = t2->second;
    const auto& rel = c.at("relation");
    if (rel.is_string()) {
      std::string r = rel.get<std::string>();
      if (r == "neq" || r == "!=")
        ac.relation = AuthConstraint::Relation::neq;
      else if (r == "eq" || r == "=")
        ac.relation = AuthConstraint::Relation::eq;
      else if (r == "senior" || r == "<")
        ac.relation = AuthConstraint::Relation::senior;
      else
        fail(errc::bad_input, "unknown relation '" + r + "'");
    } else if (rel.is_object() && rel.contains("pairs")) {
      ac.relation = AuthConstraint::Relation::pairs;
      for (const auto& e : rel.at("pairs"))
        ac.pairs.push_back(detail::lookup_pair(e, members, members, "relation"));
      std::sort(ac.pairs.begin(), ac.pairs.end());
    } else {
      fail(errc::bad_input, "relation must be a name or {\"pairs\": [...]}");
    }
    if (ac.relation == AuthConstraint::Relation::senior &&
        ac.domain_kind != AuthConstraint::Domain::role)
      fail(errc::bad_input, "'senior' is a role-domain relation");
    if (!ac.domain.empty() && ac.relation == AuthConstraint::Relation::pairs) {
      for (auto [a, b] : ac.pairs)
        if (!std::binary_search(ac.domain.begin(), ac.domain.end(), a) ||
            !std::binary_search(ac.domain.begin(), ac.domain.end(), b))
          fail(errc::bad_input, "relation pair outside the constraint domain");
    }
    p.constraints.push_back(std::move(ac));
  }

  p.finalize();
  return p;
}

inline RbacPolicy load_policy_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(errc::bad_input, "policy document is not valid JSON");
  return load_policy(j);
}

// Canonical serialization: declaration order for the four universes, pair
// lists sorted. load(save(p)) reproduces p bit-exactly.
inline nlohmann::json policy_to_json(const RbacPolicy& p) {
  nlohmann::json j;
  j["users"] = p.users;
  j["roles"] = p.roles;
  j["permissions"] = p.permissions;
  j["actions"] = p.actions;
  auto pairs = [](std::vector<std::pair<int, int>> v,
                  const std::vector<std::string>& first,
                  const std::vector<std::string>& second) {
    std::sort(v.begin(), v.end());
    nlohmann::json out = nlohmann::json::array();
    for (auto [a, b] : v) out.push_back({first[a], second[b]});
    return out;
  };
  j["ua"] = pairs(p.ua, p.users, p.roles);
  j["pa"] = pairs(p.pa, p.roles, p.permissions);
  j["hierarchy"] = pairs(p.hierarchy, p.roles, p.roles);
  auto& poa = j["perm_of_action"] = nlohmann::json::object();
  for (size_t a = 0; a < p.actions.size(); ++a)
    if (p.perm_of_action[a] >= 0)
      poa[p.actions[a]] = p.permissions[p.perm_of_action[a]];
  auto& cs = j["constraints"] = nlohmann::json::array();
  for (const auto& c : p.constraints) {
    nlohmann::json e;
    bool user = c.domain_kind == AuthConstraint::Domain::user;
    e["domain_kind"] = user ? "user" : "role";
    const auto& names = user ? p.users : p.roles;
    if (!c.domain.empty()) {
      auto& d = e["domain"] = nlohmann::json::array();
      for (int m : c.domain) d.push_back(names[m]);
    }
    e["t1"] = p.actions[c.t1];
    e["t2"] = p.actions[c.t2];
    switch (c.relation) {
      case AuthConstraint::Relation::neq: e["relation"] = "neq"; break;
      case AuthConstraint::Relation::eq: e["relation"] = "eq"; break;
      case AuthConstraint::Relation::senior: e["relation"] = "senior"; break;
      case AuthConstraint::Relation::pairs: {
        auto& ps = e["relation"]["pairs"] = nlohmann::json::array();
        for (auto [a, b] : c.pairs) ps.push_back({names[a], names[b]});
        break;
      }
    }
    cs.push_back(std::move(e));
  }
  return j;
}

inline std::string policy_to_json_text(const RbacPolicy& p) {
  return policy_to_json(p).dump(2) + "\n";
}

}  // namespace wfreach
