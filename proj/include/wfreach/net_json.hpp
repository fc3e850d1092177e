#pragma once

#include <map>
#include <string>
#include <utility>

#include <json.hpp>

#include "wfreach/errors.hpp"
#include "wfreach/petri.hpp"

namespace wfreach {

struct NetDocument {
  PetriNet net;
  Marking initial_marking;
};

// {"places": [...], "transitions": [{"id","label"}...],
//  "arcs": [["from","to"]...], "initial_marking": {place: count}}
// Array order in the document is the canonical index order.
inline NetDocument net_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(errc::bad_input, "net document must be a JSON object");
  PetriNet net;
  try {
    for (const auto& p : j.at("places")) net.places.push_back(p.get<std::string>());
    for (const auto& t : j.at("transitions")) {
      PetriNet::Transition tr;
      tr.id = t.at("id").get<std::string>();
      tr.label = t.contains("label") ? t.at("label").get<std::string>() : tr.id;
      net.transitions.push_back(std::move(tr));
    }
    for (const auto& a : j.at("arcs")) {
      if (!a.is_array() || a.size() != 2)
        fail(errc::bad_input, "arc entries must be [from, to] pairs");
      net.arcs.emplace_back(a[0].get<std::string>(), a[1].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(errc::bad_input, std::string("net document: ") + e.what());
  }
  net.finalize();
  std::map<std::string, int64_t> marks;
  if (j.contains("initial_marking")) {
    for (const auto& [place, count] : j.at("initial_marking").items()) {
      if (!count.is_number_integer())
        fail(errc::bad_input, "token counts must be integers");
      marks[place] = count.get<int64_t>();
    }
  }
  Marking m0 = marking_from_map(net, marks);
  return {std::move(net), std::move(m0)};
}

inline NetDocument net_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(errc::bad_input, "net document is not valid JSON");
  return net_from_json(j);
}

// Canonical serialization: declaration order for places/transitions, arcs
// sorted lexicographically, only non-zero token counts. Byte-stable.
inline nlohmann::json net_to_json(const PetriNet& net, const Marking& m0) {
  nlohmann::json j;
  j["places"] = net.places;
  auto& ts = j["transitions"] = nlohmann::json::array();
  for (const auto& t : net.transitions)
    ts.push_back({{"id", t.id}, {"label", t.label}});
  auto arcs = net.arcs;
  std::sort(arcs.begin(), arcs.end());
  auto& as = j["arcs"] = nlohmann::json::array();
  for (const auto& [from, to] : arcs) as.push_back({from, to});
  auto& init = j["initial_marking"] = nlohmann::json::object();
  for (size_t p = 0; p < net.places.size(); ++p)
    if (m0.tokens[p] != 0) init[net.places[p]] = m0.tokens[p];
  return j;
}

inline std::string net_to_json_text(const PetriNet& net, const Marking& m0) {
  return net_to_json(net, m0).dump(2) + "\n";
}

}  // namespace wfreach
