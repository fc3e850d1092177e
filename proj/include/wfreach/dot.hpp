#pragma once

#include <string>

#include "wfreach/bsr.hpp"
#include "wfreach/engine.hpp"
#include "wfreach/la.hpp"

namespace wfreach {

namespace dot_detail {

inline std::string escape(const std::string& s, size_t width) {
  std::string text = s;
  if (width > 0 && text.size() > width) text = text.substr(0, width) + "...";
  std::string out;
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace dot_detail

// Tree dump with stable BFS node ids; labels carry both level formulas,
// truncated at `width` characters (0 = no truncation).
inline std::string tree_to_dot(const SymbolicTree& tree,
                               const TwoLevelSystem& sys, size_t width = 60) {
  std::string out = "digraph symbolic_tree {\n  node [shape=box, fontsize=10];\n";
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    std::string label = "n" + std::to_string(i) + " d" + std::to_string(n.depth);
    label += "\\nvas: " +
             dot_detail::escape(la_render(n.vas_label, sys.vas.var_names), width);
    label += "\\npm: " +
             dot_detail::escape(render_bsr(n.pm_label, sys.policy), width);
    out += "  n" + std::to_string(i) + " [label=\"" + label + "\"];\n";
  }
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.parent < 0) continue;
    out += "  n" + std::to_string(n.parent) + " -> n" + std::to_string(i) +
           " [label=\"" +
           dot_detail::escape(sys.net.transitions[n.incoming].id, width) +
           "\"];\n";
  }
  out += "}\n";
  return out;
}

}  // namespace wfreach
