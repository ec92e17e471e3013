#pragma once

#include <string>
#include <vector>

#include "ilab/graph.hpp"

namespace corpus {

struct Named {
  std::string name;
  ilab::InterferenceGraph g;
};

// Small graphs used across the suite; n <= max_n.
inline std::vector<Named> graphs(int max_n = 8) {
  std::vector<Named> out;
  for (int n : {4, 6, 8, 10}) {
    if (n > max_n) continue;
    const auto s = std::to_string(n);
    out.push_back({"empty" + s, ilab::empty_graph(n)});
    out.push_back({"path" + s, ilab::path_graph(n)});
    out.push_back({"cycle" + s, ilab::cycle_graph(n)});
    out.push_back({"star" + s, ilab::star_graph(n)});
    out.push_back({"complete" + s, ilab::complete_graph(n)});
  }
  out.push_back({"two_triangles", ilab::two_triangles()});
  return out;
}

}  // namespace corpus
