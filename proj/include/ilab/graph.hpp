#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ilab {

// Fixed symmetric, unweighted interference graph. Immutable after construction.
class InterferenceGraph {
 public:
  InterferenceGraph() = default;

  int size() const { return static_cast<int>(adj_.size()); }
  int degree(int i) const { return static_cast<int>(adj_[i].size()); }
  long edge_count() const { return edges_; }
  // Sorted neighbor list of unit i.
  const std::vector<int>& neighbors(int i) const { return adj_[i]; }
  bool adjacent(int i, int j) const;
  std::vector<int> degrees() const;
  std::vector<std::pair<int, int>> edges() const;

  friend InterferenceGraph from_edge_list(int n, const std::vector<std::pair<int, int>>& edges);

 private:
  std::vector<std::vector<int>> adj_;
  long edges_ = 0;
};

// Builds the graph; duplicate and reversed edges collapse. Throws
// std::invalid_argument naming the offending edge index for out-of-range
// endpoints or self-loops.
InterferenceGraph from_edge_list(int n, const std::vector<std::pair<int, int>>& edges);

// All j != i within `hops` steps of i, sorted.
std::vector<int> neighborhood(const InterferenceGraph& g, int i, int hops);

struct ErdosRenyi {
  double p;
};
struct BarabasiAlbert {
  int min_degree = 2;
  double attractiveness = 0.1;
};
struct SmallWorld {
  int neighborhood_size = 1;
  double rewire_p = 0.05;
};
using GraphModel = std::variant<ErdosRenyi, BarabasiAlbert, SmallWorld>;

InterferenceGraph generate_graph(const GraphModel& model, int n, std::uint64_t seed);

std::string describe(const GraphModel& model);

// Edge-list text: first line "n m", then one "i j" pair per line.
InterferenceGraph read_edge_list(std::istream& in);
InterferenceGraph read_edge_list_file(const std::string& path);
void write_edge_list(const InterferenceGraph& g, std::ostream& out);

// Small named graphs.
InterferenceGraph empty_graph(int n);
InterferenceGraph path_graph(int n);
InterferenceGraph cycle_graph(int n);
InterferenceGraph star_graph(int n);
InterferenceGraph complete_graph(int n);
// Two disjoint triangles {0,1,2} and {3,4,5}.
InterferenceGraph two_triangles();

}  // namespace ilab
