#include "ilab/graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "ilab/rng.hpp"

namespace ilab {

bool InterferenceGraph::adjacent(int i, int j) const {
  const auto& a = adj_[i];
  return std::binary_search(a.begin(), a.end(), j);
}

std::vector<int> InterferenceGraph::degrees() const {
  std::vector<int> d(adj_.size());
  for (std::size_t i = 0; i < adj_.size(); ++i) d[i] = static_cast<int>(adj_[i].size());
  return d;
}

std::vector<std::pair<int, int>> InterferenceGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(edges_));
  for (int i = 0; i < size(); ++i) {
    for (int j : adj_[i]) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

InterferenceGraph from_edge_list(int n, const std::vector<std::pair<int, int>>& edges) {
  if (n < 0) throw std::invalid_argument("graph: negative unit count");
  InterferenceGraph g;
  g.adj_.assign(static_cast<std::size_t>(n), {});
  for (std::size_t k = 0; k < edges.size(); ++k) {
    auto [a, b] = edges[k];
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw std::invalid_argument("graph: edge " + std::to_string(k) + " (" + std::to_string(a) +
                                  "," + std::to_string(b) + ") has endpoint outside [0," +
                                  std::to_string(n) + ")");
    }
    if (a == b) {
      throw std::invalid_argument("graph: edge " + std::to_string(k) + " is a self-loop on unit " +
                                  std::to_string(a));
    }
    g.adj_[a].push_back(b);
    g.adj_[b].push_back(a);
  }
  long twice = 0;
  for (auto& nb : g.adj_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    twice += static_cast<long>(nb.size());
  }
  g.edges_ = twice / 2;
  return g;
}

std::vector<int> neighborhood(const InterferenceGraph& g, int i, int hops) {
  if (i < 0 || i >= g.size()) throw std::out_of_range("neighborhood: unit out of range");
  if (hops < 1) throw std::invalid_argument("neighborhood: hops must be >= 1");
  std::vector<int> dist(static_cast<std::size_t>(g.size()), -1);
  std::queue<int> q;
  dist[i] = 0;
  q.push(i);
  std::vector<int> out;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    if (dist[u] == hops) continue;
    for (int v : g.neighbors(u)) {
      if (dist[v] >= 0) continue;
      dist[v] = dist[u] + 1;
      out.push_back(v);
      q.push(v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

InterferenceGraph erdos_renyi(const ErdosRenyi& m, int n, Engine& eng) {
  if (!(m.p >= 0.0 && m.p <= 1.0)) throw std::invalid_argument("erdos_renyi: p must lie in [0,1]");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (uniform01(eng) < m.p) edges.emplace_back(i, j);
    }
  }
  return from_edge_list(n, edges);
}

// Linear preferential attachment: seed clique on min_degree units, then each
// new unit attaches to min_degree distinct existing units chosen with
// probability proportional to degree + attractiveness.
InterferenceGraph barabasi_albert(const BarabasiAlbert& m, int n, Engine& eng) {
  if (m.min_degree < 1) throw std::invalid_argument("barabasi_albert: min_degree must be >= 1");
  if (!(m.attractiveness > 0.0)) {
    throw std::invalid_argument("barabasi_albert: attractiveness must be > 0");
  }
  if (n < m.min_degree) throw std::invalid_argument("barabasi_albert: n smaller than min_degree");
  std::vector<std::pair<int, int>> edges;
  std::vector<double> weight(static_cast<std::size_t>(n), 0.0);
  const int seed = m.min_degree;
  for (int i = 0; i < seed; ++i) {
    weight[i] = m.attractiveness + (seed - 1);
    for (int j = i + 1; j < seed; ++j) edges.emplace_back(i, j);
  }
  std::vector<int> targets;
  for (int v = seed; v < n; ++v) {
    targets.clear();
    double total = 0.0;
    for (int u = 0; u < v; ++u) total += weight[u];
    while (static_cast<int>(targets.size()) < m.min_degree) {
      double r = uniform01(eng) * total;
      int pick = v - 1;
      for (int u = 0; u < v; ++u) {
        r -= weight[u];
        if (r < 0.0) {
          pick = u;
          break;
        }
      }
      if (std::find(targets.begin(), targets.end(), pick) != targets.end()) continue;
      targets.push_back(pick);
    }
    for (int u : targets) {
      edges.emplace_back(u, v);
      weight[u] += 1.0;
    }
    weight[v] = m.attractiveness + m.min_degree;
  }
  return from_edge_list(n, edges);
}

// Watts-Strogatz ring lattice; each lattice edge (i, i+k) has its far endpoint
// rewired with probability rewire_p to a uniform unit, avoiding loops and
// duplicate edges.
InterferenceGraph small_world(const SmallWorld& m, int n, Engine& eng) {
  if (m.neighborhood_size < 1) {
    throw std::invalid_argument("small_world: neighborhood_size must be >= 1");
  }
  if (!(m.rewire_p >= 0.0 && m.rewire_p <= 1.0)) {
    throw std::invalid_argument("small_world: rewire_p must lie in [0,1]");
  }
  if (n < 2 * m.neighborhood_size + 1) {
    throw std::invalid_argument("small_world: n must exceed 2 * neighborhood_size");
  }
  std::vector<std::vector<char>> has(static_cast<std::size_t>(n), std::vector<char>(n, 0));
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int k = 1; k <= m.neighborhood_size; ++k) {
      int j = (i + k) % n;
      edges.emplace_back(i, j);
      has[i][j] = has[j][i] = 1;
    }
  }
  for (auto& [a, b] : edges) {
    if (uniform01(eng) >= m.rewire_p) continue;
    int c = static_cast<int>(uniform_index(eng, static_cast<std::size_t>(n)));
    if (c == a || has[a][c]) continue;
    has[a][b] = has[b][a] = 0;
    has[a][c] = has[c][a] = 1;
    b = c;
  }
  return from_edge_list(n, edges);
}

}  // namespace

InterferenceGraph generate_graph(const GraphModel& model, int n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("generate_graph: negative unit count");
  Engine eng = make_engine(seed, stream_id("graph"));
  return std::visit(
      [&](const auto& m) -> InterferenceGraph {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ErdosRenyi>) return erdos_renyi(m, n, eng);
        if constexpr (std::is_same_v<T, BarabasiAlbert>) return barabasi_albert(m, n, eng);
        if constexpr (std::is_same_v<T, SmallWorld>) return small_world(m, n, eng);
      },
      model);
}

std::string describe(const GraphModel& model) {
  std::ostringstream os;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ErdosRenyi>) os << "erdos_renyi(p=" << m.p << ")";
        if constexpr (std::is_same_v<T, BarabasiAlbert>) {
          os << "barabasi_albert(min_degree=" << m.min_degree << ",attractiveness=" << m.attractiveness
             << ")";
        }
        if constexpr (std::is_same_v<T, SmallWorld>) {
          os << "small_world(neighborhood_size=" << m.neighborhood_size << ",rewire_p=" << m.rewire_p
             << ")";
        }
      },
      model);
  return os.str();
}

InterferenceGraph read_edge_list(std::istream& in) {
  long n = 0, m = 0;
  if (!(in >> n >> m) || n < 0 || m < 0) {
    throw std::invalid_argument("edge list: expected header 'n m'");
  }
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long k = 0; k < m; ++k) {
    long a = 0, b = 0;
    if (!(in >> a >> b)) {
      throw std::invalid_argument("edge list: expected " + std::to_string(m) + " edges, read " +
                                  std::to_string(k));
    }
    edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
  }
  return from_edge_list(static_cast<int>(n), edges);
}

InterferenceGraph read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list: " + path);
  return read_edge_list(in);
}

void write_edge_list(const InterferenceGraph& g, std::ostream& out) {
  out << g.size() << ' ' << g.edge_count() << '\n';
  for (auto [a, b] : g.edges()) out << a << ' ' << b << '\n';
}

InterferenceGraph empty_graph(int n) { return from_edge_list(n, {}); }

InterferenceGraph path_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return from_edge_list(n, e);
}

InterferenceGraph cycle_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  if (n >= 3) e.emplace_back(n - 1, 0);
  return from_edge_list(n, e);
}

InterferenceGraph star_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < n; ++i) e.emplace_back(0, i);
  return from_edge_list(n, e);
}

InterferenceGraph complete_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return from_edge_list(n, e);
}

InterferenceGraph two_triangles() {
  return from_edge_list(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
}

}  // namespace ilab
