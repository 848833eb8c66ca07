#include "netcause/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "netcause/rng.hpp"

namespace netcause {

Graph build_graph(int n_units, const std::vector<std::pair<int, int>>& edges) {
  if (n_units < 0) throw IndexOutOfRangeError("build_graph: negative unit count");
  std::vector<std::pair<int, int>> canon;
  canon.reserve(edges.size());
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n_units || j >= n_units) {
      throw IndexOutOfRangeError("build_graph: edge (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ") out of range for n=" + std::to_string(n_units));
    }
    if (i == j) {
      throw SelfLoopError("build_graph: self-loop at unit " + std::to_string(i));
    }
    canon.emplace_back(std::min(i, j), std::max(i, j));
  }
  std::sort(canon.begin(), canon.end());
  canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

  Graph g;
  g.n_units = n_units;
  g.edges = std::move(canon);
  g.adj.assign(n_units, {});
  g.degree.assign(n_units, 0);
  for (auto [i, j] : g.edges) {
    g.adj[i].push_back(j);
    g.adj[j].push_back(i);
  }
  for (auto& nbrs : g.adj) std::sort(nbrs.begin(), nbrs.end());
  for (int u = 0; u < n_units; ++u) g.degree[u] = static_cast<int>(g.adj[u].size());
  return g;
}

std::vector<double> gcn_coefficients(const Graph& g) {
  std::vector<double> c;
  c.reserve(g.edges.size());
  for (auto [i, j] : g.edges) {
    if (g.degree[i] == 0 || g.degree[j] == 0) {
      throw IsolatedEndpointError("gcn_coefficients: degree-0 endpoint on stored edge");
    }
    c.push_back(1.0 / std::sqrt(static_cast<double>(g.degree[i]) * g.degree[j]));
  }
  return c;
}

std::vector<std::pair<int, int>> load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read edge list: " + path);
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    std::istringstream ss(line);
    long i, j;
    if (!(ss >> i >> j)) {
      throw ParseError("edge list " + path + ": bad line " + std::to_string(lineno));
    }
    edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
  }
  return edges;
}

void save_edge_list(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write edge list: " + path);
  out << "# undirected edges, one \"i j\" per line, 0-based\n";
  for (auto [i, j] : g.edges) out << i << " " << j << "\n";
}

long count_cut_edges(const Graph& g, const std::vector<std::uint8_t>& assignment) {
  long cut = 0;
  for (auto [i, j] : g.edges)
    if (assignment[i] != assignment[j]) ++cut;
  return cut;
}

namespace {

std::vector<int> bfs_distances(const Graph& g, int root) {
  std::vector<int> dist(g.n_units, -1);
  std::deque<int> q{root};
  dist[root] = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (int v : g.adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  return dist;
}

std::array<int, 3> spread_roots(const Graph& g) {
  int r0 = 0;
  for (int u = 1; u < g.n_units; ++u)
    if (g.degree[u] > g.degree[r0]) r0 = u;
  auto d0 = bfs_distances(g, r0);
  auto far_value = [](int d) { return d < 0 ? std::numeric_limits<int>::max() : d; };
  int r1 = -1;
  for (int u = 0; u < g.n_units; ++u) {
    if (u == r0) continue;
    if (r1 < 0 || far_value(d0[u]) > far_value(d0[r1])) r1 = u;
  }
  auto d1 = bfs_distances(g, r1);
  int r2 = -1;
  long best = -1;
  for (int u = 0; u < g.n_units; ++u) {
    if (u == r0 || u == r1) continue;
    long score = std::min<long>(far_value(d0[u]), far_value(d1[u]));
    if (score > best) {
      best = score;
      r2 = u;
    }
  }
  return {r0, r1, r2};
}

struct SizeWindow {
  std::array<int, 3> lo, hi, target;
};

SizeWindow size_window(int n, const std::array<double, 3>& fractions, double balance) {
  SizeWindow w;
  for (int p = 0; p < 3; ++p) {
    double t = fractions[p] * n;
    w.target[p] = std::max(1, static_cast<int>(std::lround(t)));
    w.lo[p] = std::max(1, static_cast<int>(std::floor(t * (1.0 - balance))));
    w.hi[p] = std::max(w.lo[p], static_cast<int>(std::ceil(t * (1.0 + balance))));
  }
  return w;
}

std::vector<std::uint8_t> grow_regions(const Graph& g, const std::array<int, 3>& roots,
                                       const SizeWindow& w, Rng& rng) {
  const int n = g.n_units;
  std::vector<std::uint8_t> label(n, 3);  // 3 = unassigned
  std::array<std::deque<int>, 3> frontier;
  std::array<int, 3> size{0, 0, 0};
  for (int p = 0; p < 3; ++p) {
    int r = roots[p];
    if (label[r] != 3) {
      // duplicate root (tiny graphs); replace by first unassigned unit
      for (int u = 0; u < n; ++u)
        if (label[u] == 3) {
          r = u;
          break;
        }
    }
    label[r] = static_cast<std::uint8_t>(p);
    ++size[p];
    frontier[p].push_back(r);
  }
  int assigned = size[0] + size[1] + size[2];
  while (assigned < n) {
    // the most deficient part (relative to target) claims next
    int pick = -1;
    double best = 2.0;
    for (int p = 0; p < 3; ++p) {
      if (size[p] >= w.hi[p]) continue;
      double fill = static_cast<double>(size[p]) / w.target[p];
      if (fill < best) {
        best = fill;
        pick = p;
      }
    }
    if (pick < 0) {
      // all parts at capacity; dump leftovers into the smallest
      pick = 0;
      for (int p = 1; p < 3; ++p)
        if (size[p] < size[pick]) pick = p;
    }
    int claimed = -1;
    while (!frontier[pick].empty() && claimed < 0) {
      int u = frontier[pick].front();
      std::vector<int> nbrs = g.adj[u];
      rng.shuffle(nbrs);
      for (int v : nbrs)
        if (label[v] == 3) {
          claimed = v;
          break;
        }
      if (claimed < 0) frontier[pick].pop_front();
    }
    if (claimed < 0) {
      // frontier exhausted (disconnected remainder): seed with lowest unassigned
      for (int u = 0; u < n; ++u)
        if (label[u] == 3) {
          claimed = u;
          break;
        }
    }
    label[claimed] = static_cast<std::uint8_t>(pick);
    ++size[pick];
    ++assigned;
    frontier[pick].push_back(claimed);
  }
  return label;
}

// Greedy boundary moves plus, on small graphs, label swaps of unit pairs.
void refine(const Graph& g, std::vector<std::uint8_t>& label, const SizeWindow& w, int passes) {
  const int n = g.n_units;
  std::array<int, 3> size{0, 0, 0};
  for (auto l : label) ++size[l];
  auto cut_delta_move = [&](int u, int to) {
    int from = label[u];
    int d = 0;
    for (int v : g.adj[u]) {
      if (label[v] == from) ++d;       // edge becomes cut
      else if (label[v] == to) --d;    // edge becomes internal
    }
    return d;
  };
  for (int pass = 0; pass < passes; ++pass) {
    bool changed = false;
    for (int u = 0; u < n; ++u) {
      int from = label[u];
      int best_to = -1, best_d = 0;
      for (int to = 0; to < 3; ++to) {
        if (to == from) continue;
        if (size[from] - 1 < w.lo[from] || size[to] + 1 > w.hi[to]) continue;
        int d = cut_delta_move(u, to);
        if (d < best_d) {
          best_d = d;
          best_to = to;
        }
      }
      if (best_to >= 0) {
        --size[from];
        ++size[best_to];
        label[u] = static_cast<std::uint8_t>(best_to);
        changed = true;
      }
    }
    if (n <= 64) {
      for (int u = 0; u < n; ++u)
        for (int v2 = u + 1; v2 < n; ++v2) {
          if (label[u] == label[v2]) continue;
          int du = cut_delta_move(u, label[v2]);
          std::uint8_t lu = label[u];
          label[u] = label[v2];
          int dv = cut_delta_move(v2, lu);
          label[u] = lu;
          int adjacent = 0;
          for (int x : g.adj[u])
            if (x == v2) adjacent = 1;
          // swapping adjacent units double-counts their shared edge twice
          if (du + dv + 2 * adjacent < 0) {
            std::swap(label[u], label[v2]);
            changed = true;
          }
        }
    }
    if (!changed) break;
  }
}

}  // namespace

Partition partition_three_way(const Graph& g, std::array<double, 3> fractions,
                              std::uint64_t seed, PartitionOptions opts) {
  if (g.n_units < 3) throw TooFewUnitsError("partition_three_way: need at least 3 units");
  double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || fractions[0] <= 0 || fractions[1] <= 0 || fractions[2] <= 0) {
    throw Error("partition_three_way: fractions must be positive and sum to 1");
  }
  SizeWindow w = size_window(g.n_units, fractions, opts.balance);

  Partition best;
  bool have_best = false;
  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(restart)));
    std::array<int, 3> roots;
    if (restart == 0) {
      roots = spread_roots(g);
    } else {
      roots = {rng.uniform_int(0, g.n_units - 1), rng.uniform_int(0, g.n_units - 1),
               rng.uniform_int(0, g.n_units - 1)};
    }
    auto label = grow_regions(g, roots, w, rng);
    refine(g, label, w, opts.refine_passes);
    long cut = count_cut_edges(g, label);
    if (!have_best || cut < best.cut_edges) {
      best.assignment = label;
      best.cut_edges = cut;
      have_best = true;
    }
  }
  best.sizes = {0, 0, 0};
  for (auto l : best.assignment) ++best.sizes[l];
  for (int p = 0; p < 3; ++p) {
    if (best.sizes[p] == 0) throw Error("partition_three_way: empty part after refinement");
  }
  return best;
}

Subgraph split_subgraph(const Graph& g, const Partition& p, Part part, bool drop_isolated) {
  std::uint8_t want = static_cast<std::uint8_t>(part);
  std::vector<int> members;
  for (int u = 0; u < g.n_units; ++u)
    if (p.assignment[u] == want) members.push_back(u);

  std::vector<int> local(g.n_units, -1);
  Subgraph out;
  if (drop_isolated) {
    std::vector<int> kept;
    for (int u : members) {
      bool has_nbr = false;
      for (int v : g.adj[u])
        if (p.assignment[v] == want) {
          has_nbr = true;
          break;
        }
      if (has_nbr) kept.push_back(u);
      else ++out.dropped_isolated;
    }
    members = std::move(kept);
  }
  for (size_t i = 0; i < members.size(); ++i) local[members[i]] = static_cast<int>(i);
  std::vector<std::pair<int, int>> edges;
  for (auto [i, j] : g.edges)
    if (local[i] >= 0 && local[j] >= 0) edges.emplace_back(local[i], local[j]);
  out.graph = build_graph(static_cast<int>(members.size()), edges);
  out.units = std::move(members);
  return out;
}

}  // namespace netcause
