#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "netcause/errors.hpp"

namespace netcause {

// Undirected simple graph. Canonical storage is the deduplicated edge list
// with i < j; adjacency lists are sorted. Immutable after construction.
struct Graph {
  int n_units = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> adj;
  std::vector<int> degree;
};

Graph build_graph(int n_units, const std::vector<std::pair<int, int>>& edges);

// c_ij = 1 / sqrt(d_i * d_j), aligned with Graph::edges. Both endpoints of
// every stored edge have degree >= 1 by construction; asserted anyway.
std::vector<double> gcn_coefficients(const Graph& g);

// Edge-list text format: one "i j" pair per line, 0-based, whitespace
// separated; lines starting with '#' ignored.
std::vector<std::pair<int, int>> load_edge_list(const std::string& path);
void save_edge_list(const std::string& path, const Graph& g);

enum class Part : std::uint8_t { Train = 0, Valid = 1, Test = 2 };

struct Partition {
  std::vector<std::uint8_t> assignment;  // one Part label per unit
  long cut_edges = 0;
  std::array<int, 3> sizes{0, 0, 0};
};

struct PartitionOptions {
  double balance = 0.2;  // allowed relative deviation from target part sizes
  int restarts = 8;
  int refine_passes = 12;
};

// Seeded BFS region growing from three spread-out roots followed by
// boundary-move refinement; deterministic for a fixed seed.
Partition partition_three_way(const Graph& g, std::array<double, 3> fractions,
                              std::uint64_t seed, PartitionOptions opts = {});

long count_cut_edges(const Graph& g, const std::vector<std::uint8_t>& assignment);

// Subgraph induced by one part: vertices relabeled 0..k-1, cut edges dropped.
// units[local] gives the original unit id. With drop_isolated, units with no
// within-part neighbor are excluded (exposure and aggregation need degree >= 1).
struct Subgraph {
  Graph graph;
  std::vector<int> units;
  int dropped_isolated = 0;
};

Subgraph split_subgraph(const Graph& g, const Partition& p, Part part, bool drop_isolated);

}  // namespace netcause
