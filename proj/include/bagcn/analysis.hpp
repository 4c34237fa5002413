#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bagcn/graph.hpp"

namespace bagcn {

// Strongest learned dependencies of one target node, read off a row of the
// attention matrix. Analysis-only overlay: the training graph is never
// mutated by anything in this module.
struct ShortcutEntry {
  int source = 0;
  double weight = 0.0;
};

struct ShortcutSet {
  int target = 0;
  int k = 0;  // requested count; entries may be fewer after exclusions
  std::vector<ShortcutEntry> entries;  // weight descending, ties by lower id
};

// Nodes reachable from `start` within `hops` edges (includes `start`),
// ascending order. hops <= 0 returns just {start}.
std::vector<int> nodes_within_hops(const Graph& g, int start, int hops);

// Top-k sources for `target` by attention weight, excluding the target
// itself, every node within exclude_hops of it, and nonpositive weights.
ShortcutSet topk_shortcuts(const Mat& s1, int target, int k, int exclude_hops, const Graph& g);

struct ReceptiveFieldStats {
  std::vector<int> m;        // per node: attention entries above eps
  std::vector<int> m_prime;  // per node: 2-hop neighborhood size, self included
  double mean_m = 0.0;
  double mean_m_prime = 0.0;
  double eps = 0.0;
};

// Softmax rows are never exactly zero, so effective support needs a cutoff;
// the default sits one order of magnitude below uniform mass.
inline double default_support_eps(int n) { return 1.0 / (10.0 * static_cast<double>(n)); }

ReceptiveFieldStats receptive_field_stats(const Mat& s1, const Graph& g, double eps);

// Mean local homophily over the shortcut targets, before and after counting
// each set's sources as additional neighbors of its target.
std::pair<double, double> shortcut_homophily_delta(const Graph& g,
                                                   const std::vector<ShortcutSet>& shortcuts);

// DOT text of the closed `hops`-neighborhood of `target`: graph edges solid
// and undirected, shortcut edges dashed source->target in a contrasting
// color, nodes filled by class. Byte-stable for identical inputs.
std::string export_ego_graph(const Graph& g, int target, int hops, const ShortcutSet& shortcuts);

}  // namespace bagcn
