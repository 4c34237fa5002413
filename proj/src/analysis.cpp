#include "bagcn/analysis.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bagcn/text.hpp"

namespace bagcn {

std::vector<int> nodes_within_hops(const Graph& g, int start, int hops) {
  if (start < 0 || start >= g.n) {
    throw std::out_of_range("nodes_within_hops: node " + std::to_string(start) +
                            " out of range for n=" + std::to_string(g.n));
  }
  std::vector<int> dist(static_cast<std::size_t>(g.n), -1);
  std::deque<int> queue;
  dist[static_cast<std::size_t>(start)] = 0;
  queue.push_back(start);
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    const int du = dist[static_cast<std::size_t>(u)];
    if (du >= hops) continue;
    for (int v : g.adj[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = du + 1;
        queue.push_back(v);
      }
    }
  }
  std::vector<int> out;
  for (int v = 0; v < g.n; ++v) {
    if (dist[static_cast<std::size_t>(v)] >= 0) out.push_back(v);
  }
  return out;
}

ShortcutSet topk_shortcuts(const Mat& s1, int target, int k, int exclude_hops, const Graph& g) {
  if (target < 0 || target >= g.n) {
    throw std::out_of_range("topk_shortcuts: target " + std::to_string(target) +
                            " out of range for n=" + std::to_string(g.n));
  }
  if (k < 1) throw std::invalid_argument("topk_shortcuts: k must be >= 1");
  if (s1.rows() != g.n || s1.cols() != g.n) {
    throw std::invalid_argument("topk_shortcuts: attention matrix must be n x n");
  }

  std::vector<char> excluded(static_cast<std::size_t>(g.n), 0);
  excluded[static_cast<std::size_t>(target)] = 1;
  if (exclude_hops > 0) {
    for (int v : nodes_within_hops(g, target, exclude_hops)) {
      excluded[static_cast<std::size_t>(v)] = 1;
    }
  }

  ShortcutSet set;
  set.target = target;
  set.k = k;
  for (int j = 0; j < g.n; ++j) {
    if (excluded[static_cast<std::size_t>(j)]) continue;
    const double w = s1(target, j);
    if (w > 0.0) set.entries.push_back({j, w});
  }
  std::sort(set.entries.begin(), set.entries.end(),
            [](const ShortcutEntry& a, const ShortcutEntry& b) {
              if (a.weight != b.weight) return a.weight > b.weight;
              return a.source < b.source;
            });
  if (static_cast<int>(set.entries.size()) > k) set.entries.resize(static_cast<std::size_t>(k));
  return set;
}

ReceptiveFieldStats receptive_field_stats(const Mat& s1, const Graph& g, double eps) {
  if (eps < 0.0) throw std::invalid_argument("receptive_field_stats: eps must be >= 0");
  if (s1.rows() != g.n || s1.cols() != g.n) {
    throw std::invalid_argument("receptive_field_stats: attention matrix must be n x n");
  }
  ReceptiveFieldStats out;
  out.eps = eps;
  out.m.resize(static_cast<std::size_t>(g.n));
  out.m_prime.resize(static_cast<std::size_t>(g.n));
  double sum_m = 0.0, sum_mp = 0.0;
  for (int i = 0; i < g.n; ++i) {
    int mi = 0;
    for (int j = 0; j < g.n; ++j) {
      if (s1(i, j) > eps) ++mi;
    }
    out.m[static_cast<std::size_t>(i)] = mi;
    sum_m += mi;
    const int mp = static_cast<int>(nodes_within_hops(g, i, 2).size());
    out.m_prime[static_cast<std::size_t>(i)] = mp;
    sum_mp += mp;
  }
  out.mean_m = sum_m / static_cast<double>(g.n);
  out.mean_m_prime = sum_mp / static_cast<double>(g.n);
  return out;
}

std::pair<double, double> shortcut_homophily_delta(const Graph& g,
                                                   const std::vector<ShortcutSet>& shortcuts) {
  if (shortcuts.empty()) return {0.0, 0.0};
  double before = 0.0, after = 0.0;
  for (const ShortcutSet& set : shortcuts) {
    if (set.target < 0 || set.target >= g.n) {
      throw std::out_of_range("shortcut_homophily_delta: target out of range");
    }
    before += local_homophily(g, set.target);

    std::set<int> neigh(g.adj[static_cast<std::size_t>(set.target)].begin(),
                        g.adj[static_cast<std::size_t>(set.target)].end());
    for (const ShortcutEntry& e : set.entries) {
      if (e.source != set.target) neigh.insert(e.source);
    }
    if (neigh.empty()) {
      after += 1.0;  // same convention as local_homophily for isolated nodes
      continue;
    }
    int same = 0;
    for (int v : neigh) {
      if (g.labels[static_cast<std::size_t>(v)] ==
          g.labels[static_cast<std::size_t>(set.target)]) {
        ++same;
      }
    }
    after += static_cast<double>(same) / static_cast<double>(neigh.size());
  }
  const double denom = static_cast<double>(shortcuts.size());
  return {before / denom, after / denom};
}

namespace {

// deterministic class palette; cycles past 12 classes
const char* class_color(int cls) {
  static const char* kPalette[] = {"lightskyblue", "lightsalmon", "palegreen",  "khaki",
                                   "plum",         "lightgray",   "aquamarine", "wheat",
                                   "pink",         "lavender",    "peachpuff",  "honeydew"};
  return kPalette[cls % 12];
}

}  // namespace

std::string export_ego_graph(const Graph& g, int target, int hops, const ShortcutSet& shortcuts) {
  if (target < 0 || target >= g.n) {
    throw std::out_of_range("export_ego_graph: target " + std::to_string(target) +
                            " out of range for n=" + std::to_string(g.n));
  }
  if (hops < 1) throw std::invalid_argument("export_ego_graph: hops must be >= 1");

  const std::vector<int> ego = nodes_within_hops(g, target, hops);
  std::set<int> nodes(ego.begin(), ego.end());
  if (!shortcuts.entries.empty()) nodes.insert(shortcuts.target);
  for (const ShortcutEntry& e : shortcuts.entries) nodes.insert(e.source);

  std::ostringstream dot;
  dot << "digraph ego {\n";
  dot << "  node [shape=circle, style=filled];\n";
  for (int v : nodes) {
    dot << "  " << v << " [label=\"" << v << "\", fillcolor=\""
        << class_color(g.labels[static_cast<std::size_t>(v)]) << "\"";
    if (v == target) dot << ", penwidth=2";
    dot << "];\n";
  }
  std::set<int> in_ego(ego.begin(), ego.end());
  for (int u : ego) {
    for (int v : g.adj[static_cast<std::size_t>(u)]) {
      if (u < v && in_ego.count(v)) {
        dot << "  " << u << " -> " << v << " [dir=none];\n";
      }
    }
  }
  for (const ShortcutEntry& e : shortcuts.entries) {
    dot << "  " << e.source << " -> " << shortcuts.target
        << " [style=dashed, color=\"chocolate\", label=\"" << format_double(e.weight) << "\"];\n";
  }
  dot << "}\n";
  return dot.str();
}

}  // namespace bagcn
