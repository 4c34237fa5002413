#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bagcn/sparse.hpp"

namespace bagcn {

struct SplitMasks {
  std::vector<int> train;  // nonempty, pairwise disjoint with val/test
  std::vector<int> val;
  std::vector<int> test;
};

// Immutable node-attributed undirected graph. Edges are stored deduplicated
// with u < v and no self-loops; self-loops enter only via normalization.
struct Graph {
  int n = 0;
  int num_classes = 0;
  std::string name;
  std::vector<std::pair<int, int>> edges;
  Mat features;             // n x f
  std::vector<int> labels;  // values in [0, num_classes)
  SplitMasks masks;
  std::vector<std::vector<int>> adj;  // sorted neighbor lists (no self-loops)

  int feature_dim() const { return static_cast<int>(features.cols()); }

  // Validates every structural invariant; throws with a description.
  void check() const;

  // Rebuilds `adj` from `edges`; called by every constructor path.
  void build_adjacency();
};

struct SyntheticSpec {
  int clusters = 4;
  int nodes_per_cluster = 25;
  int classes = 2;
  int feature_dim = 16;
  double intra_edge_prob = 0.3;
  double feature_noise = 0.5;
  std::uint64_t seed = 0;
};

// Bundle directory layout:
//   meta.json     {"n":int, "f":int, "c":int, "name":str}
//   edges.tsv     one "u<TAB>v" per line, u < v, 0-indexed
//   features.tsv  n lines of f tab-separated decimal floats
//   labels.tsv    n lines of one integer in [0, c)
//   splits.json   {"train":[...], "val":[...], "test":[...]}
// All files UTF-8 with LF line endings. save_bundle emits canonical
// shortest-round-trip floats, so save(load(p)) reproduces its own output
// byte for byte.
Graph load_bundle(const std::string& path);
void save_bundle(const Graph& g, const std::string& path);

// Symmetric normalization with self-loops: entry (i,j) = 1/sqrt(deg_i*deg_j)
// wherever i=j or {i,j} is an edge, with deg counting the self-loop.
SparseMatrix normalize_adjacency(const Graph& g);

// Exactly per_class training nodes per class, then val/test sampled from the
// remainder without replacement. Deterministic per seed.
SplitMasks make_split(const Graph& g, int per_class, int val_size, int test_size,
                      std::uint64_t seed);

// Disconnected same-class clusters with prototype-plus-noise features.
// Cluster k gets class k % classes; the first `classes` clusters are the
// anchors: their nodes form train/val, every other node is test. That split
// realizes the "labels live in one cluster per class" setting the synthetic
// exists for; pass-through of make_split remains available for custom splits.
Graph gen_synthetic_clusters(const SyntheticSpec& spec);

// Fraction of 1-hop neighbors sharing the node's label; 1.0 for isolated
// nodes (vacuously homophilous; keeps means well-defined on sparse graphs).
double local_homophily(const Graph& g, int node);

// Scales each feature row to unit L1 mass (the usual prep for bag-of-words
// features); all-zero rows stay zero.
void l1_normalize_rows(Mat& features);

}  // namespace bagcn
