#include "bagcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <unordered_set>

#include "bagcn/rng.hpp"
#include "bagcn/text.hpp"

namespace bagcn {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Magnitude of the per-class one-hot feature prototypes used by the
// synthetic generator. With feature_noise around 0.5 this keeps single-node
// features only weakly class-informative, which is the regime the
// disconnected-cluster experiment is about.
constexpr double kPrototypeScale = 1.0;

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::string> lines;
  size_t start = 0;
  while (start <= content.size()) {
    size_t pos = content.find('\n', start);
    if (pos == std::string::npos) {
      if (start < content.size()) lines.push_back(content.substr(start));
      break;
    }
    std::string line = content.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = pos + 1;
  }
  return lines;
}

ordered_json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file " + path);
  try {
    return ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<int> json_int_array(const ordered_json& j, const std::string& key,
                                const std::string& where) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw std::runtime_error(where + ": missing array '" + key + "'");
  }
  std::vector<int> out;
  out.reserve(j[key].size());
  for (const auto& v : j[key]) {
    if (!v.is_number_integer()) throw std::runtime_error(where + ": non-integer entry in '" + key + "'");
    out.push_back(v.get<int>());
  }
  return out;
}

void shuffle_in_place(std::vector<int>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_u64() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

void Graph::build_adjacency() {
  adj.assign(n, {});
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
}

void Graph::check() const {
  if (n < 0) throw std::invalid_argument("graph: negative node count");
  if (num_classes < 1) throw std::invalid_argument("graph: need at least one class");
  if (features.rows() != n) {
    throw std::invalid_argument("graph: features have " + std::to_string(features.rows()) +
                                " rows, expected " + std::to_string(n));
  }
  if (!features.allFinite()) throw std::invalid_argument("graph: non-finite feature");
  if (labels.size() != static_cast<size_t>(n)) {
    throw std::invalid_argument("graph: label count mismatch");
  }
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw std::invalid_argument("graph: label out of range at node " + std::to_string(i));
    }
  }
  std::unordered_set<std::int64_t> seen;
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) throw std::invalid_argument("graph: edge endpoint out of range");
    if (u >= v) throw std::invalid_argument("graph: edge must satisfy u < v (no self-loops)");
    if (!seen.insert(static_cast<std::int64_t>(u) * n + v).second) {
      throw std::invalid_argument("graph: duplicate edge " + std::to_string(u) + "-" + std::to_string(v));
    }
  }
  auto check_mask = [&](const std::vector<int>& m, const char* name) {
    for (int i : m) {
      if (i < 0 || i >= n) {
        throw std::invalid_argument(std::string("graph: ") + name + " mask index out of range");
      }
    }
  };
  check_mask(masks.train, "train");
  check_mask(masks.val, "val");
  check_mask(masks.test, "test");
  if (masks.train.empty()) throw std::invalid_argument("graph: train mask is empty");
  std::unordered_set<int> used(masks.train.begin(), masks.train.end());
  for (int i : masks.val) {
    if (!used.insert(i).second) throw std::invalid_argument("graph: split masks overlap at node " + std::to_string(i));
  }
  for (int i : masks.test) {
    if (!used.insert(i).second) throw std::invalid_argument("graph: split masks overlap at node " + std::to_string(i));
  }
}

Graph load_bundle(const std::string& path) {
  Graph g;
  const std::string meta_path = path + "/meta.json";
  ordered_json meta = read_json(meta_path);
  for (const char* key : {"n", "f", "c"}) {
    if (!meta.contains(key) || !meta[key].is_number_integer()) {
      throw std::runtime_error(meta_path + ": missing integer field '" + key + "'");
    }
  }
  g.n = meta["n"].get<int>();
  const int f = meta["f"].get<int>();
  g.num_classes = meta["c"].get<int>();
  g.name = meta.value("name", std::string("unnamed"));
  if (g.n < 0 || f < 0) throw std::runtime_error(meta_path + ": negative dimension");

  const std::string edges_path = path + "/edges.tsv";
  std::unordered_set<std::int64_t> seen;
  int line_no = 0;
  for (const std::string& line : read_lines(edges_path)) {
    ++line_no;
    const std::string where = edges_path + ":" + std::to_string(line_no);
    auto fields = split(line, '\t');
    if (fields.size() != 2) throw std::runtime_error(where + ": expected 'u<TAB>v'");
    long u = parse_long(fields[0], where);
    long v = parse_long(fields[1], where);
    if (u < 0 || v < 0 || u >= g.n || v >= g.n) throw std::runtime_error(where + ": node index out of range");
    if (u >= v) throw std::runtime_error(where + ": edges must satisfy u < v (self-loops are not stored)");
    if (!seen.insert(u * static_cast<std::int64_t>(g.n) + v).second) {
      throw std::runtime_error(where + ": duplicate edge");
    }
    g.edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }

  const std::string feat_path = path + "/features.tsv";
  auto feat_lines = read_lines(feat_path);
  if (feat_lines.size() != static_cast<size_t>(g.n)) {
    throw std::runtime_error(feat_path + ": has " + std::to_string(feat_lines.size()) +
                             " rows, meta.json says n=" + std::to_string(g.n));
  }
  g.features.resize(g.n, f);
  for (int i = 0; i < g.n; ++i) {
    const std::string where = feat_path + ":" + std::to_string(i + 1);
    auto fields = split(feat_lines[i], '\t');
    if (fields.size() != static_cast<size_t>(f)) {
      throw std::runtime_error(where + ": expected " + std::to_string(f) + " columns, got " +
                               std::to_string(fields.size()));
    }
    for (int j = 0; j < f; ++j) {
      double v = parse_double(fields[j], where);
      if (!std::isfinite(v)) throw std::runtime_error(where + ": non-finite feature");
      g.features(i, j) = v;
    }
  }

  const std::string label_path = path + "/labels.tsv";
  auto label_lines = read_lines(label_path);
  if (label_lines.size() != static_cast<size_t>(g.n)) {
    throw std::runtime_error(label_path + ": has " + std::to_string(label_lines.size()) +
                             " rows, meta.json says n=" + std::to_string(g.n));
  }
  g.labels.resize(g.n);
  for (int i = 0; i < g.n; ++i) {
    const std::string where = label_path + ":" + std::to_string(i + 1);
    long y = parse_long(label_lines[i], where);
    if (y < 0 || y >= g.num_classes) throw std::runtime_error(where + ": label out of range");
    g.labels[i] = static_cast<int>(y);
  }

  const std::string splits_path = path + "/splits.json";
  ordered_json splits = read_json(splits_path);
  g.masks.train = json_int_array(splits, "train", splits_path);
  g.masks.val = json_int_array(splits, "val", splits_path);
  g.masks.test = json_int_array(splits, "test", splits_path);

  g.check();
  g.build_adjacency();
  return g;
}

void save_bundle(const Graph& g, const std::string& path) {
  g.check();
  fs::create_directories(path);

  ordered_json meta;
  meta["n"] = g.n;
  meta["f"] = g.feature_dim();
  meta["c"] = g.num_classes;
  meta["name"] = g.name;
  write_file(path + "/meta.json", meta.dump(2) + "\n");

  auto sorted_edges = g.edges;
  std::sort(sorted_edges.begin(), sorted_edges.end());
  std::string edges_text;
  for (const auto& [u, v] : sorted_edges) {
    edges_text += std::to_string(u);
    edges_text += '\t';
    edges_text += std::to_string(v);
    edges_text += '\n';
  }
  write_file(path + "/edges.tsv", edges_text);

  std::string feat_text;
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.feature_dim(); ++j) {
      if (j) feat_text += '\t';
      feat_text += format_double(g.features(i, j));
    }
    feat_text += '\n';
  }
  write_file(path + "/features.tsv", feat_text);

  std::string label_text;
  for (int i = 0; i < g.n; ++i) {
    label_text += std::to_string(g.labels[i]);
    label_text += '\n';
  }
  write_file(path + "/labels.tsv", label_text);

  ordered_json splits;
  splits["train"] = g.masks.train;
  splits["val"] = g.masks.val;
  splits["test"] = g.masks.test;
  write_file(path + "/splits.json", splits.dump(2) + "\n");
}

SparseMatrix normalize_adjacency(const Graph& g) {
  SparseMatrix s;
  s.n = g.n;
  s.row_ptr.assign(static_cast<size_t>(g.n) + 1, 0);
  std::vector<double> deg(g.n);
  for (int i = 0; i < g.n; ++i) deg[i] = 1.0 + static_cast<double>(g.adj[i].size());
  for (int i = 0; i < g.n; ++i) {
    s.row_ptr[i + 1] = s.row_ptr[i] + static_cast<std::int64_t>(g.adj[i].size()) + 1;
  }
  s.col_idx.resize(s.row_ptr[g.n]);
  s.values.resize(s.row_ptr[g.n]);
  for (int i = 0; i < g.n; ++i) {
    std::int64_t k = s.row_ptr[i];
    bool self_written = false;
    for (int j : g.adj[i]) {
      if (!self_written && j > i) {
        s.col_idx[k] = i;
        s.values[k] = 1.0 / deg[i];
        ++k;
        self_written = true;
      }
      s.col_idx[k] = j;
      s.values[k] = 1.0 / std::sqrt(deg[i] * deg[j]);
      ++k;
    }
    if (!self_written) {
      s.col_idx[k] = i;
      s.values[k] = 1.0 / deg[i];
    }
  }
  return s;
}

SplitMasks make_split(const Graph& g, int per_class, int val_size, int test_size,
                      std::uint64_t seed) {
  if (per_class < 1) throw std::invalid_argument("make_split: per_class must be >= 1");
  if (val_size < 0 || test_size < 0) throw std::invalid_argument("make_split: negative split size");
  Rng rng(mix_seed(seed, kStreamSplit));

  std::vector<std::vector<int>> members(g.num_classes);
  for (int i = 0; i < g.n; ++i) members[g.labels[i]].push_back(i);

  SplitMasks m;
  for (int c = 0; c < g.num_classes; ++c) {
    if (static_cast<int>(members[c].size()) < per_class) {
      throw std::invalid_argument("make_split: class " + std::to_string(c) + " has only " +
                                  std::to_string(members[c].size()) + " nodes, need " +
                                  std::to_string(per_class));
    }
    shuffle_in_place(members[c], rng);
    m.train.insert(m.train.end(), members[c].begin(), members[c].begin() + per_class);
  }
  std::sort(m.train.begin(), m.train.end());

  std::unordered_set<int> taken(m.train.begin(), m.train.end());
  std::vector<int> rest;
  rest.reserve(g.n);
  for (int i = 0; i < g.n; ++i) {
    if (!taken.count(i)) rest.push_back(i);
  }
  if (static_cast<int>(rest.size()) < val_size + test_size) {
    throw std::invalid_argument("make_split: not enough nodes left for val+test (" +
                                std::to_string(rest.size()) + " < " +
                                std::to_string(val_size + test_size) + ")");
  }
  shuffle_in_place(rest, rng);
  m.val.assign(rest.begin(), rest.begin() + val_size);
  m.test.assign(rest.begin() + val_size, rest.begin() + val_size + test_size);
  std::sort(m.val.begin(), m.val.end());
  std::sort(m.test.begin(), m.test.end());
  return m;
}

Graph gen_synthetic_clusters(const SyntheticSpec& spec) {
  if (spec.clusters < 1 || spec.nodes_per_cluster < 1 || spec.classes < 1) {
    throw std::invalid_argument("gen_synthetic_clusters: counts must be positive");
  }
  if (spec.clusters % spec.classes != 0) {
    throw std::invalid_argument("gen_synthetic_clusters: clusters must be a multiple of classes");
  }
  if (spec.intra_edge_prob <= 0.0 || spec.intra_edge_prob > 1.0) {
    throw std::invalid_argument("gen_synthetic_clusters: intra_edge_prob must be in (0,1]");
  }
  if (spec.feature_noise < 0.0) {
    throw std::invalid_argument("gen_synthetic_clusters: feature_noise must be >= 0");
  }
  if (spec.feature_dim < spec.classes) {
    throw std::invalid_argument("gen_synthetic_clusters: feature_dim must be >= classes (one-hot prototypes)");
  }

  Rng rng(mix_seed(spec.seed, kStreamSynth));
  Graph g;
  g.n = spec.clusters * spec.nodes_per_cluster;
  g.num_classes = spec.classes;
  g.name = "synth-" + std::to_string(spec.clusters) + "x" + std::to_string(spec.nodes_per_cluster);

  g.labels.resize(g.n);
  for (int v = 0; v < g.n; ++v) g.labels[v] = (v / spec.nodes_per_cluster) % spec.classes;

  // intra-cluster Erdos-Renyi edges; clusters stay mutually disconnected
  for (int k = 0; k < spec.clusters; ++k) {
    const int base = k * spec.nodes_per_cluster;
    for (int i = 0; i < spec.nodes_per_cluster; ++i) {
      for (int j = i + 1; j < spec.nodes_per_cluster; ++j) {
        if (rng.uniform() < spec.intra_edge_prob) g.edges.emplace_back(base + i, base + j);
      }
    }
  }

  g.features = Mat::Zero(g.n, spec.feature_dim);
  for (int v = 0; v < g.n; ++v) {
    g.features(v, g.labels[v]) = kPrototypeScale;
    if (spec.feature_noise > 0.0) {
      for (int j = 0; j < spec.feature_dim; ++j) {
        g.features(v, j) += spec.feature_noise * rng.normal();
      }
    }
  }

  // anchored split: labels only inside the first cluster of each class
  for (int c = 0; c < spec.classes; ++c) {
    const int base = c * spec.nodes_per_cluster;
    const int n_train = (spec.nodes_per_cluster + 1) / 2;
    for (int i = 0; i < spec.nodes_per_cluster; ++i) {
      (i < n_train ? g.masks.train : g.masks.val).push_back(base + i);
    }
  }
  for (int v = spec.classes * spec.nodes_per_cluster; v < g.n; ++v) g.masks.test.push_back(v);
  std::sort(g.masks.train.begin(), g.masks.train.end());
  std::sort(g.masks.val.begin(), g.masks.val.end());

  g.check();
  g.build_adjacency();
  return g;
}

double local_homophily(const Graph& g, int node) {
  if (node < 0 || node >= g.n) throw std::invalid_argument("local_homophily: node out of range");
  const auto& nbrs = g.adj[node];
  if (nbrs.empty()) return 1.0;  // vacuous: an isolated node disagrees with nobody
  int same = 0;
  for (int j : nbrs) same += (g.labels[j] == g.labels[node]);
  return static_cast<double>(same) / static_cast<double>(nbrs.size());
}

void l1_normalize_rows(Mat& features) {
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double s = features.row(i).array().abs().sum();
    if (s > 0.0) features.row(i) /= s;
  }
}

}  // namespace bagcn
