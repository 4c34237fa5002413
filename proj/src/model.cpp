#include "bagcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bagcn/objective.hpp"

namespace bagcn {

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::bagcn: return "bagcn";
    case ModelKind::gcn2: return "gcn2";
    case ModelKind::mlp2: return "mlp2";
  }
  return "?";
}
const char* to_string(Fusion f) { return f == Fusion::add ? "add" : "mul"; }
const char* to_string(BiaffineMode m) {
  switch (m) {
    case BiaffineMode::ego_local: return "ego_local";
    case BiaffineMode::ego_ego: return "ego_ego";
    case BiaffineMode::local_local: return "local_local";
    case BiaffineMode::none: return "none";
  }
  return "?";
}
const char* to_string(NormKind n) { return n == NormKind::batch ? "batch" : "row_l2"; }
const char* to_string(ConsistencyMode c) {
  return c == ConsistencyMode::average ? "average" : "pairwise";
}

namespace {

[[noreturn]] void bad_enum(const char* what, const std::string& s, const char* valid) {
  throw std::invalid_argument(std::string("invalid ") + what + " '" + s + "' (expected " + valid + ")");
}

}  // namespace

ModelKind parse_model_kind(const std::string& s) {
  if (s == "bagcn") return ModelKind::bagcn;
  if (s == "gcn2") return ModelKind::gcn2;
  if (s == "mlp2") return ModelKind::mlp2;
  bad_enum("model", s, "bagcn|gcn2|mlp2");
}
Fusion parse_fusion(const std::string& s) {
  if (s == "add") return Fusion::add;
  if (s == "mul") return Fusion::mul;
  bad_enum("fusion", s, "add|mul");
}
BiaffineMode parse_biaffine_mode(const std::string& s) {
  if (s == "ego_local") return BiaffineMode::ego_local;
  if (s == "ego_ego") return BiaffineMode::ego_ego;
  if (s == "local_local") return BiaffineMode::local_local;
  if (s == "none") return BiaffineMode::none;
  bad_enum("biaffine mode", s, "ego_local|ego_ego|local_local|none");
}
NormKind parse_norm_kind(const std::string& s) {
  if (s == "batch") return NormKind::batch;
  if (s == "row_l2") return NormKind::row_l2;
  bad_enum("norm", s, "batch|row_l2");
}
ConsistencyMode parse_consistency_mode(const std::string& s) {
  if (s == "average") return ConsistencyMode::average;
  if (s == "pairwise") return ConsistencyMode::pairwise;
  bad_enum("consistency mode", s, "average|pairwise");
}

void ModelConfig::validate() const {
  if (hidden_dim < 1) throw std::invalid_argument("config: hidden_dim must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("config: dropout must be in [0,1)");
  if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
  if (temperature <= 0.0) throw std::invalid_argument("config: temperature must be > 0");
  if (lr <= 0.0) throw std::invalid_argument("config: lr must be > 0");
  if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
}

Param* ParamSet::find(ParamId id) {
  for (auto& p : params) {
    if (p.id == id) return &p;
  }
  return nullptr;
}
const Param* ParamSet::find(ParamId id) const {
  for (const auto& p : params) {
    if (p.id == id) return &p;
  }
  return nullptr;
}
Mat& ParamSet::at(ParamId id) {
  if (Param* p = find(id)) return p->value;
  throw std::logic_error("param set does not contain id " + std::to_string(static_cast<int>(id)));
}
const Mat& ParamSet::at(ParamId id) const {
  if (const Param* p = find(id)) return p->value;
  throw std::logic_error("param set does not contain id " + std::to_string(static_cast<int>(id)));
}

const std::vector<ParamInfo>& param_registry() {
  static const std::vector<ParamInfo> registry = {
      {ParamId::w1, "w1", true},
      {ParamId::b_c, "b_c", false},
      {ParamId::theta, "theta", true},
      {ParamId::b_theta, "b_theta", false},
      {ParamId::m1, "m1", true},
      {ParamId::m2, "m2", true},
      {ParamId::w_c, "w_c", true},
      {ParamId::w_mlp, "w_mlp", true},
      {ParamId::b_mlp, "b_mlp", false},
      {ParamId::gamma_c, "gamma_c", false},
      {ParamId::beta_c, "beta_c", false},
      {ParamId::gamma_ego, "gamma_ego", false},
      {ParamId::beta_ego, "beta_ego", false},
  };
  return registry;
}

namespace {

const ParamInfo& info_for(ParamId id) {
  for (const auto& info : param_registry()) {
    if (info.id == id) return info;
  }
  throw std::logic_error("unknown param id");
}

Mat glorot_uniform(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
  }
  return m;
}

Mat identity_plus_noise(int dim, double stddev, Rng& rng) {
  Mat m = Mat::Identity(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) += stddev * rng.normal();
  }
  return m;
}

// which parameters a (kind, config) combination owns
std::vector<ParamId> needed_params(const ModelConfig& cfg) {
  using P = ParamId;
  switch (cfg.kind) {
    case ModelKind::gcn2:
      return {P::w1, P::w_c};
    case ModelKind::mlp2:
      return {P::theta, P::b_theta, P::w_mlp, P::b_mlp};
    case ModelKind::bagcn:
      if (cfg.biaffine_mode == BiaffineMode::none) {
        // the conv view degenerates to the bias-free 2-layer GCN formula, so
        // b_c and the fusion norm parameters drop out entirely
        return {P::w1, P::theta, P::b_theta, P::w_c, P::w_mlp, P::b_mlp};
      }
      if (cfg.norm_kind == NormKind::batch) {
        return {P::w1, P::b_c, P::theta, P::b_theta, P::m1, P::m2, P::w_c, P::w_mlp,
                P::b_mlp, P::gamma_c, P::beta_c, P::gamma_ego, P::beta_ego};
      }
      return {P::w1, P::b_c, P::theta, P::b_theta, P::m1, P::m2, P::w_c, P::w_mlp, P::b_mlp};
  }
  throw std::logic_error("unknown model kind");
}

}  // namespace

ParamSet init_params(const Graph& g, const ModelConfig& cfg) {
  cfg.validate();
  const int f = g.feature_dim();
  const int d = cfg.hidden_dim;
  const int c = g.num_classes;

  auto shape_init = [&](ParamId id) -> Mat {
    // each parameter draws from its own stream so shared parameters match
    // across model kinds under the same seed
    Rng rng(mix_seed(cfg.seed, kStreamInit + static_cast<std::uint64_t>(id)));
    switch (id) {
      case ParamId::w1: return glorot_uniform(f, d, rng);
      case ParamId::b_c: return Mat::Zero(1, d);
      case ParamId::theta: return glorot_uniform(f, d, rng);
      case ParamId::b_theta: return Mat::Zero(1, d);
      case ParamId::m1: return identity_plus_noise(d, 0.01, rng);
      case ParamId::m2: return identity_plus_noise(d, 0.01, rng);
      case ParamId::w_c: return glorot_uniform(d, c, rng);
      case ParamId::w_mlp: return glorot_uniform(d, c, rng);
      case ParamId::b_mlp: return Mat::Zero(1, c);
      case ParamId::gamma_c:
      case ParamId::gamma_ego: return Mat::Ones(1, d);
      case ParamId::beta_c:
      case ParamId::beta_ego: return Mat::Zero(1, d);
    }
    throw std::logic_error("unknown param id");
  };

  ParamSet ps;
  auto ids = needed_params(cfg);
  std::sort(ids.begin(), ids.end());
  for (ParamId id : ids) {
    const ParamInfo& info = info_for(id);
    ps.params.push_back({id, info.name, shape_init(id), info.decay});
  }
  if (cfg.kind == ModelKind::bagcn && cfg.biaffine_mode != BiaffineMode::none &&
      cfg.norm_kind == NormKind::batch) {
    ps.bn_c.reset(d);
    ps.bn_ego.reset(d);
  }
  return ps;
}

int BoundParams::id_for(const ParamSet& ps, ParamId p) const {
  for (size_t i = 0; i < ps.params.size(); ++i) {
    if (ps.params[i].id == p) return node_ids[i];
  }
  return -1;
}

BoundParams bind_params(Tape& t, const ParamSet& ps, bool requires_grad) {
  BoundParams bound;
  bound.node_ids.reserve(ps.params.size());
  for (const auto& p : ps.params) bound.node_ids.push_back(t.leaf(p.value, requires_grad));
  return bound;
}

ForwardResult model_forward(Tape& t, const Graph& g, const SparseMatrix& a_hat,
                            const BoundParams& bound, ParamSet& ps, const ModelConfig& cfg,
                            const ForwardOptions& opt, DropoutStreams* streams) {
  cfg.validate();
  const bool use_dropout = opt.training && cfg.dropout > 0.0;
  if (use_dropout && streams == nullptr) {
    throw std::invalid_argument("model_forward: training with dropout needs dropout streams");
  }
  auto P = [&](ParamId id) {
    int node = bound.id_for(ps, id);
    if (node < 0) throw std::logic_error("model_forward: parameter not bound");
    return node;
  };
  auto drop = [&](int node, Rng* stream) {
    return use_dropout ? dropout(t, node, cfg.dropout, *stream) : node;
  };
  Rng* s_conv_in = streams ? &streams->conv_input : nullptr;
  Rng* s_ego_in = streams ? &streams->ego_input : nullptr;
  Rng* s_conv_head = streams ? &streams->conv_head : nullptr;
  Rng* s_mlp_head = streams ? &streams->mlp_head : nullptr;

  const int x = t.leaf(g.features, false);

  // two-layer GCN without biases; also the conv view of biaffine_mode none
  auto conv_view_plain = [&]() -> std::pair<int, int> {
    int x0 = drop(x, s_conv_in);
    int h = relu(t, spmm(t, a_hat, matmul(t, x0, P(ParamId::w1))));
    int h0 = drop(h, s_conv_head);
    int y = row_softmax(t, matmul(t, spmm(t, a_hat, h0), P(ParamId::w_c)));
    return {h, y};
  };
  // ego encoder + linear head; also the standalone 2-layer MLP
  auto mlp_view = [&]() -> std::pair<int, int> {
    int x1 = drop(x, s_ego_in);
    int h = relu(t, add_rowvec(t, matmul(t, x1, P(ParamId::theta)), P(ParamId::b_theta)));
    int h0 = drop(h, s_mlp_head);
    int y = row_softmax(t, add_rowvec(t, matmul(t, h0, P(ParamId::w_mlp)), P(ParamId::b_mlp)));
    return {h, y};
  };

  ForwardResult fwd;
  if (cfg.kind == ModelKind::gcn2) {
    auto [h, y] = conv_view_plain();
    fwd.h_c_prime = h;
    fwd.y_gcn = y;
    return fwd;
  }
  if (cfg.kind == ModelKind::mlp2) {
    auto [h, y] = mlp_view();
    fwd.h_ego_prime = h;
    fwd.y_fc = y;
    return fwd;
  }

  if (cfg.biaffine_mode == BiaffineMode::none) {
    auto [hc, yg] = conv_view_plain();
    auto [he, yf] = mlp_view();
    fwd.h_c_prime = hc;
    fwd.h_ego_prime = he;
    fwd.y_gcn = yg;
    fwd.y_fc = yf;
    return fwd;
  }

  // encoders
  int x0 = drop(x, s_conv_in);
  int hc = relu(t, add_rowvec(t, spmm(t, a_hat, matmul(t, x0, P(ParamId::w1))), P(ParamId::b_c)));
  int x1 = drop(x, s_ego_in);
  int hego = relu(t, add_rowvec(t, matmul(t, x1, P(ParamId::theta)), P(ParamId::b_theta)));

  // biaffine dependency scores; the mode picks which encoding fills each
  // slot of the bilinear forms, the message values below never change
  int slot_conv = cfg.biaffine_mode == BiaffineMode::ego_ego ? hego : hc;
  int slot_ego = cfg.biaffine_mode == BiaffineMode::local_local ? hc : hego;
  fwd.s1 = row_softmax(t, matmul_nt(t, matmul(t, slot_conv, P(ParamId::m1)), slot_ego));
  fwd.s2 = row_softmax(t, matmul_nt(t, matmul(t, slot_ego, P(ParamId::m2)), slot_conv));

  // attention-routed messages and fusion
  int hca = matmul(t, fwd.s1, hego);
  int hea = matmul(t, fwd.s2, hc);
  auto fuse = [&](int h, int ha, ParamId gamma, ParamId beta, BatchNormState& bn) {
    int mixed = cfg.fusion == Fusion::add ? add(t, h, ha) : hadamard(t, h, ha);
    if (cfg.norm_kind == NormKind::batch) {
      return batch_norm(t, mixed, P(gamma), P(beta), bn, opt.training, opt.track_running);
    }
    return row_l2_normalize(t, mixed);
  };
  fwd.h_c_prime = fuse(hc, hca, ParamId::gamma_c, ParamId::beta_c, ps.bn_c);
  fwd.h_ego_prime = fuse(hego, hea, ParamId::gamma_ego, ParamId::beta_ego, ps.bn_ego);

  // heads
  int gin = drop(fwd.h_c_prime, s_conv_head);
  fwd.y_gcn = row_softmax(t, matmul(t, spmm(t, a_hat, gin), P(ParamId::w_c)));
  int fin = drop(fwd.h_ego_prime, s_mlp_head);
  fwd.y_fc = row_softmax(t, add_rowvec(t, matmul(t, fin, P(ParamId::w_mlp)), P(ParamId::b_mlp)));
  return fwd;
}

EvalOutputs eval_forward(const Graph& g, const SparseMatrix& a_hat, ParamSet& ps,
                         const ModelConfig& cfg) {
  Tape t;
  BoundParams bound = bind_params(t, ps, false);
  ForwardResult fwd = model_forward(t, g, a_hat, bound, ps, cfg, {false, false}, nullptr);
  EvalOutputs out;
  out.probs = t.value(fwd.inference_head());
  if (fwd.y_gcn >= 0) out.y_gcn = t.value(fwd.y_gcn);
  if (fwd.y_fc >= 0) out.y_fc = t.value(fwd.y_fc);
  if (fwd.s1 >= 0) out.s1 = t.value(fwd.s1);
  if (fwd.s2 >= 0) out.s2 = t.value(fwd.s2);
  return out;
}

double accuracy(const Mat& probs, const std::vector<int>& labels, const std::vector<int>& mask) {
  if (mask.empty()) throw std::invalid_argument("accuracy: empty mask");
  int hits = 0;
  for (int i : mask) {
    if (i < 0 || i >= probs.rows()) throw std::invalid_argument("accuracy: mask index out of range");
    int best = 0;
    for (int c = 1; c < probs.cols(); ++c) {
      if (probs(i, c) > probs(i, best)) best = c;  // ties keep the lower index
    }
    hits += (best == labels[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

double evaluate(const Graph& g, const SparseMatrix& a_hat, ParamSet& ps, const ModelConfig& cfg,
                const std::vector<int>& mask) {
  return accuracy(eval_forward(g, a_hat, ps, cfg).probs, g.labels, mask);
}

Graph random_fixture_graph(int n, int f, int c, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x777));
  Graph g;
  g.n = n;
  g.num_classes = c;
  g.name = "fixture";
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < 0.3) g.edges.emplace_back(i, j);
    }
  }
  g.features.resize(n, f);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < f; ++j) g.features(i, j) = rng.normal();
  }
  g.labels.resize(n);
  for (int i = 0; i < n; ++i) g.labels[i] = i % c;
  for (int i = 0; i < n; ++i) {
    if (i % 2 == 0) {
      g.masks.train.push_back(i);
    } else if (i % 4 == 1) {
      g.masks.val.push_back(i);
    } else {
      g.masks.test.push_back(i);
    }
  }
  g.check();
  g.build_adjacency();
  return g;
}

namespace {

// identity whose backward multiplies the gradient by 1.01; lets the
// gradcheck harness prove it catches a corrupted backward pass
int faulty_identity(Tape& t, int a) {
  return t.emplace("faulty_identity", t.value(a), t.requires_grad(a), [a](Tape& t, int self) {
    if (t.requires_grad(a)) t.grad_buffer(a) += 1.01 * t.grad_buffer(self);
  });
}

}  // namespace

double model_grad_check(const ModelConfig& cfg, int n, int f, int c, std::uint64_t seed,
                        double step, bool inject_fault) {
  Graph g = random_fixture_graph(n, f, c, seed);
  SparseMatrix a_hat = normalize_adjacency(g);

  ModelConfig cc = cfg;
  cc.seed = seed;
  cc.dropout = 0.0;            // closure must be deterministic
  cc.stopgrad_target = false;  // differentiate through the sharpened target
  ParamSet ps = init_params(g, cc);

  std::vector<Mat*> param_ptrs;
  param_ptrs.reserve(ps.params.size());
  for (auto& p : ps.params) param_ptrs.push_back(&p.value);

  auto build = [&](Tape& t) -> LossGraph {
    BoundParams bound = bind_params(t, ps, true);
    // batch statistics, no running-stat side effects
    ForwardResult fwd = model_forward(t, g, a_hat, bound, ps, cc, {true, false}, nullptr);
    LossNodes ln = build_total_loss(t, fwd, g, cc);
    int loss = inject_fault ? faulty_identity(t, ln.total) : ln.total;
    return {loss, bound.node_ids};
  };
  return grad_check(build, param_ptrs, step);
}

}  // namespace bagcn
