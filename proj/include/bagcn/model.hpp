#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bagcn/graph.hpp"
#include "bagcn/ops.hpp"

namespace bagcn {

enum class ModelKind { bagcn, gcn2, mlp2 };
enum class Fusion { add, mul };
enum class BiaffineMode { ego_local, ego_ego, local_local, none };
enum class NormKind { batch, row_l2 };
enum class ConsistencyMode { average, pairwise };

const char* to_string(ModelKind k);
const char* to_string(Fusion f);
const char* to_string(BiaffineMode m);
const char* to_string(NormKind n);
const char* to_string(ConsistencyMode c);
ModelKind parse_model_kind(const std::string& s);
Fusion parse_fusion(const std::string& s);
BiaffineMode parse_biaffine_mode(const std::string& s);
NormKind parse_norm_kind(const std::string& s);
ConsistencyMode parse_consistency_mode(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::bagcn;
  int hidden_dim = 64;
  Fusion fusion = Fusion::add;
  BiaffineMode biaffine_mode = BiaffineMode::ego_local;
  NormKind norm_kind = NormKind::batch;
  double dropout = 0.5;
  double lambda = 1.0;
  double temperature = 0.7;
  bool sharpen = true;
  ConsistencyMode consistency = ConsistencyMode::average;
  double lr = 0.01;
  double weight_decay = 5e-4;
  int epochs = 200;
  std::uint64_t seed = 0;
  // Treat the sharpened consistency target as a constant during backprop.
  // Training default; gradient checking flips it off so finite differences
  // see the same function the tape differentiates.
  bool stopgrad_target = true;
  // L1-normalize feature rows at load time (applied by the CLI, echoed here
  // so checkpoints know how their inputs were prepared).
  bool row_normalize = false;

  void validate() const;
};

// Stable parameter identities. Initialization draws each parameter from its
// own seeded stream keyed by this id, so any two models that share a
// parameter (e.g. the full model's first conv layer and the 2-layer GCN
// baseline's) start from identical values under the same seed.
enum class ParamId : int {
  w1 = 0,      // conv encoder weight, f x d
  b_c = 1,     // conv encoder bias, 1 x d
  theta = 2,   // ego encoder weight, f x d
  b_theta = 3, // ego encoder bias, 1 x d
  m1 = 4,      // biaffine metric (conv side -> ego side), d x d
  m2 = 5,      // biaffine metric (ego side -> conv side), d x d
  w_c = 6,     // conv head weight, d x C
  w_mlp = 7,   // mlp head weight, d x C
  b_mlp = 8,   // mlp head bias, 1 x C
  gamma_c = 9, beta_c = 10,    // fusion norm affine, conv branch
  gamma_ego = 11, beta_ego = 12,
};

struct Param {
  ParamId id;
  std::string name;
  Mat value;
  bool decay = false;  // weight decay applies to weight matrices only
};

struct ParamSet {
  std::vector<Param> params;  // ordered by id
  BatchNormState bn_c, bn_ego;

  Param* find(ParamId id);
  const Param* find(ParamId id) const;
  Mat& at(ParamId id);
  const Mat& at(ParamId id) const;
};

// Name/decay metadata for (de)serialization.
struct ParamInfo {
  ParamId id;
  const char* name;
  bool decay;
};
const std::vector<ParamInfo>& param_registry();

// Glorot-uniform weights, zero biases, unit gammas, identity-plus-noise
// metrics; each parameter from its own stream of cfg.seed.
ParamSet init_params(const Graph& g, const ModelConfig& cfg);

// One independent stream per dropout site. A site is a fixed place in the
// architecture where a mask is drawn; models that share a site consume the
// same stream, which is what makes ablation-reduction trajectories match the
// baselines bit for bit.
struct DropoutStreams {
  Rng conv_input, ego_input, conv_head, mlp_head;
  explicit DropoutStreams(std::uint64_t seed)
      : conv_input(mix_seed(seed, kStreamDropout + 0)),
        ego_input(mix_seed(seed, kStreamDropout + 1)),
        conv_head(mix_seed(seed, kStreamDropout + 2)),
        mlp_head(mix_seed(seed, kStreamDropout + 3)) {}
};

struct ForwardOptions {
  bool training = false;
  bool track_running = false;  // fold batch stats into the running estimates
};

// Tape node ids of the forward outputs; -1 marks an absent output (no mlp
// head on gcn2, no attention matrices with biaffine_mode none, ...).
struct ForwardResult {
  int y_gcn = -1;
  int y_fc = -1;
  int s1 = -1;
  int s2 = -1;
  int h_c_prime = -1;
  int h_ego_prime = -1;

  // the head used for prediction/model selection (conv head when present)
  int inference_head() const { return y_gcn >= 0 ? y_gcn : y_fc; }
};

// Leaf nodes for every parameter of `ps` on tape `t`, aligned with ps.params.
struct BoundParams {
  std::vector<int> node_ids;
  int id_for(const ParamSet& ps, ParamId p) const;
};
BoundParams bind_params(Tape& t, const ParamSet& ps, bool requires_grad = true);

// `ps` is non-const because training-mode forwards may fold batch statistics
// into its running estimates (opt.track_running).
ForwardResult model_forward(Tape& t, const Graph& g, const SparseMatrix& a_hat,
                            const BoundParams& bound, ParamSet& ps, const ModelConfig& cfg,
                            const ForwardOptions& opt, DropoutStreams* streams);

// Deterministic eval-mode forward returning plain matrices.
struct EvalOutputs {
  Mat probs;  // inference head, n x C
  Mat y_gcn, y_fc;
  Mat s1, s2;  // empty when absent
};
EvalOutputs eval_forward(const Graph& g, const SparseMatrix& a_hat, ParamSet& ps,
                         const ModelConfig& cfg);

// Argmax accuracy over `mask` (ties resolved to the lowest class index).
double accuracy(const Mat& probs, const std::vector<int>& labels, const std::vector<int>& mask);
double evaluate(const Graph& g, const SparseMatrix& a_hat, ParamSet& ps, const ModelConfig& cfg,
                const std::vector<int>& mask);

// Finite-difference check of the full training loss on a small random
// fixture (dropout off, batch statistics, target gradients enabled).
// Returns the max relative error across all parameter entries. With
// inject_fault the backward pass is deliberately corrupted so the harness
// can prove it detects bugs.
double model_grad_check(const ModelConfig& cfg, int n, int f, int c, std::uint64_t seed,
                        double step, bool inject_fault = false);

// Random connected-ish fixture graph for gradcheck and oracle tests.
Graph random_fixture_graph(int n, int f, int c, std::uint64_t seed);

}  // namespace bagcn
