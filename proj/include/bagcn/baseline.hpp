#pragma once

#include "bagcn/model.hpp"

namespace bagcn {

// Hyperparameters for the reference models. Same constraints as the full
// config; conversion leaves the biaffine/consistency fields at inert
// defaults so the shared trainer runs either baseline unchanged.
struct BaselineConfig {
  ModelKind kind = ModelKind::gcn2;  // gcn2 or mlp2
  int hidden_dim = 64;
  double dropout = 0.5;
  double lr = 0.01;
  double weight_decay = 5e-4;
  int epochs = 200;
  std::uint64_t seed = 0;

  ModelConfig to_model_config() const;
};

// Plain two-layer GCN: row_softmax(A_hat relu(A_hat X W1) W_c), no biases,
// dropout on both layer inputs when training. Shares kernels, parameter
// streams, and dropout sites with the full model's conv branch, so accuracy
// deltas measure the architecture rather than the implementation.
// `streams` may be null when training is false.
Mat gcn2_forward(const Graph& g, const SparseMatrix& a_hat, ParamSet& ps, const ModelConfig& cfg,
                 bool training, DropoutStreams* streams = nullptr);

// Two linear layers with ReLU and softmax output (the ego branch plus its
// dense head); ignores the graph structure by construction.
Mat mlp2_forward(const Graph& g, ParamSet& ps, const ModelConfig& cfg, bool training,
                 DropoutStreams* streams = nullptr);

}  // namespace bagcn
