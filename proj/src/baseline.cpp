#include "bagcn/baseline.hpp"

#include <stdexcept>

namespace bagcn {

ModelConfig BaselineConfig::to_model_config() const {
  if (kind == ModelKind::bagcn) {
    throw std::invalid_argument("BaselineConfig.kind must be gcn2 or mlp2");
  }
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.hidden_dim = hidden_dim;
  cfg.dropout = dropout;
  cfg.lr = lr;
  cfg.weight_decay = weight_decay;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

namespace {

Mat forward_kind(ModelKind kind, const Graph& g, const SparseMatrix& a_hat, ParamSet& ps,
                 const ModelConfig& cfg, bool training, DropoutStreams* streams) {
  ModelConfig local = cfg;
  local.kind = kind;
  local.validate();
  if (training && !streams) {
    throw std::invalid_argument("baseline forward: training mode needs dropout streams");
  }
  Tape t;
  const BoundParams bound = bind_params(t, ps, /*requires_grad=*/false);
  ForwardOptions opt;
  opt.training = training;
  const ForwardResult fwd = model_forward(t, g, a_hat, bound, ps, local, opt, streams);
  return t.value(fwd.inference_head());
}

}  // namespace

Mat gcn2_forward(const Graph& g, const SparseMatrix& a_hat, ParamSet& ps, const ModelConfig& cfg,
                 bool training, DropoutStreams* streams) {
  return forward_kind(ModelKind::gcn2, g, a_hat, ps, cfg, training, streams);
}

Mat mlp2_forward(const Graph& g, ParamSet& ps, const ModelConfig& cfg, bool training,
                 DropoutStreams* streams) {
  // the mlp path never touches the adjacency; an empty operator keeps the
  // shared signature without paying for normalization
  SparseMatrix unused;
  unused.n = g.n;
  unused.row_ptr.assign(static_cast<std::size_t>(g.n) + 1, 0);
  return forward_kind(ModelKind::mlp2, g, unused, ps, cfg, training, streams);
}

}  // namespace bagcn
