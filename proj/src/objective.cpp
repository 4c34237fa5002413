#include "bagcn/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace bagcn {

namespace {

// identity with a severed gradient
int detach(Tape& t, int a) {
  return t.emplace("detach", t.value(a), false, nullptr);
}

}  // namespace

LossNodes build_total_loss(Tape& t, const ForwardResult& fwd, const Graph& g,
                           const ModelConfig& cfg) {
  return build_total_loss(t, fwd, g, g.masks.train, cfg);
}

LossNodes build_total_loss(Tape& t, const ForwardResult& fwd, const Graph& g,
                           const std::vector<int>& train_mask, const ModelConfig& cfg) {
  LossNodes out;
  out.ce = cross_entropy(t, fwd.inference_head(), g.labels, train_mask);

  if (fwd.y_gcn >= 0 && fwd.y_fc >= 0) {
    const double n = static_cast<double>(g.n);
    if (cfg.consistency == ConsistencyMode::pairwise) {
      int d = sub(t, fwd.y_gcn, fwd.y_fc);
      out.consistency = scale(t, sum_all(t, hadamard(t, d, d)), 1.0 / n);
    } else {
      int ybar = scale(t, add(t, fwd.y_gcn, fwd.y_fc), 0.5);
      int target;
      if (cfg.sharpen) {
        target = sharpen(t, ybar, cfg.temperature, cfg.stopgrad_target);
      } else {
        target = cfg.stopgrad_target ? detach(t, ybar) : ybar;
      }
      int dg = sub(t, target, fwd.y_gcn);
      int df = sub(t, target, fwd.y_fc);
      int sq = add(t, sum_all(t, hadamard(t, dg, dg)), sum_all(t, hadamard(t, df, df)));
      out.consistency = scale(t, sq, 0.5 / n);
    }
  }

  if (out.consistency >= 0 && cfg.lambda != 0.0) {
    out.total = add(t, out.ce, scale(t, out.consistency, cfg.lambda));
  } else {
    out.total = out.ce;
  }
  return out;
}

LossBreakdown read_breakdown(const Tape& t, const LossNodes& nodes, double lambda) {
  LossBreakdown b;
  b.lambda = lambda;
  b.ce = t.value(nodes.ce)(0, 0);
  b.consistency = nodes.consistency >= 0 ? t.value(nodes.consistency)(0, 0) : 0.0;
  b.total = t.value(nodes.total)(0, 0);
  return b;
}

Mat sharpen_rows(const Mat& probs, double temperature) {
  if (temperature <= 0.0) throw std::invalid_argument("sharpen_rows: temperature must be > 0");
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-6) {
      throw std::invalid_argument("sharpen_rows: row " + std::to_string(i) +
                                  " is not a probability distribution");
    }
  }
  Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> powed =
      probs.array().pow(1.0 / temperature);
  return (powed.colwise() / powed.rowwise().sum()).matrix();
}

}  // namespace bagcn
