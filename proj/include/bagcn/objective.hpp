#pragma once

#include "bagcn/model.hpp"
#include "bagcn/tape.hpp"

namespace bagcn {

struct LossBreakdown {
  double ce = 0.0;
  double consistency = 0.0;
  double total = 0.0;
  double lambda = 0.0;
};

// Tape node ids of the loss terms; consistency is -1 for single-head models.
struct LossNodes {
  int ce = -1;
  int consistency = -1;
  int total = -1;
};

// Assembles the training objective on the tape:
//   ce          masked cross-entropy of the inference head over masks.train
//   consistency both heads against their (sharpened) average, or the
//               pairwise squared distance, averaged over all n nodes
//   total       ce + lambda * consistency  (exactly ce when lambda == 0, so
//               a lambda=0 run's gradient graph decouples from the mlp head)
LossNodes build_total_loss(Tape& t, const ForwardResult& fwd, const Graph& g,
                           const ModelConfig& cfg);

// Same objective with the supervised mask supplied explicitly (the
// label-budget study trains on splits that are not the graph's stored one).
LossNodes build_total_loss(Tape& t, const ForwardResult& fwd, const Graph& g,
                           const std::vector<int>& train_mask, const ModelConfig& cfg);

LossBreakdown read_breakdown(const Tape& t, const LossNodes& nodes, double lambda);

// Plain-matrix sharpening used by analysis and tests (same math as the tape
// op's forward pass).
Mat sharpen_rows(const Mat& probs, double temperature);

}  // namespace bagcn
