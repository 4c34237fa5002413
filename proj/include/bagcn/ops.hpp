#pragma once

#include <vector>

#include "bagcn/rng.hpp"
#include "bagcn/tape.hpp"

namespace bagcn {

// Running statistics for one batch-normalized activation. Not learnable;
// carried alongside the affine parameters and stored in checkpoints.
struct BatchNormState {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;
  double momentum = 0.9;

  void reset(int dim) {
    mean = Eigen::RowVectorXd::Zero(dim);
    var = Eigen::RowVectorXd::Ones(dim);
  }
};

// --- differentiable ops -----------------------------------------------------
// Each returns the id of a new tape node. Gradients are recorded for every
// input node with requires_grad set.

int matmul(Tape& t, int a, int b);     // A * B
int matmul_nt(Tape& t, int a, int b);  // A * B^T

// S is constant; gradient flows to the dense side only. Relies on the
// SparseMatrix symmetry invariant (S^T = S) in the backward pass. The node
// keeps a reference to `s`, so `s` must outlive the tape.
int spmm(Tape& t, const SparseMatrix& s, int d);

int add(Tape& t, int a, int b);
int sub(Tape& t, int a, int b);
int hadamard(Tape& t, int a, int b);
int add_rowvec(Tape& t, int a, int b);  // broadcast a 1xd bias over rows
int scale(Tape& t, int a, double c);
int relu(Tape& t, int a);  // subgradient at 0 is 0

// Numerically stable per-row softmax (max subtraction). Rows of the result
// are nonnegative and sum to 1 within 1e-12.
int row_softmax(Tape& t, int a);

// Rows scaled to unit L2 norm; norms below 1e-12 are clamped to 1e-12.
int row_l2_normalize(Tape& t, int a);

// training=true standardizes with the biased batch variance (requires >= 2
// rows) and, when track_running is set, folds the batch statistics into
// `state` with its momentum. training=false standardizes with `state`.
int batch_norm(Tape& t, int x, int gamma, int beta, BatchNormState& state, bool training,
               bool track_running, double eps = 1e-5);

// Inverted dropout: keep with probability 1-p and scale by 1/(1-p). Mask
// entries are drawn row-major from `stream`. Training path only.
int dropout(Tape& t, int a, double p, Rng& stream);

int sum_all(Tape& t, int a);  // 1x1 sum of all entries

// Temperature sharpening of probability rows: p^(1/T) renormalized. Rejects
// rows whose sum deviates from 1 by more than 1e-6. With stop_gradient the
// result is a constant target (standard consistency-training treatment).
int sharpen(Tape& t, int a, double temperature, bool stop_gradient);

// Mean over `mask` of -log(probs[i, labels[i]]), probabilities floored at
// 1e-12 inside the log.
int cross_entropy(Tape& t, int probs, const std::vector<int>& labels,
                  const std::vector<int>& mask);

// --- gradient checking ------------------------------------------------------

struct LossGraph {
  int loss = -1;                 // 1x1 node
  std::vector<int> param_nodes;  // leaf ids, same order as the params list
};

// Central-difference check of reverse-mode gradients. `build_loss` must
// rebuild the full forward pass from the current contents of `params` (which
// are perturbed in place, one entry at a time) and be deterministic: dropout
// off, no RNG consumption, no running-stat updates.
// Returns max over all parameter entries of |analytic - numeric| / max(1, |numeric|).
double grad_check(const std::function<LossGraph(Tape&)>& build_loss,
                  const std::vector<Mat*>& params, double step);

}  // namespace bagcn
