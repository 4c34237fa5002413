#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bagcn/sparse.hpp"

namespace bagcn {

// Reverse-mode gradient tape, rebuilt on every forward pass (define-by-run).
// Nodes are referenced by index; creation order is a topological order, so
// backward() is a single reverse sweep that visits each node exactly once.
//
// Every forward op must go through emplace(), which rejects non-finite
// values immediately: a NaN/Inf surfaces with the name of the op that
// produced it rather than as a corrupted loss many steps later.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  int emplace(const char* op, Mat value, bool requires_grad, BackwardFn backward);

  int leaf(Mat value, bool requires_grad) {
    return emplace("leaf", std::move(value), requires_grad, nullptr);
  }

  const Mat& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Gradient of the last backward() target w.r.t. node `id`. Returns a zero
  // matrix if no gradient reached the node (dead branch).
  Mat grad(int id) const;

  // Accumulation buffer for backward functions; allocates zeros on first use.
  Mat& grad_buffer(int id);
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }

  // Seeds d(loss)/d(loss)=1 and sweeps the tape in reverse creation order.
  // `loss` must be a 1x1 node.
  void backward(int loss);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct TapeNode {
    Mat value;
    Mat grad;  // empty until touched by backward
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<TapeNode> nodes_;
};

}  // namespace bagcn
