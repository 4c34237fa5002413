#include "bagcn/tape.hpp"

#include <stdexcept>

namespace bagcn {

int Tape::emplace(const char* op, Mat value, bool requires_grad, BackwardFn backward) {
  if (!value.allFinite()) {
    throw std::runtime_error(std::string("non-finite value produced by op '") + op + "' (" +
                             std::to_string(value.rows()) + "x" + std::to_string(value.cols()) + ")");
  }
  TapeNode node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.backward = requires_grad ? std::move(backward) : nullptr;
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

Mat Tape::grad(int id) const {
  const TapeNode& n = nodes_[id];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Mat& Tape::grad_buffer(int id) {
  TapeNode& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(int loss) {
  const TapeNode& l = nodes_[loss];
  if (l.value.rows() != 1 || l.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 tensor");
  }
  grad_buffer(loss)(0, 0) = 1.0;
  for (int id = loss; id >= 0; --id) {
    TapeNode& n = nodes_[id];
    // skip constants and nodes no upstream gradient reached
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, id);
  }
}

}  // namespace bagcn
