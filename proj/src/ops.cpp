#include "bagcn/ops.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace bagcn {

namespace {

using Arr = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// numeric floor shared by row_l2_normalize (norm clamp) and cross_entropy
// (log argument); file scope so backward lambdas can use it uncaptured
constexpr double kFloor = 1e-12;

void require_same_shape(const char* op, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()) + ")");
  }
}

}  // namespace

int matmul(Tape& t, int a, int b) {
  const Mat& va = t.value(a);
  const Mat& vb = t.value(b);
  if (va.cols() != vb.rows()) {
    throw std::invalid_argument("matmul: inner dimensions do not match (" +
                                std::to_string(va.cols()) + " vs " + std::to_string(vb.rows()) + ")");
  }
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.emplace("matmul", va * vb, rg, [a, b](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    if (t.requires_grad(a)) t.grad_buffer(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad_buffer(b).noalias() += t.value(a).transpose() * g;
  });
}

int matmul_nt(Tape& t, int a, int b) {
  const Mat& va = t.value(a);
  const Mat& vb = t.value(b);
  if (va.cols() != vb.cols()) {
    throw std::invalid_argument("matmul_nt: inner dimensions do not match (" +
                                std::to_string(va.cols()) + " vs " + std::to_string(vb.cols()) + ")");
  }
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.emplace("matmul_nt", va * vb.transpose(), rg, [a, b](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    if (t.requires_grad(a)) t.grad_buffer(a).noalias() += g * t.value(b);
    if (t.requires_grad(b)) t.grad_buffer(b).noalias() += g.transpose() * t.value(a);
  });
}

int spmm(Tape& t, const SparseMatrix& s, int d) {
  const Mat& vd = t.value(d);
  if (vd.rows() != s.n) {
    throw std::invalid_argument("spmm: dimension mismatch (sparse " + std::to_string(s.n) +
                                " vs dense " + std::to_string(vd.rows()) + " rows)");
  }
  // &s must outlive the tape; the operator is built once per run and shared
  return t.emplace("spmm", s.multiply(vd), t.requires_grad(d), [&s, d](Tape& t, int self) {
    if (t.requires_grad(d)) t.grad_buffer(d) += s.multiply(t.grad_buffer(self));
  });
}

int add(Tape& t, int a, int b) {
  require_same_shape("add", t.value(a), t.value(b));
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.emplace("add", t.value(a) + t.value(b), rg, [a, b](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) += g;
  });
}

int sub(Tape& t, int a, int b) {
  require_same_shape("sub", t.value(a), t.value(b));
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.emplace("sub", t.value(a) - t.value(b), rg, [a, b](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) -= g;
  });
}

int hadamard(Tape& t, int a, int b) {
  require_same_shape("hadamard", t.value(a), t.value(b));
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.emplace("hadamard", t.value(a).cwiseProduct(t.value(b)), rg, [a, b](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    if (t.requires_grad(a)) t.grad_buffer(a).array() += g.array() * t.value(b).array();
    if (t.requires_grad(b)) t.grad_buffer(b).array() += g.array() * t.value(a).array();
  });
}

int add_rowvec(Tape& t, int a, int b) {
  const Mat& va = t.value(a);
  const Mat& vb = t.value(b);
  if (vb.rows() != 1 || vb.cols() != va.cols()) {
    throw std::invalid_argument("add_rowvec: bias must be 1x" + std::to_string(va.cols()));
  }
  Mat out = va;
  out.rowwise() += vb.row(0);
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.emplace("add_rowvec", std::move(out), rg, [a, b](Tape& t, int self) {
    const Mat& g = t.grad_buffer(self);
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) += g.colwise().sum();
  });
}

int scale(Tape& t, int a, double c) {
  return t.emplace("scale", t.value(a) * c, t.requires_grad(a), [a, c](Tape& t, int self) {
    if (t.requires_grad(a)) t.grad_buffer(a) += c * t.grad_buffer(self);
  });
}

int relu(Tape& t, int a) {
  return t.emplace("relu", t.value(a).cwiseMax(0.0), t.requires_grad(a), [a](Tape& t, int self) {
    if (!t.requires_grad(a)) return;
    // subgradient 0 at exactly 0: mask is "strictly positive"
    t.grad_buffer(a).array() +=
        t.grad_buffer(self).array() * (t.value(a).array() > 0.0).cast<double>();
  });
}

int row_softmax(Tape& t, int a) {
  const Mat& va = t.value(a);
  Arr z = (va.array().colwise() - va.rowwise().maxCoeff().array()).exp();
  Mat y = (z.colwise() / z.rowwise().sum()).matrix();
  return t.emplace("row_softmax", std::move(y), t.requires_grad(a), [a](Tape& t, int self) {
    if (!t.requires_grad(a)) return;
    const Arr g = t.grad_buffer(self).array();
    const Arr y = t.value(self).array();
    Eigen::ArrayXd dot = (g * y).rowwise().sum();
    t.grad_buffer(a).array() += (g.colwise() - dot) * y;
  });
}

int row_l2_normalize(Tape& t, int a) {
  const Mat& va = t.value(a);
  Eigen::ArrayXd norms = va.rowwise().norm().array().max(kFloor);
  Mat y = (va.array().colwise() / norms).matrix();
  return t.emplace("row_l2_normalize", std::move(y), t.requires_grad(a), [a](Tape& t, int self) {
    if (!t.requires_grad(a)) return;
    const Mat& x = t.value(a);
    const Mat& y = t.value(self);
    const Mat& g = t.grad_buffer(self);
    Mat& gx = t.grad_buffer(a);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double r = x.row(i).norm();
      if (r > kFloor) {
        // d/dx (x/|x|): remove the radial component of the upstream gradient
        gx.row(i) += (g.row(i) - y.row(i) * y.row(i).dot(g.row(i))) / r;
      } else {
        gx.row(i) += g.row(i) / kFloor;
      }
    }
  });
}

int batch_norm(Tape& t, int x, int gamma, int beta, BatchNormState& state, bool training,
               bool track_running, double eps) {
  const Mat& vx = t.value(x);
  const Mat& vg = t.value(gamma);
  const Mat& vb = t.value(beta);
  const Eigen::Index d = vx.cols();
  if (vg.rows() != 1 || vg.cols() != d || vb.rows() != 1 || vb.cols() != d) {
    throw std::invalid_argument("batch_norm: gamma/beta must be 1x" + std::to_string(d));
  }
  bool rg = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);

  if (training) {
    if (vx.rows() < 2) {
      throw std::invalid_argument("batch_norm: training mode needs at least 2 rows");
    }
    Eigen::RowVectorXd mu = vx.colwise().mean();
    Mat xc = vx.rowwise() - mu;
    // biased variance (divide by n), eps inside the square root
    Eigen::RowVectorXd var = xc.array().square().colwise().mean();
    Eigen::RowVectorXd sigma = (var.array() + eps).sqrt();
    auto xhat = std::make_shared<Mat>((xc.array().rowwise() / sigma.array()).matrix());
    if (track_running) {
      state.mean = state.momentum * state.mean + (1.0 - state.momentum) * mu;
      state.var = state.momentum * state.var + (1.0 - state.momentum) * var;
    }
    Mat y = ((xhat->array().rowwise() * vg.row(0).array()).rowwise() + vb.row(0).array()).matrix();
    return t.emplace("batch_norm", std::move(y), rg,
                     [x, gamma, beta, xhat, sigma](Tape& t, int self) {
                       const Arr g = t.grad_buffer(self).array();
                       const Arr& xh = xhat->array();
                       if (t.requires_grad(gamma))
                         t.grad_buffer(gamma).array() += (g * xh).colwise().sum();
                       if (t.requires_grad(beta)) t.grad_buffer(beta).array() += g.colwise().sum();
                       if (!t.requires_grad(x)) return;
                       Arr dxhat = g.rowwise() * t.value(gamma).row(0).array();
                       Eigen::Array<double, 1, Eigen::Dynamic> m1 = dxhat.colwise().mean();
                       Eigen::Array<double, 1, Eigen::Dynamic> m2 = (dxhat * xh).colwise().mean();
                       t.grad_buffer(x).array() +=
                           ((dxhat.rowwise() - m1) - xh.rowwise() * m2).rowwise() /
                           sigma.array();
                     });
  }

  // eval: standardize with the stored running statistics
  if (state.mean.size() != d || state.var.size() != d) {
    throw std::invalid_argument("batch_norm: running statistics not initialized for eval mode");
  }
  Eigen::RowVectorXd sigma = (state.var.array() + eps).sqrt();
  auto xhat = std::make_shared<Mat>(
      ((vx.rowwise() - state.mean).array().rowwise() / sigma.array()).matrix());
  Mat y = ((xhat->array().rowwise() * vg.row(0).array()).rowwise() + vb.row(0).array()).matrix();
  return t.emplace("batch_norm", std::move(y), rg, [x, gamma, beta, xhat, sigma](Tape& t, int self) {
    const Arr g = t.grad_buffer(self).array();
    if (t.requires_grad(gamma)) t.grad_buffer(gamma).array() += (g * xhat->array()).colwise().sum();
    if (t.requires_grad(beta)) t.grad_buffer(beta).array() += g.colwise().sum();
    if (t.requires_grad(x)) {
      t.grad_buffer(x).array() +=
          (g.rowwise() * t.value(gamma).row(0).array()).rowwise() / sigma.array();
    }
  });
}

int dropout(Tape& t, int a, double p, Rng& stream) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
  const Mat& va = t.value(a);
  auto mask = std::make_shared<Mat>(va.rows(), va.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < va.rows(); ++i) {
    for (Eigen::Index j = 0; j < va.cols(); ++j) {
      (*mask)(i, j) = stream.uniform() >= p ? keep_scale : 0.0;
    }
  }
  return t.emplace("dropout", va.cwiseProduct(*mask), t.requires_grad(a),
                   [a, mask](Tape& t, int self) {
                     if (t.requires_grad(a))
                       t.grad_buffer(a).array() += t.grad_buffer(self).array() * mask->array();
                   });
}

int sum_all(Tape& t, int a) {
  Mat out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.emplace("sum_all", std::move(out), t.requires_grad(a), [a](Tape& t, int self) {
    if (t.requires_grad(a)) t.grad_buffer(a).array() += t.grad_buffer(self)(0, 0);
  });
}

int sharpen(Tape& t, int a, double temperature, bool stop_gradient) {
  if (temperature <= 0.0) throw std::invalid_argument("sharpen: temperature must be > 0");
  const Mat& va = t.value(a);
  for (Eigen::Index i = 0; i < va.rows(); ++i) {
    double s = va.row(i).sum();
    if (std::abs(s - 1.0) > 1e-6) {
      throw std::invalid_argument("sharpen: input row " + std::to_string(i) +
                                  " is not a probability distribution (sum=" + std::to_string(s) +
                                  ")");
    }
  }
  const double inv_t = 1.0 / temperature;
  Arr powed = va.array().pow(inv_t);
  Mat y = (powed.colwise() / powed.rowwise().sum()).matrix();
  bool rg = !stop_gradient && t.requires_grad(a);
  return t.emplace("sharpen", std::move(y), rg, [a, inv_t](Tape& t, int self) {
    if (!t.requires_grad(a)) return;
    const Arr g = t.grad_buffer(self).array();
    const Arr y = t.value(self).array();
    const Arr& p = t.value(a).array();
    // d s_r / d p_q = (1/T) (s_r / p_r) (delta_rq - s_q), so
    // dL/dp_r = (1/T)(s_r/p_r)(g_r - <g, s>)
    Eigen::ArrayXd dot = (g * y).rowwise().sum();
    Arr factor = (p > 0.0).select(y / p.max(1e-300), Arr::Zero(y.rows(), y.cols()));
    t.grad_buffer(a).array() += inv_t * factor * (g.colwise() - dot);
  });
}

int cross_entropy(Tape& t, int probs, const std::vector<int>& labels,
                  const std::vector<int>& mask) {
  if (mask.empty()) throw std::invalid_argument("cross_entropy: empty mask");
  const Mat& p = t.value(probs);
  if (labels.size() != static_cast<size_t>(p.rows())) {
    throw std::invalid_argument("cross_entropy: label count does not match rows");
  }
  double acc = 0.0;
  for (int i : mask) {
    if (i < 0 || i >= p.rows()) throw std::invalid_argument("cross_entropy: mask index out of range");
    int y = labels[i];
    if (y < 0 || y >= p.cols()) throw std::invalid_argument("cross_entropy: label out of range");
    acc -= std::log(std::max(p(i, y), kFloor));
  }
  Mat out(1, 1);
  out(0, 0) = acc / static_cast<double>(mask.size());
  // copy labels/mask: the closure may outlive the caller's vectors
  return t.emplace("cross_entropy", std::move(out), t.requires_grad(probs),
                   [probs, labels, mask](Tape& t, int self) {
                     if (!t.requires_grad(probs)) return;
                     const double g = t.grad_buffer(self)(0, 0) / static_cast<double>(mask.size());
                     const Mat& p = t.value(probs);
                     Mat& gp = t.grad_buffer(probs);
                     for (int i : mask) {
                       double pi = p(i, labels[i]);
                       if (pi > kFloor) gp(i, labels[i]) -= g / pi;  // floored region has zero slope
                     }
                   });
}

double grad_check(const std::function<LossGraph(Tape&)>& build_loss,
                  const std::vector<Mat*>& params, double step) {
  Tape t;
  LossGraph lg = build_loss(t);
  t.backward(lg.loss);
  if (lg.param_nodes.size() != params.size()) {
    throw std::invalid_argument("grad_check: param_nodes/params size mismatch");
  }
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (int id : lg.param_nodes) analytic.push_back(t.grad(id));

  auto loss_at = [&]() {
    Tape probe;
    LossGraph g = build_loss(probe);
    return probe.value(g.loss)(0, 0);
  };

  double max_rel = 0.0;
  for (size_t k = 0; k < params.size(); ++k) {
    Mat& p = *params[k];
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double orig = p(i, j);
        p(i, j) = orig + step;
        const double lp = loss_at();
        p(i, j) = orig - step;
        const double lm = loss_at();
        p(i, j) = orig;
        const double numeric = (lp - lm) / (2.0 * step);
        const double rel = std::abs(analytic[k](i, j) - numeric) / std::max(1.0, std::abs(numeric));
        max_rel = std::max(max_rel, rel);
      }
    }
  }
  return max_rel;
}

}  // namespace bagcn
