#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "bagcn/ops.hpp"
#include "bagcn/rng.hpp"
#include "bagcn/sparse.hpp"

#include "../support/test_helpers.hpp"

using namespace bagcn;

namespace {

constexpr double kFdStep = 1e-6;
constexpr double kFdTol = 1e-6;  // functional bugs show up around 1e-3

// entries bounded away from relu's kink so central differences stay clean
Mat smooth_random(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double v = rng.normal();
      m(i, j) = v + (v >= 0.0 ? 0.05 : -0.05);
    }
  }
  return m;
}

// Asymmetric positive weights over the op output; a plain sum would be blind
// to transposed or permuted outputs.
int weighted_sum(Tape& t, int out, std::uint64_t wseed) {
  Rng wr(wseed);
  const Mat& v = t.value(out);
  Mat w(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) w(i, j) = wr.uniform(0.5, 1.5);
  }
  return sum_all(t, hadamard(t, out, t.leaf(w, false)));
}

// FD-checks d(weighted_sum(wire(params)))/d(params) against the tape.
double fd_check(std::vector<Mat*> params,
                const std::function<int(Tape&, const std::vector<int>&)>& wire) {
  auto build = [&](Tape& t) -> LossGraph {
    std::vector<int> ids;
    ids.reserve(params.size());
    for (Mat* p : params) ids.push_back(t.leaf(*p, true));
    return {weighted_sum(t, wire(t, ids), 99), ids};
  };
  return grad_check(build, params, kFdStep);
}

}  // namespace

TEST_CASE("matmul forward and gradient") {
  Rng rng(10);
  Mat a = smooth_random(4, 3, rng), b = smooth_random(3, 5, rng);
  {
    Tape t;
    int y = matmul(t, t.leaf(a, false), t.leaf(b, false));
    CHECK((t.value(y) - a * b).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK(fd_check({&a, &b}, [](Tape& t, const std::vector<int>& p) {
          return matmul(t, p[0], p[1]);
        }) < kFdTol);
}

TEST_CASE("matmul_nt equals matmul with explicit transpose") {
  Rng rng(11);
  Mat a = smooth_random(4, 3, rng), b = smooth_random(6, 3, rng);
  {
    Tape t;
    int y = matmul_nt(t, t.leaf(a, false), t.leaf(b, false));
    Mat want = a * b.transpose();
    CHECK((t.value(y) - want).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK(fd_check({&a, &b}, [](Tape& t, const std::vector<int>& p) {
          return matmul_nt(t, p[0], p[1]);
        }) < kFdTol);
}

TEST_CASE("spmm matches densified product and routes gradient to the dense side") {
  Rng rng(12);
  SparseMatrix s = sparse_from_triples(
      5, {{0, 1, 0.5}, {1, 0, 0.5}, {1, 2, -1.0}, {2, 1, -1.0}, {3, 3, 2.0}, {2, 4, 0.25}, {4, 2, 0.25}});
  Mat d = smooth_random(5, 3, rng);
  {
    Tape t;
    int y = spmm(t, s, t.leaf(d, false));
    CHECK((t.value(y) - s.densify() * d).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK(fd_check({&d}, [&](Tape& t, const std::vector<int>& p) {
          return spmm(t, s, p[0]);
        }) < kFdTol);
}

TEST_CASE("elementwise ops: forward values and gradients") {
  Rng rng(13);
  Mat a = smooth_random(3, 4, rng), b = smooth_random(3, 4, rng);

  SUBCASE("add") {
    Tape t;
    CHECK((t.value(add(t, t.leaf(a, false), t.leaf(b, false))) - (a + b)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(fd_check({&a, &b}, [](Tape& t, const std::vector<int>& p) {
            return add(t, p[0], p[1]);
          }) < kFdTol);
  }
  SUBCASE("sub") {
    CHECK(fd_check({&a, &b}, [](Tape& t, const std::vector<int>& p) {
            return sub(t, p[0], p[1]);
          }) < kFdTol);
  }
  SUBCASE("hadamard") {
    Tape t;
    // materialize both sides: comparing against a lazy product expression
    // would let the compiler fuse multiply and subtract into an FMA
    Mat want = a.cwiseProduct(b);
    Mat got = t.value(hadamard(t, t.leaf(a, false), t.leaf(b, false)));
    CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
    CHECK(fd_check({&a, &b}, [](Tape& t, const std::vector<int>& p) {
            return hadamard(t, p[0], p[1]);
          }) < kFdTol);
  }
  SUBCASE("scale") {
    Tape t;
    Mat want = -2.5 * a;
    Mat got = t.value(scale(t, t.leaf(a, false), -2.5));
    CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
    CHECK(fd_check({&a}, [](Tape& t, const std::vector<int>& p) {
            return scale(t, p[0], -2.5);
          }) < kFdTol);
  }
}

TEST_CASE("add_rowvec broadcasts a bias row") {
  Rng rng(14);
  Mat a = smooth_random(4, 3, rng), bias = smooth_random(1, 3, rng);
  {
    Tape t;
    Mat got = t.value(add_rowvec(t, t.leaf(a, false), t.leaf(bias, false)));
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(got(i, j) == a(i, j) + bias(0, j));
    }
  }
  CHECK(fd_check({&a, &bias}, [](Tape& t, const std::vector<int>& p) {
          return add_rowvec(t, p[0], p[1]);
        }) < kFdTol);
}

TEST_CASE("relu clamps negatives and passes gradient through positives") {
  Mat a(2, 2);
  a << -1.0, 2.0, 0.5, -0.25;
  Tape t;
  Mat got = t.value(relu(t, t.leaf(a, false)));
  Mat want(2, 2);
  want << 0.0, 2.0, 0.5, 0.0;
  CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(15);
  Mat x = smooth_random(3, 4, rng);
  CHECK(fd_check({&x}, [](Tape& t, const std::vector<int>& p) {
          return relu(t, p[0]);
        }) < kFdTol);
}

TEST_CASE("row_softmax: hand value, row sums, shift invariance, gradient") {
  Mat a(1, 2);
  a << 0.0, std::log(2.0);
  {
    Tape t;
    Mat got = t.value(row_softmax(t, t.leaf(a, false)));
    CHECK(got(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(got(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }
  Rng rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    Mat z = test::random_mat(5, 7, rng, 3.0);
    Tape t;
    Mat p = t.value(row_softmax(t, t.leaf(z, false)));
    for (int i = 0; i < 5; ++i) {
      CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-12);
      for (int j = 0; j < 7; ++j) CHECK(p(i, j) > 0.0);
    }
    // softmax(z + c) == softmax(z) rowwise
    Mat shifted = z;
    shifted.array() += 10.0;
    Tape t2;
    Mat p2 = t2.value(row_softmax(t2, t2.leaf(shifted, false)));
    CHECK((p - p2).cwiseAbs().maxCoeff() < 1e-12);
  }
  // extreme logits stay finite thanks to max subtraction
  Mat big(1, 3);
  big << 1000.0, 999.0, -1000.0;
  Tape t3;
  Mat p3 = t3.value(row_softmax(t3, t3.leaf(big, false)));
  CHECK(std::abs(p3.row(0).sum() - 1.0) < 1e-12);

  Mat z = test::random_mat(4, 5, rng);
  CHECK(fd_check({&z}, [](Tape& t, const std::vector<int>& p) {
          return row_softmax(t, p[0]);
        }) < kFdTol);
}

TEST_CASE("row_l2_normalize: hand value and gradient") {
  Mat a(1, 2);
  a << 3.0, 4.0;
  Tape t;
  Mat got = t.value(row_l2_normalize(t, t.leaf(a, false)));
  CHECK(got(0, 0) == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(got(0, 1) == doctest::Approx(0.8).epsilon(1e-14));

  Rng rng(17);
  Mat x = smooth_random(4, 3, rng);
  CHECK(fd_check({&x}, [](Tape& t, const std::vector<int>& p) {
          return row_l2_normalize(t, p[0]);
        }) < kFdTol);
}

TEST_CASE("batch_norm training mode: hand value, gradient, running stats") {
  Mat x(2, 1), gamma(1, 1), beta(1, 1);
  x << 1.0, 3.0;
  gamma << 2.0;
  beta << 0.5;
  BatchNormState st;
  st.reset(1);
  {
    Tape t;
    int y = batch_norm(t, t.leaf(x, false), t.leaf(gamma, false), t.leaf(beta, false), st, true,
                       false);
    // mu=2, biased var=1, sigma=sqrt(1+eps)
    double sigma = std::sqrt(1.0 + 1e-5);
    CHECK(t.value(y)(0, 0) == doctest::Approx(0.5 - 2.0 / sigma).epsilon(1e-12));
    CHECK(t.value(y)(1, 0) == doctest::Approx(0.5 + 2.0 / sigma).epsilon(1e-12));
    // track_running=false leaves the state untouched
    CHECK(st.mean(0) == 0.0);
    CHECK(st.var(0) == 1.0);
  }
  {
    Tape t;
    batch_norm(t, t.leaf(x, false), t.leaf(gamma, false), t.leaf(beta, false), st, true, true);
    CHECK(st.mean(0) == doctest::Approx(0.9 * 0.0 + 0.1 * 2.0).epsilon(1e-12));
    CHECK(st.var(0) == doctest::Approx(0.9 * 1.0 + 0.1 * 1.0).epsilon(1e-12));
  }

  Rng rng(18);
  Mat xr = smooth_random(6, 4, rng), g = smooth_random(1, 4, rng), b = smooth_random(1, 4, rng);
  BatchNormState st2;
  st2.reset(4);
  CHECK(fd_check({&xr, &g, &b}, [&](Tape& t, const std::vector<int>& p) {
          return batch_norm(t, p[0], p[1], p[2], st2, true, false);
        }) < kFdTol);
}

TEST_CASE("batch_norm inference mode uses the stored statistics") {
  Mat x(2, 1), gamma(1, 1), beta(1, 1);
  x << 1.0, 3.0;
  gamma << 1.0;
  beta << 0.0;
  BatchNormState st;
  st.reset(1);
  st.mean(0) = 1.0;
  st.var(0) = 4.0;
  Tape t;
  int y = batch_norm(t, t.leaf(x, false), t.leaf(gamma, false), t.leaf(beta, false), st, false,
                     false);
  double sigma = std::sqrt(4.0 + 1e-5);
  CHECK(t.value(y)(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.value(y)(1, 0) == doctest::Approx(2.0 / sigma).epsilon(1e-12));
}

TEST_CASE("batch_norm rejects a single training row") {
  Mat x(1, 2), gamma(1, 2), beta(1, 2);
  x << 1.0, 2.0;
  gamma << 1.0, 1.0;
  beta << 0.0, 0.0;
  BatchNormState st;
  st.reset(2);
  Tape t;
  CHECK_THROWS_AS(
      batch_norm(t, t.leaf(x, false), t.leaf(gamma, false), t.leaf(beta, false), st, true, false),
      std::invalid_argument);
}

TEST_CASE("dropout: inverted scaling, determinism, gradient is the mask") {
  Mat x = Mat::Ones(200, 50);
  const double p = 0.4;
  Rng stream(mix_seed(0, kStreamDropout));
  Tape t;
  int xid = t.leaf(x, true);
  int y = dropout(t, xid, p, stream);
  const Mat& v = t.value(y);

  int kept = 0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      if (v(i, j) != 0.0) {
        CHECK(v(i, j) == doctest::Approx(1.0 / (1.0 - p)).epsilon(1e-12));
        ++kept;
      }
    }
  }
  // keep rate concentrates around 1-p
  double rate = static_cast<double>(kept) / static_cast<double>(v.size());
  CHECK(rate > 0.55);
  CHECK(rate < 0.65);

  // gradient through the same mask: d(sum(y))/dx = mask / (1-p)
  t.backward(sum_all(t, y));
  Mat g = t.grad(xid);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) CHECK(g(i, j) == v(i, j));
  }

  // identical stream -> identical mask
  Rng stream2(mix_seed(0, kStreamDropout));
  Tape t2;
  Mat v2 = t2.value(dropout(t2, t2.leaf(x, false), p, stream2));
  CHECK((v - v2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sum_all reduces to a 1x1 total") {
  Mat a(2, 2);
  a << 1.0, 2.0, 3.0, 4.5;
  Tape t;
  int y = sum_all(t, t.leaf(a, false));
  CHECK(t.value(y).rows() == 1);
  CHECK(t.value(y).cols() == 1);
  CHECK(t.value(y)(0, 0) == 10.5);
}

TEST_CASE("sharpen: hand value, invariants, gradient through the simplex") {
  Mat p(1, 2);
  p << 0.8, 0.2;
  {
    Tape t;
    Mat got = t.value(sharpen(t, t.leaf(p, false), 0.5, false));
    // 0.8^2 / (0.8^2 + 0.2^2) = 16/17
    CHECK(got(0, 0) == doctest::Approx(16.0 / 17.0).epsilon(1e-14));
    CHECK(got(0, 1) == doctest::Approx(1.0 / 17.0).epsilon(1e-14));
  }
  {
    // stop_gradient severs the backward path
    Tape t;
    int pid = t.leaf(p, true);
    int y = sharpen(t, pid, 0.5, true);
    CHECK_FALSE(t.requires_grad(y));
    t.backward(sum_all(t, y));
    CHECK(t.grad(pid).cwiseAbs().maxCoeff() == 0.0);
  }
  {
    // non-probability input is rejected
    Mat bad(1, 2);
    bad << 0.9, 0.9;
    Tape t;
    CHECK_THROWS_AS(sharpen(t, t.leaf(bad, false), 0.5, false), std::invalid_argument);
    CHECK_THROWS_AS(sharpen(t, t.leaf(p, false), 0.0, false), std::invalid_argument);
  }

  // FD through softmax -> sharpen so perturbed params stay on the simplex
  Rng rng(19);
  Mat z = test::random_mat(4, 5, rng);
  CHECK(fd_check({&z}, [](Tape& t, const std::vector<int>& p) {
          return sharpen(t, row_softmax(t, p[0]), 0.7, false);
        }) < kFdTol);
}

TEST_CASE("cross_entropy: hand value and gradient") {
  Mat p(2, 2);
  p << 0.5, 0.5, 0.25, 0.75;
  std::vector<int> labels = {0, 1};
  {
    Tape t;
    int y = cross_entropy(t, t.leaf(p, false), labels, {0, 1});
    double want = 0.5 * (-std::log(0.5) - std::log(0.75));
    CHECK(t.value(y)(0, 0) == doctest::Approx(want).epsilon(1e-14));
  }
  {
    // mask restricts the mean
    Tape t;
    int y = cross_entropy(t, t.leaf(p, false), labels, {1});
    CHECK(t.value(y)(0, 0) == doctest::Approx(-std::log(0.75)).epsilon(1e-14));
  }
  {
    Tape t;
    CHECK_THROWS_AS(cross_entropy(t, t.leaf(p, false), labels, {}), std::invalid_argument);
    CHECK_THROWS_AS(cross_entropy(t, t.leaf(p, false), labels, {5}), std::invalid_argument);
  }

  Rng rng(20);
  Mat z = test::random_mat(6, 3, rng);
  std::vector<int> ls = {0, 1, 2, 0, 1, 2};
  CHECK(fd_check({&z}, [&](Tape& t, const std::vector<int>& p) {
          // wrap in scale so the 1x1 CE node is not the weighted-sum target
          return scale(t, cross_entropy(t, row_softmax(t, p[0]), ls, {0, 2, 3, 5}), 2.0);
        }) < kFdTol);
}

TEST_CASE("tape mechanics") {
  SUBCASE("dead branches read as zero gradient") {
    Mat a = Mat::Ones(2, 2);
    Tape t;
    int live = t.leaf(a, true);
    int dead = t.leaf(a, true);
    t.backward(sum_all(t, live));
    CHECK(t.grad(dead).cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.grad(live).cwiseAbs().minCoeff() == 1.0);
  }
  SUBCASE("backward demands a scalar node") {
    Mat a = Mat::Ones(2, 2);
    Tape t;
    int id = t.leaf(a, true);
    CHECK_THROWS_AS(t.backward(id), std::invalid_argument);
  }
  SUBCASE("non-finite forward values are rejected at creation") {
    Mat a(1, 1);
    a << std::numeric_limits<double>::quiet_NaN();
    Tape t;
    CHECK_THROWS_WITH_AS(t.leaf(a, false), doctest::Contains("non-finite"), std::runtime_error);
  }
  SUBCASE("requires_grad propagates through ops") {
    Mat a = Mat::Ones(2, 2);
    Tape t;
    int frozen = add(t, t.leaf(a, false), t.leaf(a, false));
    CHECK_FALSE(t.requires_grad(frozen));
    int live = add(t, t.leaf(a, true), t.leaf(a, false));
    CHECK(t.requires_grad(live));
  }
  SUBCASE("gradient accumulates across fan-out") {
    Mat a = Mat::Ones(1, 1);
    Tape t;
    int x = t.leaf(a, true);
    int y = add(t, x, x);  // dy/dx = 2
    t.backward(sum_all(t, y));
    CHECK(t.grad(x)(0, 0) == 2.0);
  }
}

TEST_CASE("grad_check flags an intentionally corrupted gradient") {
  // the same trick model_grad_check uses: backward scaled by 1.01 must be
  // caught, proving the harness can actually fail
  Rng rng(21);
  Mat a = smooth_random(3, 3, rng);
  auto corrupted = [&](Tape& t) -> LossGraph {
    int x = t.leaf(a, true);
    int y = t.emplace("bad_identity", t.value(x), true, [x](Tape& t, int self) {
      t.grad_buffer(x) += 1.01 * t.grad_buffer(self);
    });
    return {weighted_sum(t, y, 7), {x}};
  };
  CHECK(grad_check(corrupted, {&a}, kFdStep) > 1e-3);
}
