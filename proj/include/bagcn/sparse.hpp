#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace bagcn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Symmetric n x n CSR matrix. Immutable after construction; the message
// passing operator is built once per graph and shared read-only.
struct SparseMatrix {
  int n = 0;
  std::vector<std::int64_t> row_ptr;  // size n+1, row_ptr[0]=0
  std::vector<int> col_idx;           // strictly increasing within each row
  std::vector<double> values;

  std::int64_t nnz() const { return static_cast<std::int64_t>(col_idx.size()); }

  // Validates the CSR invariants plus symmetry; throws on violation.
  void check() const;

  Mat densify() const;

  // y = S * d  (no autodiff here; the tape op wraps this kernel)
  Mat multiply(const Mat& d) const;
};

// Builds CSR from (row, col, value) triples that must already describe a full
// symmetric pattern; duplicates are an error.
SparseMatrix sparse_from_triples(int n, std::vector<std::tuple<int, int, double>> triples);

}  // namespace bagcn
