#include "bagcn/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bagcn {

void SparseMatrix::check() const {
  if (n < 0) throw std::invalid_argument("sparse: negative dimension");
  if (row_ptr.size() != static_cast<size_t>(n) + 1 || row_ptr[0] != 0 ||
      row_ptr[n] != nnz()) {
    throw std::invalid_argument("sparse: bad row_ptr");
  }
  for (int i = 0; i < n; ++i) {
    if (row_ptr[i] > row_ptr[i + 1]) throw std::invalid_argument("sparse: row_ptr decreases");
    for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      if (col_idx[k] < 0 || col_idx[k] >= n) throw std::invalid_argument("sparse: column out of range");
      if (k > row_ptr[i] && col_idx[k] <= col_idx[k - 1]) {
        throw std::invalid_argument("sparse: columns not strictly increasing in row " + std::to_string(i));
      }
    }
  }
  // symmetry: every (i,j,v) needs a matching (j,i,v)
  auto at = [&](int i, int j) -> const double* {
    auto begin = col_idx.begin() + row_ptr[i];
    auto end = col_idx.begin() + row_ptr[i + 1];
    auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return nullptr;
    return &values[static_cast<size_t>(it - col_idx.begin())];
  };
  for (int i = 0; i < n; ++i) {
    for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      const double* mirror = at(col_idx[k], i);
      if (mirror == nullptr || *mirror != values[k]) {
        throw std::invalid_argument("sparse: not symmetric at (" + std::to_string(i) + "," +
                                    std::to_string(col_idx[k]) + ")");
      }
    }
  }
}

Mat SparseMatrix::densify() const {
  Mat d = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) d(i, col_idx[k]) = values[k];
  }
  return d;
}

Mat SparseMatrix::multiply(const Mat& d) const {
  if (d.rows() != n) throw std::invalid_argument("spmm: dimension mismatch");
  Mat out = Mat::Zero(n, d.cols());
  for (int i = 0; i < n; ++i) {
    auto row = out.row(i);
    for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      row += values[k] * d.row(col_idx[k]);
    }
  }
  return out;
}

SparseMatrix sparse_from_triples(int n, std::vector<std::tuple<int, int, double>> triples) {
  std::sort(triples.begin(), triples.end(), [](const auto& a, const auto& b) {
    return std::pair(std::get<0>(a), std::get<1>(a)) < std::pair(std::get<0>(b), std::get<1>(b));
  });
  SparseMatrix s;
  s.n = n;
  s.row_ptr.assign(static_cast<size_t>(n) + 1, 0);
  s.col_idx.reserve(triples.size());
  s.values.reserve(triples.size());
  int prev_r = -1, prev_c = -1;
  for (const auto& [r, c, v] : triples) {
    if (r < 0 || r >= n || c < 0 || c >= n) throw std::invalid_argument("sparse: entry out of range");
    if (r == prev_r && c == prev_c) throw std::invalid_argument("sparse: duplicate entry");
    prev_r = r;
    prev_c = c;
    s.row_ptr[r + 1]++;
    s.col_idx.push_back(c);
    s.values.push_back(v);
  }
  for (int i = 0; i < n; ++i) s.row_ptr[i + 1] += s.row_ptr[i];
  s.check();
  return s;
}

}  // namespace bagcn
