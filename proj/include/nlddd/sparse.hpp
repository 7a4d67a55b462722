#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "nlddd/error.hpp"

namespace nlddd {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

/// Collects (row, col, key, value) contributions and sums them in a fixed order.
///
/// Entries are sorted by (row, col, key) before summation, so the result does not
/// depend on the order in which contributions were generated. Keys are the
/// element-pair or element ids that produced the contribution.
class OrderedAccumulator {
 public:
  struct Entry {
    int row;
    int col;
    std::uint64_t key;
    double value;
  };

  void reserve(std::size_t n) { entries_.reserve(n); }
  void add(int row, int col, std::uint64_t key, double value) { entries_.push_back({row, col, key, value}); }
  std::size_t size() const { return entries_.size(); }

  /// Consolidates into a compressed row matrix; sums that are exactly zero are dropped.
  SparseMatrix to_matrix(int rows, int cols) {
    sort();
    std::vector<Eigen::Triplet<double>> triplets;
    for_each_sum([&](int r, int c, double v) {
      if (v != 0.0) triplets.emplace_back(r, c, v);
    });
    SparseMatrix m(rows, cols);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
  }

  /// Consolidates entries with col == 0 into a dense vector.
  Vector to_vector(int rows) {
    sort();
    Vector v = Vector::Zero(rows);
    for_each_sum([&](int r, int, double s) { v[r] = s; });
    return v;
  }

 private:
  void sort() {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return std::tie(a.row, a.col, a.key) < std::tie(b.row, b.col, b.key);
    });
  }

  template <class Fn>
  void for_each_sum(Fn&& fn) const {
    std::size_t i = 0;
    while (i < entries_.size()) {
      const int r = entries_[i].row;
      const int c = entries_[i].col;
      double sum = 0.0;
      for (; i < entries_.size() && entries_[i].row == r && entries_[i].col == c; ++i) sum += entries_[i].value;
      fn(r, c, sum);
    }
  }

  std::vector<Entry> entries_;
};

/// y = A x, accumulated row by row in stored column order.
inline Vector apply(const SparseMatrix& a, const Vector& x) {
  if (a.cols() != x.size()) throw Error(ErrorCode::DimensionMismatch, "matrix-vector product");
  Vector y = Vector::Zero(a.rows());
  for (int r = 0; r < a.outerSize(); ++r) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) s += it.value() * x[it.col()];
    y[r] = s;
  }
  return y;
}

inline double inf_norm(const SparseMatrix& a) {
  double best = 0.0;
  for (int r = 0; r < a.outerSize(); ++r) {
    double s = 0.0;
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

/// Row-sum norm of A - A^T.
inline double symmetry_defect(const SparseMatrix& a) {
  SparseMatrix t = a.transpose();
  SparseMatrix d = a - t;
  return inf_norm(d);
}

inline bool bitwise_equal(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
  for (int r = 0; r < a.outerSize(); ++r) {
    SparseMatrix::InnerIterator ia(a, r), ib(b, r);
    for (; ia && ib; ++ia, ++ib) {
      if (ia.col() != ib.col() || ia.value() != ib.value()) return false;
    }
    if (ia || ib) return false;
  }
  return true;
}

inline bool bitwise_equal(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

/// Worker count for pair-parallel kernels: NLDDD_THREADS, default 1.
inline unsigned worker_threads() {
  if (const char* env = std::getenv("NLDDD_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(std::min<long>(n, 256));
  }
  return 1;
}

/// Runs fn(i) for i in [0, count) on `worker_threads()` threads, contiguous chunks.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned workers = std::min<std::size_t>(worker_threads(), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace nlddd
