#pragma once

#include <Eigen/QR>
#include <string>
#include <vector>

#include "nlddd/decomposition.hpp"
#include "nlddd/error.hpp"
#include "nlddd/sparse.hpp"

namespace nlddd {

enum class ConstraintMode { NonRedundant, Redundant };

inline const char* to_string(ConstraintMode m) { return m == ConstraintMode::NonRedundant ? "nonredundant" : "redundant"; }

/// Signed incidence matrix M = (M_1 ... M_Ns) with sum_n M_n u_n = 0.
/// Row k reads (u_plus)_{col_plus} - (u_minus)_{col_minus} = 0.
struct ConstraintMatrix {
  struct Row {
    std::size_t node;  // global node id
    int plus;          // subdomain carrying +1 (the lower id)
    int minus;         // subdomain carrying -1
    int col_plus;      // local column in M_plus
    int col_minus;     // local column in M_minus
  };

  ConstraintMode mode = ConstraintMode::NonRedundant;
  std::vector<Row> rows;
  std::vector<SparseMatrix> blocks;  // M_n, rows() x N_n

  std::size_t num_rows() const { return rows.size(); }
};

inline ConstraintMatrix build_constraints(const DecompIndex& index, ConstraintMode mode) {
  ConstraintMatrix c;
  c.mode = mode;
  for (std::size_t node = 0; node < index.theta.size(); ++node) {
    const auto& th = index.theta[node];
    if (th.size() < 2) continue;
    auto add = [&](int n, int np) {
      const int jp = index.local_index(static_cast<std::size_t>(n), node);
      const int jm = index.local_index(static_cast<std::size_t>(np), node);
      if (jp < 0 || jm < 0 || jp >= static_cast<int>(index.num_unknowns[static_cast<std::size_t>(n)]) ||
          jm >= static_cast<int>(index.num_unknowns[static_cast<std::size_t>(np)])) {
        throw Error(ErrorCode::InvalidDecomposition,
                    "node " + std::to_string(node) + " is missing from the unknowns of a subdomain in its interface set");
      }
      c.rows.push_back({node, n, np, jp, jm});
    };
    if (mode == ConstraintMode::NonRedundant) {
      for (std::size_t k = 0; k + 1 < th.size(); ++k) add(th[k], th[k + 1]);
    } else {
      for (std::size_t a = 0; a < th.size(); ++a) {
        for (std::size_t b = a + 1; b < th.size(); ++b) add(th[a], th[b]);
      }
    }
  }
  const int nrows = static_cast<int>(c.rows.size());
  std::vector<std::vector<Eigen::Triplet<double>>> trips(index.count());
  for (int k = 0; k < nrows; ++k) {
    const auto& r = c.rows[static_cast<std::size_t>(k)];
    trips[static_cast<std::size_t>(r.plus)].emplace_back(k, r.col_plus, 1.0);
    trips[static_cast<std::size_t>(r.minus)].emplace_back(k, r.col_minus, -1.0);
  }
  c.blocks.resize(index.count());
  for (std::size_t n = 0; n < index.count(); ++n) {
    c.blocks[n].resize(nrows, static_cast<int>(index.num_unknowns[n]));
    c.blocks[n].setFromTriplets(trips[n].begin(), trips[n].end());
    c.blocks[n].makeCompressed();
  }
  return c;
}

/// Dense copy of M with subdomain blocks side by side.
inline DenseMatrix to_dense(const ConstraintMatrix& c) {
  Eigen::Index cols = 0;
  for (const auto& b : c.blocks) cols += b.cols();
  DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(c.num_rows()), cols);
  Eigen::Index offset = 0;
  for (const auto& b : c.blocks) {
    m.middleCols(offset, b.cols()) = DenseMatrix(b);
    offset += b.cols();
  }
  return m;
}

inline Eigen::Index numerical_rank(const DenseMatrix& m) {
  if (m.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<DenseMatrix> qr(m.transpose());
  qr.setThreshold(1e-10);
  return qr.rank();
}

struct ConstraintReport {
  bool passed = true;
  std::size_t expected_rows = 0;
  std::size_t rank = 0;
  bool rank_checked = false;
  std::vector<std::string> problems;
};

/// Dense rank checks run only up to this many rows.
inline constexpr std::size_t kDenseRankLimit = 2000;

inline ConstraintReport verify_constraint_matrix(const ConstraintMatrix& c, const DecompIndex& index) {
  ConstraintReport rep;
  for (const auto& th : index.theta) {
    const std::size_t m = th.size();
    if (m < 2) continue;
    rep.expected_rows += c.mode == ConstraintMode::NonRedundant ? m - 1 : m * (m - 1) / 2;
  }
  if (rep.expected_rows != c.num_rows()) {
    rep.problems.push_back("row count " + std::to_string(c.num_rows()) + " differs from expected " +
                           std::to_string(rep.expected_rows));
  }
  // Exactly one +1 and one -1 per row.
  std::vector<int> plus(c.num_rows(), 0), minus(c.num_rows(), 0), other(c.num_rows(), 0);
  for (const auto& b : c.blocks) {
    for (int r = 0; r < b.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(b, r); it; ++it) {
        if (it.value() == 1.0) {
          ++plus[static_cast<std::size_t>(r)];
        } else if (it.value() == -1.0) {
          ++minus[static_cast<std::size_t>(r)];
        } else if (it.value() != 0.0) {
          ++other[static_cast<std::size_t>(r)];
        }
      }
    }
  }
  for (std::size_t k = 0; k < c.num_rows(); ++k) {
    if (plus[k] != 1 || minus[k] != 1 || other[k] != 0) {
      rep.problems.push_back("row " + std::to_string(k) + " is not a signed incidence row");
    }
  }
  if (c.num_rows() > 0 && c.num_rows() <= kDenseRankLimit) {
    rep.rank = static_cast<std::size_t>(numerical_rank(to_dense(c)));
    rep.rank_checked = true;
    if (c.mode == ConstraintMode::NonRedundant && rep.rank != c.num_rows()) {
      rep.problems.push_back("non-redundant matrix has rank " + std::to_string(rep.rank) + " < " +
                             std::to_string(c.num_rows()));
    }
  }
  rep.passed = rep.problems.empty();
  return rep;
}

/// Rank deficiency of the redundant constraint set: sum over nodes with m >= 3 of
/// m(m-1)/2 - (m-1).
inline std::size_t redundant_deficiency(const DecompIndex& index) {
  std::size_t d = 0;
  for (const auto& th : index.theta) {
    const std::size_t m = th.size();
    if (m >= 3) d += m * (m - 1) / 2 - (m - 1);
  }
  return d;
}

inline double constraint_violation(const ConstraintMatrix& c, const std::vector<Vector>& u) {
  if (u.size() != c.blocks.size()) throw Error(ErrorCode::DimensionMismatch, "constraint_violation: subdomain count");
  for (std::size_t n = 0; n < u.size(); ++n) {
    if (u[n].size() != c.blocks[n].cols()) throw Error(ErrorCode::DimensionMismatch, "constraint_violation: block size");
  }
  double worst = 0.0;
  for (const auto& r : c.rows) {
    const double v = u[static_cast<std::size_t>(r.plus)][r.col_plus] - u[static_cast<std::size_t>(r.minus)][r.col_minus];
    worst = std::max(worst, std::abs(v));
  }
  return worst;
}

}  // namespace nlddd
