#pragma once

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nlddd/assembly_multi.hpp"
#include "nlddd/constraints.hpp"
#include "nlddd/error.hpp"
#include "nlddd/sparse.hpp"

namespace nlddd {

/// Saddle-point system
///   [ diag(A_1..A_Ns)  M^T ] [ u      ]   [ b ]
///   [ M                0   ] [ lambda ] = [ 0 ]
/// Stationarity reads A_n u_n + M_n^T lambda = b_n.
struct KKTSystem {
  SparseMatrix matrix;
  Vector rhs;
  std::vector<Eigen::Index> offsets;  // start of each u_n in the stacked vector
  Eigen::Index num_primal = 0;
  Eigen::Index num_constraints = 0;
  std::vector<Eigen::Index> sizes;    // N_n
};

inline KKTSystem assemble_kkt(const std::vector<SubdomainSystem>& systems, const ConstraintMatrix& c) {
  if (c.mode != ConstraintMode::NonRedundant) {
    throw Error(ErrorCode::InvalidArgument,
                "the direct KKT path needs non-redundant constraints; redundant rows make the system singular");
  }
  if (c.blocks.size() != systems.size()) throw Error(ErrorCode::DimensionMismatch, "assemble_kkt: subdomain count");
  KKTSystem kkt;
  for (const auto& s : systems) {
    kkt.offsets.push_back(kkt.num_primal);
    kkt.num_primal += static_cast<Eigen::Index>(s.size());
    kkt.sizes.push_back(static_cast<Eigen::Index>(s.size()));
  }
  kkt.num_constraints = static_cast<Eigen::Index>(c.num_rows());
  const Eigen::Index total = kkt.num_primal + kkt.num_constraints;
  std::vector<Eigen::Triplet<double>> trips;
  kkt.rhs = Vector::Zero(total);
  for (std::size_t n = 0; n < systems.size(); ++n) {
    const auto off = kkt.offsets[n];
    const SparseMatrix& a = systems[n].a;
    for (int r = 0; r < a.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(a, r); it; ++it) trips.emplace_back(off + r, off + it.col(), it.value());
    }
    const SparseMatrix& m = c.blocks[n];
    if (m.cols() != a.rows()) throw Error(ErrorCode::DimensionMismatch, "assemble_kkt: constraint block width");
    for (int r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
        trips.emplace_back(kkt.num_primal + r, off + it.col(), it.value());
        trips.emplace_back(off + it.col(), kkt.num_primal + r, it.value());
      }
    }
    kkt.rhs.segment(off, a.rows()) = systems[n].b;
  }
  kkt.matrix.resize(total, total);
  kkt.matrix.setFromTriplets(trips.begin(), trips.end());
  kkt.matrix.makeCompressed();
  return kkt;
}

struct DDSolution {
  std::vector<Vector> u;
  Vector lambda;
  double residual = 0.0;  // relative residual of the KKT system
};

/// Direct solve of the monolithic KKT system (sparse LU with partial pivoting, which
/// copes with the zero block and with singular floating blocks). With a single block and
/// no constraints the system is the single-domain one and goes through solve_single.
inline DDSolution solve_dd(const KKTSystem& kkt, const SolverOptions& options = {}) {
  DDSolution sol;
  if (kkt.num_constraints == 0 && kkt.sizes.size() == 1) {
    sol.u.push_back(solve_single(kkt.matrix, kkt.rhs, options));
    sol.lambda = Vector();
    sol.residual = relative_residual(kkt.matrix, sol.u.front(), kkt.rhs);
    return sol;
  }
  Vector x;
  if (kkt.rhs.isZero(0.0)) {
    x = Vector::Zero(kkt.rhs.size());
  } else {
    Eigen::SparseMatrix<double> col = kkt.matrix;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(col);
    lu.factorize(col);
    if (lu.info() != Eigen::Success) {
      throw Error(ErrorCode::SolverFailure, "KKT factorization broke down (singular system): " + lu.lastErrorMessage());
    }
    x = lu.solve(kkt.rhs);
    for (int it = 0; it < 3 && relative_residual(kkt.matrix, x, kkt.rhs) > options.tolerance; ++it) {
      x += lu.solve(kkt.rhs - apply(kkt.matrix, x));
    }
  }
  sol.residual = relative_residual(kkt.matrix, x, kkt.rhs);
  if (!std::isfinite(sol.residual) || sol.residual > options.tolerance) {
    throw Error(ErrorCode::SolverFailure, "KKT relative residual " + std::to_string(sol.residual) + " above tolerance");
  }
  for (std::size_t n = 0; n < kkt.offsets.size(); ++n) {
    sol.u.push_back(x.segment(kkt.offsets[n], kkt.sizes[n]));
  }
  sol.lambda = x.tail(kkt.num_constraints);
  return sol;
}

/// Largest stationarity defect max_n ||A_n u_n + M_n^T lambda - b_n|| / (1 + ||b_n||).
inline double stationarity_defect(const std::vector<SubdomainSystem>& systems, const ConstraintMatrix& c,
                                  const DDSolution& sol) {
  double worst = 0.0;
  for (std::size_t n = 0; n < systems.size(); ++n) {
    Vector r = apply(systems[n].a, sol.u[n]) - systems[n].b;
    if (c.num_rows() > 0) r += c.blocks[n].transpose() * sol.lambda;
    worst = std::max(worst, r.norm() / (1.0 + systems[n].b.norm()));
  }
  return worst;
}

struct Reconstruction {
  Vector u;
  double max_disagreement = 0.0;
};

/// Global unknown vector from the subdomain family; each value comes from the
/// lowest-indexed subdomain holding the node.
inline Reconstruction reconstruct_global(const std::vector<Vector>& u, const std::vector<SubdomainSystem>& systems,
                                         std::size_t num_unknowns) {
  if (u.size() != systems.size()) throw Error(ErrorCode::DimensionMismatch, "reconstruct_global");
  Reconstruction out;
  out.u = Vector::Zero(static_cast<Eigen::Index>(num_unknowns));
  Vector lo = Vector::Constant(out.u.size(), std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  std::vector<char> seen(num_unknowns, 0);
  for (std::size_t n = 0; n < systems.size(); ++n) {
    if (u[n].size() != static_cast<Eigen::Index>(systems[n].size())) {
      throw Error(ErrorCode::DimensionMismatch, "reconstruct_global: block size");
    }
    for (std::size_t i = 0; i < systems[n].unknown_nodes.size(); ++i) {
      const auto g = static_cast<Eigen::Index>(systems[n].unknown_nodes[i]);
      const double v = u[n][static_cast<Eigen::Index>(i)];
      if (!seen[static_cast<std::size_t>(g)]) out.u[g] = v;
      seen[static_cast<std::size_t>(g)] = 1;
      lo[g] = std::min(lo[g], v);
      hi[g] = std::max(hi[g], v);
    }
  }
  for (std::size_t i = 0; i < num_unknowns; ++i) {
    if (!seen[i]) throw Error(ErrorCode::InvalidDecomposition, "unknown node " + std::to_string(i) + " has no owner");
    out.max_disagreement = std::max(out.max_disagreement, hi[static_cast<Eigen::Index>(i)] - lo[static_cast<Eigen::Index>(i)]);
  }
  return out;
}

struct EquivalenceReport {
  double rel_inf_error = 0.0;  // ||u_dd - u||_inf / max(1, ||u||_inf)
  double rel_l2_error = 0.0;   // ||u_dd - u||_2 / max(1, ||u||_2)
  double constraint_violation = 0.0;
  double max_disagreement = 0.0;
  double solver_residual = 0.0;
  bool bitwise_identical = false;
};

inline EquivalenceReport equivalence_report(const Vector& u_dd, const Vector& u_single, const ConstraintMatrix& c,
                                            const std::vector<Vector>& u_n, double max_disagreement,
                                            double solver_residual) {
  if (u_dd.size() != u_single.size()) throw Error(ErrorCode::DimensionMismatch, "equivalence_report");
  EquivalenceReport r;
  const Vector diff = u_dd - u_single;
  const double ninf = u_single.size() ? u_single.cwiseAbs().maxCoeff() : 0.0;
  r.rel_inf_error = (diff.size() ? diff.cwiseAbs().maxCoeff() : 0.0) / std::max(1.0, ninf);
  r.rel_l2_error = diff.norm() / std::max(1.0, u_single.norm());
  r.constraint_violation = constraint_violation(c, u_n);
  r.max_disagreement = max_disagreement;
  r.solver_residual = solver_residual;
  r.bitwise_identical = bitwise_equal(u_dd, u_single);
  return r;
}

}  // namespace nlddd
