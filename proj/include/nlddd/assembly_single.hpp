#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "nlddd/error.hpp"
#include "nlddd/kernel.hpp"
#include "nlddd/mesh.hpp"
#include "nlddd/quadrature.hpp"
#include "nlddd/sparse.hpp"

namespace nlddd {

using ScalarField = std::function<double(const Point2&)>;

/// Dense contribution of one ordered element pair (T, T') to the Galerkin matrix:
///   int_T int_T' (phi_j(y) - phi_j(x)) (phi_i(y) - phi_i(x)) gamma(x, y) dy dx
/// over the union of the two vertex sets (T's vertices first).
struct PairBlock {
  std::array<std::size_t, 6> nodes{};
  int size = 0;
  std::array<double, 36> values{};

  double operator()(int i, int j) const { return values[i * 6 + j]; }
};

inline PairBlock pair_block(const Mesh& mesh, std::size_t t, std::size_t tp, const KernelSpec& spec,
                            const TriangleRule& rule) {
  const Element& a = mesh.element(t);
  const Element& b = mesh.element(tp);
  PairBlock block;
  // Position of each block node within T and T' (-1 if absent).
  std::array<int, 6> in_t{-1, -1, -1, -1, -1, -1};
  std::array<int, 6> in_tp{-1, -1, -1, -1, -1, -1};
  for (int k = 0; k < 3; ++k) {
    block.nodes[block.size] = a.vertices[k];
    in_t[block.size++] = k;
  }
  if (t != tp) {
    for (int k = 0; k < 3; ++k) {
      const std::size_t v = b.vertices[k];
      int pos = -1;
      for (int m = 0; m < 3; ++m) {
        if (block.nodes[m] == v) pos = m;
      }
      if (pos < 0) {
        pos = block.size;
        block.nodes[block.size++] = v;
      }
      in_tp[pos] = k;
    }
  } else {
    for (int k = 0; k < 3; ++k) in_tp[k] = k;
  }

  const int n = block.size;
  const double jac = a.area * b.area;
  std::array<double, 6> d{};
  for (std::size_t qa = 0; qa < rule.size(); ++qa) {
    const auto& lx = rule.points[qa];
    const Point2 x = map_to_element(mesh, a, lx);
    for (std::size_t qb = 0; qb < rule.size(); ++qb) {
      const auto& ly = rule.points[qb];
      const Point2 y = map_to_element(mesh, b, ly);
      const double gamma = detail::kernel_at_distance(spec, distance(x, y));
      if (gamma == 0.0) continue;
      const double w = rule.weights[qa] * rule.weights[qb] * jac * gamma;
      for (int i = 0; i < n; ++i) {
        d[i] = (in_tp[i] >= 0 ? ly[in_tp[i]] : 0.0) - (in_t[i] >= 0 ? lx[in_t[i]] : 0.0);
      }
      for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) block.values[i * 6 + j] += w * d[i] * d[j];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) block.values[i * 6 + j] = block.values[j * 6 + i];
  }
  return block;
}

inline PairBlock pair_block(const Mesh& mesh, std::size_t t, std::size_t tp, const KernelSpec& spec, int quad_order) {
  return pair_block(mesh, t, tp, spec, triangle_rule(quad_order));
}

/// Interacting pairs used by assembly and their precomputed blocks. Pairs of two
/// GAMMA elements are left out: they only couple Dirichlet values to each other.
struct PairTable {
  std::vector<ElementPair> pairs;
  std::vector<PairBlock> blocks;
  int quad_order = 4;
};

inline PairTable make_pair_table(const Mesh& mesh, const KernelSpec& spec, std::vector<ElementPair> pairs,
                                 int quad_order) {
  spec.validate();
  if (mesh.num_elements() == 0) throw Error(ErrorCode::InvalidMesh, "mesh has no elements");
  const TriangleRule rule = triangle_rule(quad_order);
  PairTable table;
  table.quad_order = quad_order;
  table.pairs = std::move(pairs);
  table.blocks.resize(table.pairs.size());
  parallel_for(table.pairs.size(), [&](std::size_t p) {
    table.blocks[p] = pair_block(mesh, table.pairs[p].t, table.pairs[p].tp, spec, rule);
  });
  return table;
}

inline std::vector<ElementPair> assembly_pairs(const Mesh& mesh, const KernelSpec& spec) {
  std::vector<ElementPair> all = interacting_pairs(mesh, spec);
  std::vector<ElementPair> kept;
  kept.reserve(all.size());
  for (const auto& p : all) {
    if (mesh.region(p.t) == Region::Omega || mesh.region(p.tp) == Region::Omega) kept.push_back(p);
  }
  if (kept.empty()) throw Error(ErrorCode::InvalidMesh, "no interacting element pairs touch OMEGA");
  return kept;
}

inline PairTable make_pair_table(const Mesh& mesh, const KernelSpec& spec, int quad_order = 4) {
  return make_pair_table(mesh, spec, assembly_pairs(mesh, spec), quad_order);
}

struct AssemblyOptions {
  int quad_order = 4;
  /// Optional reaction coefficient c(x) >= 0 adding int_Omega c u v.
  ScalarField reaction;
};

/// 3x3 reaction block int_T c phi_i phi_j for element e.
inline std::array<double, 9> element_mass(const Mesh& mesh, std::size_t e, const ScalarField& c,
                                          const TriangleRule& rule) {
  std::array<double, 9> m{};
  const Element& el = mesh.element(e);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto& l = rule.points[q];
    const double w = rule.weights[q] * el.area * c(map_to_element(mesh, el, l));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i * 3 + j] += w * l[i] * l[j];
    }
  }
  return m;
}

/// int_T f phi_i for the three vertices of element e.
inline std::array<double, 3> element_load(const Mesh& mesh, std::size_t e, const ScalarField& f,
                                          const TriangleRule& rule) {
  std::array<double, 3> out{};
  const Element& el = mesh.element(e);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto& l = rule.points[q];
    const double w = rule.weights[q] * el.area * f(map_to_element(mesh, el, l));
    for (int i = 0; i < 3; ++i) out[i] += w * l[i];
  }
  return out;
}

/// Full Galerkin matrix over all nodes and its unknown/Dirichlet blocks.
struct GlobalSystem {
  SparseMatrix full;        // N~ x N~
  SparseMatrix a_single;    // N x N
  SparseMatrix g_coupling;  // N x (N~ - N)
};

/// Extracts rows [r0, r1) and columns [c0, c1) of a row-major matrix.
inline SparseMatrix block_of(const SparseMatrix& m, int r0, int r1, int c0, int c1) {
  std::vector<Eigen::Triplet<double>> trips;
  for (int r = r0; r < r1; ++r) {
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      if (it.col() >= c0 && it.col() < c1) trips.emplace_back(r - r0, it.col() - c0, it.value());
    }
  }
  SparseMatrix out(r1 - r0, c1 - c0);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

inline GlobalSystem assemble_full(const Mesh& mesh, const PairTable& table, const AssemblyOptions& options = {}) {
  const int nt = static_cast<int>(mesh.num_nodes());
  const int nu = static_cast<int>(mesh.num_unknowns());
  OrderedAccumulator acc;
  acc.reserve(table.pairs.size() * 36);
  for (std::size_t p = 0; p < table.pairs.size(); ++p) {
    const PairBlock& blk = table.blocks[p];
    for (int i = 0; i < blk.size; ++i) {
      for (int j = 0; j < blk.size; ++j) {
        acc.add(static_cast<int>(blk.nodes[i]), static_cast<int>(blk.nodes[j]), p, blk(i, j));
      }
    }
  }
  if (options.reaction) {
    const TriangleRule rule = triangle_rule(table.quad_order);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      if (mesh.region(e) != Region::Omega) continue;
      const auto m = element_mass(mesh, e, options.reaction, rule);
      const auto& v = mesh.element(e).vertices;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) acc.add(static_cast<int>(v[i]), static_cast<int>(v[j]), table.pairs.size() + e, m[i * 3 + j]);
      }
    }
  }
  GlobalSystem sys;
  sys.full = acc.to_matrix(nt, nt);
  sys.a_single = block_of(sys.full, 0, nu, 0, nu);
  sys.g_coupling = block_of(sys.full, 0, nu, nu, nt);
  return sys;
}

inline GlobalSystem assemble_full(const Mesh& mesh, const KernelSpec& spec, int quad_order = 4) {
  AssemblyOptions options;
  options.quad_order = quad_order;
  return assemble_full(mesh, make_pair_table(mesh, spec, quad_order), options);
}

/// Source data of a run and its discrete counterparts.
struct LoadData {
  ScalarField f;
  ScalarField g;
  Vector g_vec;     // g at the Dirichlet nodes, in mesh order
  Vector load;      // int_Omega f phi_i for the unknowns
  Vector b_single;  // load - G g
};

/// Nodal interpolant of g on the Dirichlet nodes.
inline Vector interpolate_dirichlet(const Mesh& mesh, const ScalarField& g) {
  Vector out(static_cast<Eigen::Index>(mesh.num_dirichlet()));
  for (std::size_t i = mesh.num_unknowns(); i < mesh.num_nodes(); ++i) {
    out[static_cast<Eigen::Index>(i - mesh.num_unknowns())] = g(mesh.vertex(i));
  }
  return out;
}

inline Vector load_vector(const Mesh& mesh, const ScalarField& f, int quad_order) {
  const TriangleRule rule = triangle_rule(quad_order);
  OrderedAccumulator acc;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    if (mesh.region(e) != Region::Omega) continue;
    const auto l = element_load(mesh, e, f, rule);
    const auto& v = mesh.element(e).vertices;
    for (int i = 0; i < 3; ++i) {
      if (mesh.is_unknown(v[i])) acc.add(static_cast<int>(v[i]), 0, e, l[i]);
    }
  }
  return acc.to_vector(static_cast<int>(mesh.num_unknowns()));
}

inline Vector build_rhs(const Vector& load, const SparseMatrix& g_coupling, const Vector& g_vec) {
  return load - apply(g_coupling, g_vec);
}

inline LoadData make_load_data(const Mesh& mesh, ScalarField f, ScalarField g, const GlobalSystem& sys,
                               int quad_order) {
  LoadData data;
  data.f = std::move(f);
  data.g = std::move(g);
  data.g_vec = interpolate_dirichlet(mesh, data.g);
  data.load = load_vector(mesh, data.f, quad_order);
  data.b_single = build_rhs(data.load, sys.g_coupling, data.g_vec);
  return data;
}

/// Source term with a folded Neumann layer: f = f_interior inside Omega except on the
/// Neumann layer (where `in_neumann` holds), which carries -f_neumann.
inline ScalarField fold_neumann(ScalarField f_interior, ScalarField f_neumann, std::function<bool(const Point2&)> in_neumann) {
  return [fi = std::move(f_interior), fn = std::move(f_neumann), in = std::move(in_neumann)](const Point2& p) {
    return in(p) ? -fn(p) : fi(p);
  };
}

struct SolverOptions {
  enum class Method { Direct, ConjugateGradient };
  Method method = Method::Direct;
  double tolerance = 1e-10;
};

inline double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double nb = b.norm();
  const double nr = (apply(a, x) - b).norm();
  return nb > 0.0 ? nr / nb : nr;
}

/// Solves the SPD single-domain system. Direct sparse Cholesky by default, with up to
/// three steps of iterative refinement when the residual exceeds the tolerance.
inline Vector solve_single(const SparseMatrix& a, const Vector& b, const SolverOptions& options = {}) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw Error(ErrorCode::DimensionMismatch, "solve_single");
  if (b.size() == 0) return Vector();
  if (b.isZero(0.0)) return Vector::Zero(b.size());
  Eigen::SparseMatrix<double> col = a;
  Vector x;
  if (options.method == SolverOptions::Method::Direct) {
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(col);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SolverFailure, "Cholesky factorization failed: matrix is not symmetric positive definite");
    }
    x = llt.solve(b);
    for (int it = 0; it < 3 && relative_residual(a, x, b) > options.tolerance; ++it) {
      x += llt.solve(b - apply(a, x));
    }
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(0.1 * options.tolerance);
    cg.setMaxIterations(std::max<Eigen::Index>(1000, 10 * b.size()));
    cg.compute(col);
    x = cg.solve(b);
    if (cg.info() != Eigen::Success && relative_residual(a, x, b) > options.tolerance) {
      throw Error(ErrorCode::SolverFailure, "conjugate gradient did not converge");
    }
  }
  const double res = relative_residual(a, x, b);
  if (!(res <= options.tolerance)) {
    throw Error(ErrorCode::SolverFailure, "relative residual " + std::to_string(res) + " above tolerance");
  }
  return x;
}

/// Discrete energy 1/2 A(u,u) - F(u) with u = g on the Dirichlet nodes.
/// Uses the full assembled matrix, so element pairs inside Gamma are absent and the
/// value differs from the continuum energy by a constant that does not involve u.
inline double energy_single(const GlobalSystem& sys, const Vector& u, const Vector& g_vec, const Vector& load) {
  const auto nu = sys.a_single.rows();
  if (u.size() != nu || load.size() != nu || g_vec.size() != sys.full.rows() - nu) {
    throw Error(ErrorCode::DimensionMismatch, "energy_single");
  }
  Vector w(sys.full.rows());
  w << u, g_vec;
  return 0.5 * w.dot(apply(sys.full, w)) - load.dot(u);
}

}  // namespace nlddd
