#pragma once

#include <string>
#include <vector>

#include "nlddd/assembly_single.hpp"
#include "nlddd/decomposition.hpp"
#include "nlddd/error.hpp"
#include "nlddd/sparse.hpp"

namespace nlddd {

/// zeta-weighted subdomain system A_n u_n = b_n.
///
/// The local matrix over all subdomain nodes is kept whole; `a` is its unknown block
/// (this already contains the Dirichlet interaction on the diagonal) and `collar` is
/// the unknown x Dirichlet block that moves g_n to the right-hand side.
struct SubdomainSystem {
  std::size_t id = 0;
  bool floating = false;
  std::vector<std::size_t> unknown_nodes;  // global ids of X_n
  std::vector<std::size_t> collar_nodes;   // global ids of the Dirichlet collar
  SparseMatrix full;                       // (N_n + collar) square
  SparseMatrix a;                          // N_n x N_n
  SparseMatrix collar;                     // N_n x collar
  Vector load;                             // zeta_F-weighted int f phi_i
  Vector g;                                // Dirichlet values on the collar
  Vector b;                                // load - collar g

  std::size_t size() const { return unknown_nodes.size(); }
};

inline SubdomainSystem assemble_subdomain(std::size_t n, const Mesh& mesh, const PairTable& table,
                                          const Decomposition& dec, const LoadData& load,
                                          const AssemblyOptions& options = {}) {
  if (!dec.coverage.passed() || dec.coverage.checked_pairs == 0) {
    throw Error(ErrorCode::CoverageViolation, "refusing to assemble a decomposition that failed coverage");
  }
  if (n >= dec.count()) throw Error(ErrorCode::InvalidArgument, "subdomain index out of range");
  const SubdomainGeometry& geo = dec.geometry[n];
  const DecompIndex& index = dec.index;
  const ZetaTables& zeta = dec.zeta;
  const auto& to_local = index.global_to_local[n];

  std::vector<char> member(mesh.num_elements(), 0);
  for (auto e : geo.all_elems()) member[e] = 1;

  const int nloc = static_cast<int>(index.local_nodes[n].size());
  const int nu = static_cast<int>(index.num_unknowns[n]);

  OrderedAccumulator acc;
  for (std::size_t p = 0; p < table.pairs.size(); ++p) {
    const ElementPair& pr = table.pairs[p];
    if (!member[pr.t] || !member[pr.tp]) continue;
    const int k = zeta.zeta_a(pr.t, pr.tp);
    if (k < 1) throw Error(ErrorCode::InvalidDecomposition, "zeta_A vanishes on a pair inside a subdomain");
    const double weight = static_cast<double>(k);
    const PairBlock& blk = table.blocks[p];
    for (int i = 0; i < blk.size; ++i) {
      const int li = to_local[blk.nodes[i]];
      for (int j = 0; j < blk.size; ++j) acc.add(li, to_local[blk.nodes[j]], p, blk(i, j) / weight);
    }
  }

  std::vector<std::size_t> weighted = geo.omega_elems;
  weighted.insert(weighted.end(), geo.hat_elems.begin(), geo.hat_elems.end());
  std::sort(weighted.begin(), weighted.end());

  const TriangleRule rule = triangle_rule(table.quad_order);
  if (options.reaction) {
    for (auto e : weighted) {
      const auto m = element_mass(mesh, e, options.reaction, rule);
      const double weight = static_cast<double>(zeta.zeta_f[e]);
      const auto& v = mesh.element(e).vertices;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) acc.add(to_local[v[i]], to_local[v[j]], table.pairs.size() + e, m[i * 3 + j] / weight);
      }
    }
  }

  OrderedAccumulator rhs;
  for (auto e : weighted) {
    const auto l = element_load(mesh, e, load.f, rule);
    const double weight = static_cast<double>(zeta.zeta_f[e]);
    const auto& v = mesh.element(e).vertices;
    for (int i = 0; i < 3; ++i) {
      const int li = to_local[v[i]];
      if (li < nu) rhs.add(li, 0, e, l[i] / weight);
    }
  }

  SubdomainSystem sys;
  sys.id = n;
  sys.floating = geo.floating;
  const auto& nodes = index.local_nodes[n];
  sys.unknown_nodes.assign(nodes.begin(), nodes.begin() + nu);
  sys.collar_nodes.assign(nodes.begin() + nu, nodes.end());
  sys.full = acc.to_matrix(nloc, nloc);
  sys.a = block_of(sys.full, 0, nu, 0, nu);
  sys.collar = block_of(sys.full, 0, nu, nu, nloc);
  sys.load = rhs.to_vector(nu);
  sys.g.resize(static_cast<Eigen::Index>(sys.collar_nodes.size()));
  for (std::size_t j = 0; j < sys.collar_nodes.size(); ++j) {
    sys.g[static_cast<Eigen::Index>(j)] = load.g_vec[static_cast<Eigen::Index>(sys.collar_nodes[j] - mesh.num_unknowns())];
  }
  sys.b = build_rhs(sys.load, sys.collar, sys.g);
  return sys;
}

inline std::vector<SubdomainSystem> assemble_all_subdomains(const Mesh& mesh, const PairTable& table,
                                                            const Decomposition& dec, const LoadData& load,
                                                            const AssemblyOptions& options = {}) {
  std::vector<SubdomainSystem> out(dec.count());
  parallel_for(dec.count(), [&](std::size_t n) { out[n] = assemble_subdomain(n, mesh, table, dec, load, options); });
  return out;
}

struct ScatterReport {
  double matrix_residual = 0.0;  // ||sum_n R_n^T A_n R_n - A_full||_F / ||A_full||_F
  double load_residual = 0.0;    // ||sum_n R_n^T b_n - b_single|| / ||b_single||
};

/// Sums the subdomain matrices and right-hand sides back into global numbering and
/// compares them with the single-domain objects.
inline ScatterReport scatter_sum_check(const std::vector<SubdomainSystem>& systems, const Mesh& mesh,
                                       const GlobalSystem& global, const Vector& b_single) {
  const int nt = static_cast<int>(mesh.num_nodes());
  std::vector<Eigen::Triplet<double>> trips;
  Vector b = Vector::Zero(static_cast<Eigen::Index>(mesh.num_unknowns()));
  for (const auto& s : systems) {
    auto global_id = [&](int local) {
      const std::size_t nu = s.unknown_nodes.size();
      return static_cast<int>(local < static_cast<int>(nu) ? s.unknown_nodes[local] : s.collar_nodes[local - nu]);
    };
    for (int r = 0; r < s.full.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(s.full, r); it; ++it) trips.emplace_back(global_id(r), global_id(it.col()), it.value());
    }
    for (std::size_t i = 0; i < s.unknown_nodes.size(); ++i) b[static_cast<Eigen::Index>(s.unknown_nodes[i])] += s.b[static_cast<Eigen::Index>(i)];
  }
  SparseMatrix sum(nt, nt);
  sum.setFromTriplets(trips.begin(), trips.end());
  SparseMatrix diff = sum - global.full;
  ScatterReport r;
  const double na = global.full.norm();
  r.matrix_residual = na > 0.0 ? diff.norm() / na : diff.norm();
  const double nb = b_single.norm();
  r.load_residual = nb > 0.0 ? (b - b_single).norm() / nb : (b - b_single).norm();
  return r;
}

/// Restriction of a global unknown vector to the unknowns of subdomain n.
inline Vector restrict_to(const SubdomainSystem& s, const Vector& u_global) {
  Vector out(static_cast<Eigen::Index>(s.unknown_nodes.size()));
  for (std::size_t i = 0; i < s.unknown_nodes.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = u_global[static_cast<Eigen::Index>(s.unknown_nodes[i])];
  }
  return out;
}

inline double subdomain_energy(const SubdomainSystem& s, const Vector& u) {
  if (u.size() != static_cast<Eigen::Index>(s.size())) throw Error(ErrorCode::DimensionMismatch, "subdomain energy");
  Vector w(s.full.rows());
  w << u, s.g;
  return 0.5 * w.dot(apply(s.full, w)) - s.load.dot(u);
}

inline double energy_sum(const std::vector<SubdomainSystem>& systems, const std::vector<Vector>& u) {
  if (u.size() != systems.size()) throw Error(ErrorCode::DimensionMismatch, "energy_sum: subdomain count");
  double total = 0.0;
  for (std::size_t n = 0; n < systems.size(); ++n) total += subdomain_energy(systems[n], u[n]);
  return total;
}

}  // namespace nlddd
