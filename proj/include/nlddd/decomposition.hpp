#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nlddd/error.hpp"
#include "nlddd/kernel.hpp"
#include "nlddd/mesh.hpp"

namespace nlddd {

/// Non-overlapping covering of the OMEGA elements by whole-element subdomains.
struct Partition {
  std::size_t count = 0;
  std::vector<int> owner;  // per element; -1 for GAMMA elements
};

/// Validates an owner vector read from a file or produced by an external partitioner.
inline Partition make_partition(const Mesh& mesh, std::vector<int> owner) {
  if (owner.size() != mesh.num_elements()) {
    throw Error(ErrorCode::InvalidDecomposition, "owner vector length differs from the element count");
  }
  int max_owner = -1;
  for (std::size_t e = 0; e < owner.size(); ++e) {
    if (mesh.region(e) == Region::Gamma) {
      if (owner[e] != -1) throw Error(ErrorCode::InvalidDecomposition, "GAMMA element " + std::to_string(e) + " has an owner");
    } else if (owner[e] < 0) {
      throw Error(ErrorCode::InvalidDecomposition, "OMEGA element " + std::to_string(e) + " has no owner");
    }
    max_owner = std::max(max_owner, owner[e]);
  }
  Partition p;
  p.count = static_cast<std::size_t>(max_owner + 1);
  p.owner = std::move(owner);
  std::vector<std::size_t> sizes(p.count, 0);
  for (int o : p.owner) {
    if (o >= 0) ++sizes[static_cast<std::size_t>(o)];
  }
  for (std::size_t n = 0; n < p.count; ++n) {
    if (sizes[n] == 0) throw Error(ErrorCode::InvalidDecomposition, "subdomain " + std::to_string(n) + " owns no elements");
  }
  return p;
}

/// bx x by block partition of the OMEGA bounding box; block index = iy * bx + ix.
/// A barycenter lying exactly on a block boundary goes to the lower block.
inline Partition partition_blocks(const Mesh& mesh, int bx, int by) {
  if (bx < 1 || by < 1) throw Error(ErrorCode::InvalidArgument, "block counts must be >= 1");
  const Box box = omega_bounds(mesh);
  const double wx = (box.xmax - box.xmin) / bx;
  const double wy = (box.ymax - box.ymin) / by;
  auto slot = [](double t, int count) {
    const int k = static_cast<int>(std::ceil(t)) - 1;
    return std::clamp(k, 0, count - 1);
  };
  std::vector<int> owner(mesh.num_elements(), -1);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    if (mesh.region(e) != Region::Omega) continue;
    const Point2& b = mesh.element(e).barycenter;
    owner[e] = slot((b.y - box.ymin) / wy, by) * bx + slot((b.x - box.xmin) / wx, bx);
  }
  std::vector<std::size_t> sizes(static_cast<std::size_t>(bx * by), 0);
  for (int o : owner) {
    if (o >= 0) ++sizes[static_cast<std::size_t>(o)];
  }
  for (std::size_t n = 0; n < sizes.size(); ++n) {
    if (sizes[n] == 0) {
      throw Error(ErrorCode::InvalidDecomposition,
                  "block " + std::to_string(n) + " owns no elements; the mesh is too coarse for " + std::to_string(bx) +
                      "x" + std::to_string(by) + " blocks");
    }
  }
  Partition p;
  p.count = sizes.size();
  p.owner = std::move(owner);
  return p;
}

/// Element-whole regions of one subdomain.
struct SubdomainGeometry {
  std::vector<std::size_t> omega_elems;  // owned elements outside the interface strip
  std::vector<std::size_t> hat_elems;    // interface strip (OMEGA elements, any owner)
  std::vector<std::size_t> gamma_elems;  // Dirichlet collar (GAMMA elements)
  bool floating = false;
  std::vector<std::size_t> type1_vertices;  // shared with another subdomain
  std::vector<std::size_t> type2_vertices;  // shared with Gamma

  /// omega, hat and gamma elements, sorted.
  std::vector<std::size_t> all_elems() const {
    std::vector<std::size_t> all;
    all.reserve(omega_elems.size() + hat_elems.size() + gamma_elems.size());
    all.insert(all.end(), omega_elems.begin(), omega_elems.end());
    all.insert(all.end(), hat_elems.begin(), hat_elems.end());
    all.insert(all.end(), gamma_elems.begin(), gamma_elems.end());
    std::sort(all.begin(), all.end());
    return all;
  }
};

/// Distance margins of the barycenter criteria.
struct RegionMargins {
  double hat;     // interface strip: delta/2 + h
  double collar;  // Dirichlet collar: delta + h

  static RegionMargins standard(double delta, double h) { return {0.5 * delta + h, delta + h}; }
};

namespace detail {

// Elements of `region` whose barycenter is within `radius` of at least one point in `anchors`.
inline std::vector<std::size_t> elements_near(const Mesh& mesh, const BarycenterGrid& grid, Region region,
                                              const std::vector<std::size_t>& anchors, double radius) {
  std::vector<char> hit(mesh.num_elements(), 0);
  for (auto v : anchors) {
    const Point2& p = mesh.vertex(v);
    grid.for_candidates(p, radius, [&](std::size_t e) {
      if (!hit[e] && mesh.region(e) == region && distance(p, mesh.element(e).barycenter) <= radius) hit[e] = 1;
    });
  }
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < hit.size(); ++e) {
    if (hit[e]) out.push_back(e);
  }
  return out;
}

}  // namespace detail

inline std::vector<SubdomainGeometry> build_subdomain_regions(const Mesh& mesh, const Partition& partition,
                                                              const RegionMargins& margins) {
  const std::size_t ns = partition.count;
  // Owners of the OMEGA elements incident to each node.
  std::vector<std::set<int>> node_owners(mesh.num_nodes());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    if (partition.owner[e] < 0) continue;
    for (auto v : mesh.element(e).vertices) node_owners[v].insert(partition.owner[e]);
  }
  std::vector<SubdomainGeometry> geo(ns);
  for (std::size_t v = 0; v < mesh.num_nodes(); ++v) {
    for (int n : node_owners[v]) {
      if (node_owners[v].size() > 1) geo[static_cast<std::size_t>(n)].type1_vertices.push_back(v);
      if (mesh.node_class(v) == NodeClass::GammaDirichlet) geo[static_cast<std::size_t>(n)].type2_vertices.push_back(v);
    }
  }
  BarycenterGrid grid(mesh, std::max({margins.hat, margins.collar, mesh.h()}));
  for (std::size_t n = 0; n < ns; ++n) {
    SubdomainGeometry& g = geo[n];
    g.hat_elems = detail::elements_near(mesh, grid, Region::Omega, g.type1_vertices, margins.hat);
    g.gamma_elems = detail::elements_near(mesh, grid, Region::Gamma, g.type2_vertices, margins.collar);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      if (partition.owner[e] == static_cast<int>(n) &&
          !std::binary_search(g.hat_elems.begin(), g.hat_elems.end(), e)) {
        g.omega_elems.push_back(e);
      }
    }
    g.floating = g.gamma_elems.empty();
  }
  return geo;
}

inline std::vector<SubdomainGeometry> build_subdomain_regions(const Mesh& mesh, const Partition& partition,
                                                              double delta) {
  return build_subdomain_regions(mesh, partition, RegionMargins::standard(delta, mesh.h()));
}

/// Local numbering of every subdomain and the interface multiplicities.
struct DecompIndex {
  /// Global ids of the local nodes: unknowns first, then Dirichlet collar nodes,
  /// each group in ascending global order.
  std::vector<std::vector<std::size_t>> local_nodes;
  std::vector<std::size_t> num_unknowns;  // N_n
  /// global -> local index per subdomain, -1 if the node is not in the subdomain.
  std::vector<std::vector<int>> global_to_local;
  /// Subdomains whose interface strip touches each global node (ascending).
  std::vector<std::vector<int>> theta;

  std::size_t count() const { return local_nodes.size(); }
  std::size_t multiplicity(std::size_t node) const { return theta.at(node).size(); }
  int local_index(std::size_t n, std::size_t node) const { return global_to_local.at(n).at(node); }
  std::size_t num_collar(std::size_t n) const { return local_nodes[n].size() - num_unknowns[n]; }
  std::size_t total_unknowns() const {
    std::size_t s = 0;
    for (auto k : num_unknowns) s += k;
    return s;
  }
};

inline DecompIndex build_index_maps(const Mesh& mesh, const std::vector<SubdomainGeometry>& geo) {
  const std::size_t ns = geo.size();
  const std::size_t nt = mesh.num_nodes();
  DecompIndex index;
  index.local_nodes.resize(ns);
  index.num_unknowns.resize(ns);
  index.global_to_local.assign(ns, std::vector<int>(nt, -1));
  index.theta.assign(nt, {});

  for (std::size_t n = 0; n < ns; ++n) {
    std::vector<char> interior(nt, 0), collar(nt, 0);
    for (const auto* set : {&geo[n].omega_elems, &geo[n].hat_elems}) {
      for (auto e : *set) {
        for (auto v : mesh.element(e).vertices) interior[v] = 1;
      }
    }
    for (auto e : geo[n].gamma_elems) {
      for (auto v : mesh.element(e).vertices) collar[v] = 1;
    }
    std::vector<std::size_t> unknowns, dirichlet;
    for (std::size_t v = 0; v < nt; ++v) {
      if (mesh.node_class(v) == NodeClass::GammaDirichlet) {
        if (collar[v]) {
          dirichlet.push_back(v);
        } else if (interior[v]) {
          throw Error(ErrorCode::CollarDeficiency, "subdomain " + std::to_string(n) + " touches Dirichlet node " +
                                                       std::to_string(v) + " outside its collar");
        }
      } else if (interior[v]) {
        unknowns.push_back(v);
      }
    }
    index.num_unknowns[n] = unknowns.size();
    auto& local = index.local_nodes[n];
    local = unknowns;
    local.insert(local.end(), dirichlet.begin(), dirichlet.end());
    for (std::size_t j = 0; j < local.size(); ++j) index.global_to_local[n][local[j]] = static_cast<int>(j);

    for (auto e : geo[n].hat_elems) {
      for (auto v : mesh.element(e).vertices) {
        if (mesh.is_unknown(v) && (index.theta[v].empty() || index.theta[v].back() != static_cast<int>(n))) {
          index.theta[v].push_back(static_cast<int>(n));
        }
      }
    }
  }

  // Every unknown shared by several subdomains must be tied by interface constraints.
  for (std::size_t v = 0; v < mesh.num_unknowns(); ++v) {
    std::vector<int> holders;
    for (std::size_t n = 0; n < ns; ++n) {
      if (index.global_to_local[n][v] >= 0) holders.push_back(static_cast<int>(n));
    }
    if (holders.empty()) {
      throw Error(ErrorCode::InvalidDecomposition, "unknown node " + std::to_string(v) + " belongs to no subdomain");
    }
    if (holders.size() > 1 && holders != index.theta[v]) {
      throw Error(ErrorCode::InvalidDecomposition,
                  "node " + std::to_string(v) + " is shared by subdomains outside their common interface strip");
    }
  }
  return index;
}

/// Overlap multiplicities. Every subdomain region is a union of whole elements, so
/// zeta_A is constant on each element pair and zeta_F on each element.
struct ZetaTables {
  std::vector<int> zeta_f;                      // per element; 0 for GAMMA elements
  std::vector<std::vector<int>> signature;      // D(T), ascending subdomain ids
  std::map<std::pair<std::size_t, std::size_t>, int> overrides;  // diagnostic mutations only

  int zeta_a(std::size_t t, std::size_t tp) const {
    if (!overrides.empty()) {
      auto it = overrides.find({t, tp});
      if (it != overrides.end()) return it->second;
    }
    const auto& a = signature[t];
    const auto& b = signature[tp];
    int count = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] == b[j]) {
        ++count;
        ++i;
        ++j;
      } else if (a[i] < b[j]) {
        ++i;
      } else {
        ++j;
      }
    }
    return count;
  }

  /// Replaces zeta_A on one ordered pair and its mirror. Used to check that the
  /// equivalence diagnostics react to a wrong weight.
  void override_pair(std::size_t t, std::size_t tp, int value) {
    overrides[{t, tp}] = value;
    overrides[{tp, t}] = value;
  }
};

inline ZetaTables compute_zeta(const Mesh& mesh, const std::vector<SubdomainGeometry>& geo) {
  ZetaTables z;
  z.zeta_f.assign(mesh.num_elements(), 0);
  z.signature.assign(mesh.num_elements(), {});
  for (std::size_t n = 0; n < geo.size(); ++n) {
    for (auto e : geo[n].omega_elems) ++z.zeta_f[e];
    for (auto e : geo[n].hat_elems) ++z.zeta_f[e];
    for (auto e : geo[n].all_elems()) z.signature[e].push_back(static_cast<int>(n));
  }
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    if (mesh.region(e) == Region::Omega && z.zeta_f[e] == 0) {
      throw Error(ErrorCode::InvalidDecomposition, "OMEGA element " + std::to_string(e) + " is covered by no subdomain");
    }
  }
  return z;
}

struct CoverageReport {
  std::size_t checked_pairs = 0;
  int min_zeta = 0;
  std::vector<ElementPair> offending;

  bool passed() const { return offending.empty(); }
};

/// Checks zeta_A >= 1 on every interacting pair that involves an OMEGA element.
inline CoverageReport verify_coverage(const Mesh& mesh, const std::vector<ElementPair>& pairs, const ZetaTables& z) {
  CoverageReport report;
  report.min_zeta = std::numeric_limits<int>::max();
  for (const auto& p : pairs) {
    if (mesh.region(p.t) == Region::Gamma && mesh.region(p.tp) == Region::Gamma) continue;
    ++report.checked_pairs;
    const int k = z.zeta_a(p.t, p.tp);
    report.min_zeta = std::min(report.min_zeta, k);
    if (k < 1) report.offending.push_back(p);
  }
  if (report.checked_pairs == 0) report.min_zeta = 0;
  return report;
}

inline CoverageReport verify_coverage(const Mesh& mesh, const KernelSpec& spec, const ZetaTables& z) {
  return verify_coverage(mesh, interacting_pairs(mesh, spec), z);
}

/// Elements grouped by membership signature D(T).
struct OverlapAtoms {
  struct Atom {
    std::vector<int> signature;
    std::vector<std::size_t> elements;
  };
  std::vector<Atom> atoms;
  std::vector<std::size_t> atom_of;  // per element

  /// zeta_A recounted subdomain by subdomain from the atom signatures.
  int zeta_a(std::size_t t, std::size_t tp, std::size_t num_subdomains) const {
    const auto& a = atoms[atom_of[t]].signature;
    const auto& b = atoms[atom_of[tp]].signature;
    int count = 0;
    for (int n = 0; n < static_cast<int>(num_subdomains); ++n) {
      const bool in_a = std::find(a.begin(), a.end(), n) != a.end();
      const bool in_b = std::find(b.begin(), b.end(), n) != b.end();
      count += (in_a && in_b) ? 1 : 0;
    }
    return count;
  }
};

inline OverlapAtoms overlap_atoms(std::size_t num_elements, const std::vector<SubdomainGeometry>& geo) {
  std::vector<std::vector<int>> sig(num_elements);
  for (std::size_t n = 0; n < geo.size(); ++n) {
    for (const auto* set : {&geo[n].omega_elems, &geo[n].hat_elems, &geo[n].gamma_elems}) {
      for (auto e : *set) sig[e].push_back(static_cast<int>(n));
    }
  }
  std::map<std::vector<int>, std::size_t> lookup;
  OverlapAtoms out;
  out.atom_of.resize(num_elements);
  for (std::size_t e = 0; e < num_elements; ++e) {
    std::sort(sig[e].begin(), sig[e].end());
    auto [it, inserted] = lookup.try_emplace(sig[e], out.atoms.size());
    if (inserted) out.atoms.push_back({sig[e], {}});
    out.atoms[it->second].elements.push_back(e);
    out.atom_of[e] = it->second;
  }
  return out;
}

/// Everything the multi-domain assembly needs about a decomposition.
struct Decomposition {
  Partition partition;
  std::vector<SubdomainGeometry> geometry;
  DecompIndex index;
  ZetaTables zeta;
  CoverageReport coverage;

  std::size_t count() const { return geometry.size(); }
};

/// Builds regions, index maps and zeta tables, then checks coverage against `pairs`.
/// Throws CoverageViolation if an interacting pair is not contained in any subdomain.
inline Decomposition decompose(const Mesh& mesh, const std::vector<ElementPair>& pairs, Partition partition,
                               const RegionMargins& margins) {
  Decomposition d;
  d.partition = std::move(partition);
  d.geometry = build_subdomain_regions(mesh, d.partition, margins);
  d.index = build_index_maps(mesh, d.geometry);
  d.zeta = compute_zeta(mesh, d.geometry);
  d.coverage = verify_coverage(mesh, pairs, d.zeta);
  if (!d.coverage.passed()) {
    const auto& p = d.coverage.offending.front();
    throw Error(ErrorCode::CoverageViolation, std::to_string(d.coverage.offending.size()) +
                                                  " interacting pairs lie in no common subdomain, first (" +
                                                  std::to_string(p.t) + ", " + std::to_string(p.tp) + ")");
  }
  return d;
}

inline Decomposition decompose(const Mesh& mesh, const KernelSpec& spec, const std::vector<ElementPair>& pairs,
                               Partition partition) {
  return decompose(mesh, pairs, std::move(partition), RegionMargins::standard(spec.delta, mesh.h()));
}

}  // namespace nlddd
