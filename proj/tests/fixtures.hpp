#pragma once

// Shared problem setups for the test suites.

#include <cmath>
#include <random>

#include "nlddd/dd_solver.hpp"

namespace nlddd::testing {

inline constexpr double kDeskL = 1.0;
inline constexpr double kDeskH = 0.125;
inline constexpr double kDelta = 0.25;
// Fine enough for a 3x3 block partition with a floating centre.
inline constexpr double kFineH = 1.0 / 12.0;

inline KernelSpec constant_kernel(double delta = kDelta) { return {KernelFamily::Constant, delta, 0.5, 1.0, TruncationMode::BarycenterPair}; }
inline KernelSpec gaussian_kernel(double delta = kDelta) { return {KernelFamily::Gaussian, delta, 0.5, 1.0, TruncationMode::BarycenterPair}; }

inline double smooth_f(const Point2& p) { return std::sin(3.0 * p.x) + 1.0 + p.y * p.y; }
inline double smooth_g(const Point2& p) { return p.x * p.y + 0.25 * p.x; }

/// Single-domain and multi-domain objects for one configuration.
struct Problem {
  Mesh mesh;
  KernelSpec spec;
  PairTable table;
  GlobalSystem global;
  LoadData load;
  Decomposition dec;
  std::vector<SubdomainSystem> systems;

  Problem(double h, const KernelSpec& k, int bx, int by, ScalarField f = smooth_f, ScalarField g = smooth_g)
      : mesh(build_frame_mesh(kDeskL, h, k.delta)), spec(k) {
    table = make_pair_table(mesh, spec, 4);
    global = assemble_full(mesh, table);
    load = make_load_data(mesh, std::move(f), std::move(g), global, 4);
    dec = decompose(mesh, spec, table.pairs, partition_blocks(mesh, bx, by));
    systems = assemble_all_subdomains(mesh, table, dec, load);
  }
};

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline DenseMatrix dense(const SparseMatrix& a) { return DenseMatrix(a); }

}  // namespace nlddd::testing
