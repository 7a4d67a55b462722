#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "nlddd/error.hpp"
#include "nlddd/mesh.hpp"

namespace nlddd {

enum class KernelFamily { Constant, Gaussian, FractionalTruncated };

/// How the horizon is enforced.
///   BarycenterPair: whole element pairs are kept when their barycenters are within
///                   delta + h; the kernel itself is not truncated.
///   Pointwise:      pairs are kept when some vertex pair is within delta, and the
///                   kernel is multiplied by the indicator |y - x| <= delta.
enum class TruncationMode { BarycenterPair, Pointwise };

struct KernelSpec {
  KernelFamily family = KernelFamily::Constant;
  double delta = 0.0;
  double s = 0.5;  // fractional exponent, used by FractionalTruncated only
  double scale = 1.0;
  TruncationMode truncation = TruncationMode::BarycenterPair;

  void validate() const {
    if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "kernel horizon must be positive");
    if (!(scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "kernel scale must be positive");
    if (family == KernelFamily::FractionalTruncated) {
      if (!(s > 0.0 && s < 1.0)) throw Error(ErrorCode::InvalidArgument, "fractional exponent must lie in (0,1)");
      if (truncation != TruncationMode::Pointwise) {
        throw Error(ErrorCode::InvalidArgument, "the fractional kernel requires pointwise truncation");
      }
    }
  }
};

/// Constant kernel scaled as 4 / (pi delta^4), the usual calibration against the
/// local Laplacian in two dimensions.
inline KernelSpec calibrated_constant_kernel(double delta, TruncationMode mode = TruncationMode::BarycenterPair) {
  return KernelSpec{KernelFamily::Constant, delta, 0.5, 4.0 / (std::numbers::pi * std::pow(delta, 4)), mode};
}

inline const char* to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::Constant: return "constant";
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::FractionalTruncated: return "fractional";
  }
  return "?";
}

inline const char* to_string(TruncationMode m) {
  return m == TruncationMode::BarycenterPair ? "barycenter_pair" : "pointwise";
}

/// Distance floor used where the fractional kernel is sampled at (near) coincident
/// points inside a self-pair. The basis-difference factor vanishes there anyway.
inline constexpr double kFractionalDistanceFloor = 1e-12;

namespace detail {

inline double kernel_at_distance(const KernelSpec& spec, double r) {
  if (spec.truncation == TruncationMode::Pointwise && r > spec.delta) return 0.0;
  switch (spec.family) {
    case KernelFamily::Constant: return spec.scale;
    case KernelFamily::Gaussian: return spec.scale * std::exp(-(r * r) / (spec.delta * spec.delta));
    case KernelFamily::FractionalTruncated:
      return spec.scale * std::pow(std::max(r, kFractionalDistanceFloor), -2.0 - 2.0 * spec.s);
  }
  return 0.0;
}

}  // namespace detail

inline double eval_kernel(const KernelSpec& spec, const Point2& x, const Point2& y) {
  const double r = distance(x, y);
  if (spec.family == KernelFamily::FractionalTruncated && r == 0.0) {
    throw Error(ErrorCode::SingularEvaluation, "fractional kernel evaluated at coincident points");
  }
  return detail::kernel_at_distance(spec, r);
}

inline double min_vertex_distance(const Mesh& mesh, const Element& a, const Element& b) {
  double d = std::numeric_limits<double>::infinity();
  for (auto u : a.vertices) {
    for (auto v : b.vertices) d = std::min(d, distance(mesh.vertex(u), mesh.vertex(v)));
  }
  return d;
}

/// Element-pair interaction predicate shared by every assembly path.
inline bool pair_interacts(const KernelSpec& spec, const Mesh& mesh, std::size_t t, std::size_t tp) {
  if (t == tp) return true;
  const Element& a = mesh.element(t);
  const Element& b = mesh.element(tp);
  if (spec.truncation == TruncationMode::BarycenterPair) {
    return distance(a.barycenter, b.barycenter) <= spec.delta + mesh.h();
  }
  return min_vertex_distance(mesh, a, b) <= spec.delta;
}

struct ElementPair {
  std::size_t t = 0;
  std::size_t tp = 0;

  friend bool operator==(const ElementPair&, const ElementPair&) = default;
  friend auto operator<=>(const ElementPair&, const ElementPair&) = default;
};

/// Buckets element barycenters on a uniform grid so neighbour queries stay local.
class BarycenterGrid {
 public:
  BarycenterGrid(const Mesh& mesh, double cell) : mesh_(&mesh), cell_(cell) {
    if (!(cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid cell must be positive");
    xmin_ = ymin_ = std::numeric_limits<double>::infinity();
    for (const auto& el : mesh.elements()) {
      xmin_ = std::min(xmin_, el.barycenter.x);
      ymin_ = std::min(ymin_, el.barycenter.y);
    }
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) buckets_[key(cell_of(mesh.element(e).barycenter))].push_back(e);
  }

  /// Calls `fn(e)` for every element whose barycenter may lie within `radius` of `p`.
  template <class Fn>
  void for_candidates(const Point2& p, double radius, Fn&& fn) const {
    const auto [ci, cj] = cell_of(p);
    const long reach = static_cast<long>(std::ceil(radius / cell_)) + 1;
    for (long j = cj - reach; j <= cj + reach; ++j) {
      for (long i = ci - reach; i <= ci + reach; ++i) {
        auto it = buckets_.find(key({i, j}));
        if (it == buckets_.end()) continue;
        for (auto e : it->second) fn(e);
      }
    }
  }

 private:
  std::pair<long, long> cell_of(const Point2& p) const {
    return {static_cast<long>(std::floor((p.x - xmin_) / cell_)), static_cast<long>(std::floor((p.y - ymin_) / cell_))};
  }
  static long long key(std::pair<long, long> c) { return (static_cast<long long>(c.first) << 32) ^ (c.second & 0xffffffffLL); }

  const Mesh* mesh_;
  double cell_;
  double xmin_, ymin_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

/// All ordered interacting pairs (t, tp), self-pairs included, sorted lexicographically.
/// The position of a pair in this list is its deterministic pair id.
inline std::vector<ElementPair> interacting_pairs(const Mesh& mesh, const KernelSpec& spec) {
  spec.validate();
  // Candidate radius bounds either predicate in terms of barycenter distance.
  const double radius = spec.truncation == TruncationMode::BarycenterPair ? spec.delta + mesh.h()
                                                                           : spec.delta + 2.0 * mesh.max_diameter();
  BarycenterGrid grid(mesh, std::max(radius, mesh.h()));
  std::vector<ElementPair> pairs;
  std::vector<std::size_t> row;
  for (std::size_t t = 0; t < mesh.num_elements(); ++t) {
    row.clear();
    grid.for_candidates(mesh.element(t).barycenter, radius, [&](std::size_t tp) {
      if (pair_interacts(spec, mesh, t, tp)) row.push_back(tp);
    });
    std::sort(row.begin(), row.end());
    for (auto tp : row) pairs.push_back({t, tp});
  }
  return pairs;
}

}  // namespace nlddd
