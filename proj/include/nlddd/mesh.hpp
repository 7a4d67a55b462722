#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nlddd/error.hpp"

namespace nlddd {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(b.x - a.x, b.y - a.y); }

enum class Region : std::uint8_t { Omega, Gamma };
enum class NodeClass : std::uint8_t { OmegaUnknown, GammaDirichlet };

inline const char* to_string(Region r) { return r == Region::Omega ? "OMEGA" : "GAMMA"; }
inline const char* to_string(NodeClass c) {
  return c == NodeClass::OmegaUnknown ? "OMEGA_UNKNOWN" : "GAMMA_DIRICHLET";
}

struct Element {
  std::array<std::size_t, 3> vertices{};
  Point2 barycenter;
  double area = 0.0;

  bool has_vertex(std::size_t node) const {
    return vertices[0] == node || vertices[1] == node || vertices[2] == node;
  }
};

/// Conforming triangulation of the solution domain together with its interaction frame.
///
/// Nodes are numbered so that every OMEGA_UNKNOWN node precedes every GAMMA_DIRICHLET
/// node; the first `num_unknowns()` indices are the degrees of freedom. A node is a
/// Dirichlet node iff it touches at least one GAMMA element, which puts the whole
/// Omega/Gamma interface on the Dirichlet side. Immutable once built.
class Mesh {
 public:
  Mesh() = default;

  /// Validates the raw arrays and derives barycenters, areas, node classes and incidence.
  /// Throws InvalidMesh if an element is degenerate, an index is out of range, or the
  /// node numbering does not list all unknowns first.
  static Mesh from_parts(std::vector<Point2> vertices, std::vector<std::array<std::size_t, 3>> triangles,
                         std::vector<Region> regions, double h) {
    if (triangles.size() != regions.size()) {
      throw Error(ErrorCode::InvalidMesh, "element and region counts differ");
    }
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidMesh, "grid size must be positive");

    Mesh mesh;
    mesh.vertices_ = std::move(vertices);
    mesh.regions_ = std::move(regions);
    mesh.h_ = h;
    mesh.elements_.reserve(triangles.size());
    const std::size_t nn = mesh.vertices_.size();
    for (std::size_t e = 0; e < triangles.size(); ++e) {
      const auto& tri = triangles[e];
      for (auto v : tri) {
        if (v >= nn) throw Error(ErrorCode::InvalidMesh, "element " + std::to_string(e) + " references missing node");
      }
      const Point2& a = mesh.vertices_[tri[0]];
      const Point2& b = mesh.vertices_[tri[1]];
      const Point2& c = mesh.vertices_[tri[2]];
      const double twice = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
      Element el;
      el.vertices = tri;
      el.area = 0.5 * std::abs(twice);
      el.barycenter = {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
      if (!(el.area > 0.0)) throw Error(ErrorCode::InvalidMesh, "element " + std::to_string(e) + " is degenerate");
      mesh.elements_.push_back(el);
    }

    mesh.incidence_.assign(nn, {});
    for (std::size_t e = 0; e < mesh.elements_.size(); ++e) {
      for (auto v : mesh.elements_[e].vertices) mesh.incidence_[v].push_back(e);
    }

    mesh.node_class_.assign(nn, NodeClass::OmegaUnknown);
    for (std::size_t e = 0; e < mesh.elements_.size(); ++e) {
      if (mesh.regions_[e] != Region::Gamma) continue;
      for (auto v : mesh.elements_[e].vertices) mesh.node_class_[v] = NodeClass::GammaDirichlet;
    }
    for (std::size_t v = 0; v < nn; ++v) {
      if (mesh.incidence_[v].empty()) throw Error(ErrorCode::InvalidMesh, "node " + std::to_string(v) + " is isolated");
    }

    std::size_t unknowns = 0;
    while (unknowns < nn && mesh.node_class_[unknowns] == NodeClass::OmegaUnknown) ++unknowns;
    for (std::size_t v = unknowns; v < nn; ++v) {
      if (mesh.node_class_[v] == NodeClass::OmegaUnknown) {
        throw Error(ErrorCode::InvalidMesh, "node numbering must list every OMEGA_UNKNOWN node first (node " +
                                                std::to_string(v) + ")");
      }
    }
    mesh.num_unknowns_ = unknowns;
    return mesh;
  }

  std::size_t num_nodes() const { return vertices_.size(); }
  std::size_t num_elements() const { return elements_.size(); }
  /// N^h: number of OMEGA_UNKNOWN nodes (they occupy indices [0, N^h)).
  std::size_t num_unknowns() const { return num_unknowns_; }
  std::size_t num_dirichlet() const { return vertices_.size() - num_unknowns_; }
  double h() const { return h_; }

  const std::vector<Point2>& vertices() const { return vertices_; }
  const Point2& vertex(std::size_t i) const { return vertices_.at(i); }
  const std::vector<Element>& elements() const { return elements_; }
  const Element& element(std::size_t e) const { return elements_.at(e); }
  Region region(std::size_t e) const { return regions_.at(e); }
  const std::vector<Region>& regions() const { return regions_; }
  NodeClass node_class(std::size_t i) const { return node_class_.at(i); }
  bool is_unknown(std::size_t i) const { return i < num_unknowns_; }

  /// Elements having `node` as a vertex, i.e. the support of its hat function.
  const std::vector<std::size_t>& node_elements(std::size_t node) const {
    if (node >= incidence_.size()) {
      throw Error(ErrorCode::InvalidArgument, "node index " + std::to_string(node) + " out of range");
    }
    return incidence_[node];
  }

  double total_area() const {
    double sum = 0.0;
    for (const auto& el : elements_) sum += el.area;
    return sum;
  }

  /// Largest element diameter.
  double max_diameter() const {
    double d = 0.0;
    for (const auto& el : elements_) {
      for (int a = 0; a < 3; ++a) {
        d = std::max(d, distance(vertices_[el.vertices[a]], vertices_[el.vertices[(a + 1) % 3]]));
      }
    }
    return d;
  }

 private:
  std::vector<Point2> vertices_;
  std::vector<Element> elements_;
  std::vector<Region> regions_;
  std::vector<NodeClass> node_class_;
  std::vector<std::vector<std::size_t>> incidence_;
  std::size_t num_unknowns_ = 0;
  double h_ = 0.0;
};

/// Number of element layers in the interaction frame: delta rounded up to whole layers.
inline std::size_t frame_layers(double h, double delta) {
  // The small slack keeps exact ratios such as 0.25/0.125 from rounding up a layer.
  return static_cast<std::size_t>(std::ceil(delta / h - 1e-9));
}

/// Structured triangulation of the square (0,L)^2 surrounded by a frame of
/// ceil(delta/h) element layers. Every h x h cell is split along its
/// lower-left to upper-right diagonal.
inline Mesh build_frame_mesh(double side_length, double h, double delta) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "h must be positive");
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "delta must be positive");
  if (!(h < side_length)) throw Error(ErrorCode::InvalidArgument, "h must be smaller than the side length");
  const double ratio = side_length / h;
  const auto cells = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(cells)) > 1e-9 * ratio) {
    throw Error(ErrorCode::InvalidArgument, "side length must be a positive multiple of h");
  }
  const std::size_t layers = frame_layers(h, delta);
  const std::size_t n = cells + 2 * layers;  // cells per side, frame included
  const std::size_t np = n + 1;

  auto in_omega_cell = [&](std::size_t i, std::size_t j) {
    return i >= layers && i < layers + cells && j >= layers && j < layers + cells;
  };
  // Grid node (i, j) is an unknown iff all four surrounding cells are Omega cells.
  auto grid_unknown = [&](std::size_t i, std::size_t j) {
    return i > layers && i < layers + cells && j > layers && j < layers + cells;
  };

  std::vector<std::size_t> number(np * np);
  std::size_t next = 0;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < np; ++j) {
      for (std::size_t i = 0; i < np; ++i) {
        if (grid_unknown(i, j) == (pass == 0)) number[j * np + i] = next++;
      }
    }
  }

  std::vector<Point2> vertices(np * np);
  const double offset = static_cast<double>(layers);
  for (std::size_t j = 0; j < np; ++j) {
    for (std::size_t i = 0; i < np; ++i) {
      vertices[number[j * np + i]] = {(static_cast<double>(i) - offset) * h, (static_cast<double>(j) - offset) * h};
    }
  }

  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<Region> regions;
  triangles.reserve(2 * n * n);
  regions.reserve(2 * n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = number[j * np + i];
      const std::size_t b = number[j * np + i + 1];
      const std::size_t c = number[(j + 1) * np + i + 1];
      const std::size_t d = number[(j + 1) * np + i];
      const Region r = in_omega_cell(i, j) ? Region::Omega : Region::Gamma;
      triangles.push_back({a, b, c});
      triangles.push_back({a, c, d});
      regions.push_back(r);
      regions.push_back(r);
    }
  }
  return Mesh::from_parts(std::move(vertices), std::move(triangles), std::move(regions), h);
}

struct NodeClassification {
  std::vector<std::size_t> omega_nodes;
  std::vector<std::size_t> gamma_nodes;
};

/// Splits node indices into unknowns and Dirichlet nodes (in assembly numbering).
inline NodeClassification classify_nodes(const Mesh& mesh) {
  NodeClassification out;
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    (mesh.node_class(i) == NodeClass::OmegaUnknown ? out.omega_nodes : out.gamma_nodes).push_back(i);
  }
  return out;
}

inline const std::vector<std::size_t>& node_elements(const Mesh& mesh, std::size_t node) {
  return mesh.node_elements(node);
}

/// Axis-aligned bounding box of the OMEGA elements.
struct Box {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
};

inline Box omega_bounds(const Mesh& mesh) {
  Box box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  bool any = false;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    if (mesh.region(e) != Region::Omega) continue;
    any = true;
    for (auto v : mesh.element(e).vertices) {
      const Point2& p = mesh.vertex(v);
      box.xmin = std::min(box.xmin, p.x);
      box.xmax = std::max(box.xmax, p.x);
      box.ymin = std::min(box.ymin, p.y);
      box.ymax = std::max(box.ymax, p.y);
    }
  }
  if (!any) throw Error(ErrorCode::InvalidMesh, "mesh has no OMEGA elements");
  return box;
}

/// Checks that the Gamma frame is at least `delta` thick: every OMEGA barycenter must be
/// farther than delta from the outer boundary of the mesh bounding box.
inline bool frame_covers_horizon(const Mesh& mesh, double delta) {
  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin, xmax = -xmin, ymax = -xmin;
  for (const auto& p : mesh.vertices()) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const Box omega = omega_bounds(mesh);
  return omega.xmin - xmin >= delta * (1 - 1e-12) && xmax - omega.xmax >= delta * (1 - 1e-12) &&
         omega.ymin - ymin >= delta * (1 - 1e-12) && ymax - omega.ymax >= delta * (1 - 1e-12);
}

}  // namespace nlddd
