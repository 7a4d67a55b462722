#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/SparseExtra>

#include "nlddd/constraints.hpp"
#include "nlddd/decomposition.hpp"
#include "nlddd/error.hpp"
#include "nlddd/mesh.hpp"
#include "nlddd/sparse.hpp"

namespace nlddd {

/// Shortest round-trip decimal form of a double.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

inline bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto p = line.find_first_not_of(" \t");
    if (p != std::string::npos && line[p] != '#') return true;
  }
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------- mesh

inline void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << "NODES " << mesh.num_nodes() << '\n';
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const Point2& p = mesh.vertex(i);
    out << i << ' ' << format_real(p.x) << ' ' << format_real(p.y) << ' ' << to_string(mesh.node_class(i)) << '\n';
  }
  out << "ELEMENTS " << mesh.num_elements() << '\n';
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& v = mesh.element(e).vertices;
    out << e << ' ' << v[0] << ' ' << v[1] << ' ' << v[2] << ' ' << to_string(mesh.region(e)) << '\n';
  }
}

inline void write_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  auto out = detail::open_out(path);
  write_mesh(out, mesh);
  detail::finish(out, path);
}

/// Reads the NODES/ELEMENTS text format. Node classes in the file must agree with
/// the classes implied by the element regions. The grid size is taken as the largest
/// shortest-edge length over all elements (exactly h on structured meshes).
inline Mesh read_mesh(std::istream& in) {
  std::string line;
  auto header = [&](const char* word) {
    if (!detail::next_content_line(in, line)) throw Error(ErrorCode::InvalidMesh, std::string("missing ") + word + " header");
    std::istringstream ss(line);
    std::string w;
    long long count = -1;
    if (!(ss >> w >> count) || w != word || count < 0) {
      throw Error(ErrorCode::InvalidMesh, std::string("malformed ") + word + " header: " + line);
    }
    return static_cast<std::size_t>(count);
  };

  const std::size_t nn = header("NODES");
  std::vector<Point2> pts(nn);
  std::vector<NodeClass> classes(nn);
  for (std::size_t k = 0; k < nn; ++k) {
    if (!detail::next_content_line(in, line)) throw Error(ErrorCode::InvalidMesh, "truncated node list");
    std::istringstream ss(line);
    std::size_t id = 0;
    std::string cls;
    if (!(ss >> id >> pts[k].x >> pts[k].y >> cls) || id != k) {
      throw Error(ErrorCode::InvalidMesh, "bad node line: " + line);
    }
    if (cls == "OMEGA_UNKNOWN") {
      classes[k] = NodeClass::OmegaUnknown;
    } else if (cls == "GAMMA_DIRICHLET") {
      classes[k] = NodeClass::GammaDirichlet;
    } else {
      throw Error(ErrorCode::InvalidMesh, "unknown node class '" + cls + "'");
    }
  }

  const std::size_t ne = header("ELEMENTS");
  std::vector<std::array<std::size_t, 3>> tris(ne);
  std::vector<Region> regions(ne);
  for (std::size_t k = 0; k < ne; ++k) {
    if (!detail::next_content_line(in, line)) throw Error(ErrorCode::InvalidMesh, "truncated element list");
    std::istringstream ss(line);
    std::size_t id = 0;
    std::string reg;
    if (!(ss >> id >> tris[k][0] >> tris[k][1] >> tris[k][2] >> reg) || id != k) {
      throw Error(ErrorCode::InvalidMesh, "bad element line: " + line);
    }
    if (reg == "OMEGA") {
      regions[k] = Region::Omega;
    } else if (reg == "GAMMA") {
      regions[k] = Region::Gamma;
    } else {
      throw Error(ErrorCode::InvalidMesh, "unknown region '" + reg + "'");
    }
    for (auto v : tris[k]) {
      if (v >= nn) throw Error(ErrorCode::InvalidMesh, "element " + std::to_string(k) + " references missing node");
    }
  }

  double h = 0.0;
  for (const auto& t : tris) {
    double shortest = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) shortest = std::min(shortest, distance(pts[t[a]], pts[t[(a + 1) % 3]]));
    h = std::max(h, shortest);
  }
  Mesh mesh = Mesh::from_parts(std::move(pts), std::move(tris), std::move(regions), h);
  for (std::size_t i = 0; i < nn; ++i) {
    if (mesh.node_class(i) != classes[i]) {
      throw Error(ErrorCode::InvalidMesh, "node " + std::to_string(i) + " class disagrees with its incident regions");
    }
  }
  return mesh;
}

inline Mesh read_mesh(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return read_mesh(in);
}

// ------------------------------------------------------------------- MatrixMarket

/// Coordinate real general format, 1-based, entries in row-major order.
inline void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& a) {
  if (!Eigen::saveMarket(a, path.string())) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

inline SparseMatrix read_matrix_market(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "missing " + path.string());
  SparseMatrix a;
  if (!Eigen::loadMarket(a, path.string())) throw Error(ErrorCode::Io, "cannot parse " + path.string());
  a.makeCompressed();
  return a;
}

// ---------------------------------------------------------------------------- CSV

inline void write_vector_csv(const std::filesystem::path& path, const Vector& v, const std::string& column = "value") {
  auto out = detail::open_out(path);
  out << "index," << column << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) out << i << ',' << format_real(v[i]) << '\n';
  detail::finish(out, path);
}

inline Vector read_vector_csv(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::getline(in, line);
  std::vector<double> vals;
  while (detail::next_content_line(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::Io, "bad vector line: " + line);
    if (std::stoull(line.substr(0, comma)) != vals.size()) throw Error(ErrorCode::Io, "vector indices out of order");
    vals.push_back(std::stod(line.substr(comma + 1)));
  }
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

/// One line per element; GAMMA elements carry owner -1.
inline void write_partition_csv(const std::filesystem::path& path, const Partition& p) {
  auto out = detail::open_out(path);
  out << "element,owner\n";
  for (std::size_t e = 0; e < p.owner.size(); ++e) out << e << ',' << p.owner[e] << '\n';
  detail::finish(out, path);
}

/// Elements missing from the file are treated as GAMMA (owner -1); the result is
/// validated against the mesh.
inline Partition read_partition_csv(const std::filesystem::path& path, const Mesh& mesh) {
  auto in = detail::open_in(path);
  std::string line;
  std::getline(in, line);
  std::vector<int> owner(mesh.num_elements(), -1);
  while (detail::next_content_line(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::Io, "bad partition line: " + line);
    const auto e = std::stoull(line.substr(0, comma));
    if (e >= owner.size()) throw Error(ErrorCode::InvalidDecomposition, "partition names missing element " + std::to_string(e));
    owner[e] = std::stoi(line.substr(comma + 1));
  }
  return make_partition(mesh, std::move(owner));
}

/// node,x,y,u_single,u_dd,abs_diff for every unknown node.
inline void write_solution_csv(const std::filesystem::path& path, const Mesh& mesh, const Vector& u_single,
                               const Vector& u_dd) {
  if (u_single.size() != static_cast<Eigen::Index>(mesh.num_unknowns()) || u_dd.size() != u_single.size()) {
    throw Error(ErrorCode::DimensionMismatch, "solution table");
  }
  auto out = detail::open_out(path);
  out << "node,x,y,u_single,u_dd,abs_diff\n";
  for (std::size_t i = 0; i < mesh.num_unknowns(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << i << ',' << format_real(mesh.vertex(i).x) << ',' << format_real(mesh.vertex(i).y) << ','
        << format_real(u_single[k]) << ',' << format_real(u_dd[k]) << ',' << format_real(std::abs(u_single[k] - u_dd[k]))
        << '\n';
  }
  detail::finish(out, path);
}

inline void write_constraint_rows_csv(const std::filesystem::path& path, const ConstraintMatrix& c) {
  auto out = detail::open_out(path);
  out << "row,node,plus,minus,col_plus,col_minus\n";
  for (std::size_t k = 0; k < c.rows.size(); ++k) {
    const auto& r = c.rows[k];
    out << k << ',' << r.node << ',' << r.plus << ',' << r.minus << ',' << r.col_plus << ',' << r.col_minus << '\n';
  }
  detail::finish(out, path);
}

// ------------------------------------------------------------------------- report

/// Ordered key: value report.
class Report {
 public:
  void add(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
  void add(const std::string& key, double value) { add(key, format_real(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }
  template <class Int, std::enable_if_t<std::is_integral_v<Int> && !std::is_same_v<Int, bool>, int> = 0>
  void add(const std::string& key, Int value) {
    add(key, std::to_string(value));
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string find(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    return {};
  }

  void write(std::ostream& out) const {
    for (const auto& [k, v] : entries_) out << k << ": " << v << '\n';
  }

  void write(const std::filesystem::path& path) const {
    auto out = detail::open_out(path);
    write(out);
    detail::finish(out, path);
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace nlddd
