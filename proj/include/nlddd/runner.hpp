#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nlddd/assembly_multi.hpp"
#include "nlddd/assembly_single.hpp"
#include "nlddd/constraints.hpp"
#include "nlddd/dd_solver.hpp"
#include "nlddd/decomposition.hpp"
#include "nlddd/error.hpp"
#include "nlddd/io.hpp"
#include "nlddd/kernel.hpp"
#include "nlddd/mesh.hpp"

namespace nlddd {

// ------------------------------------------------------------------ field specs

/// Closed vocabulary for f, g, c and the Neumann flux:
///   constant k | linear a b c  (a x + b y + c) | sin k  (k sin(pi x) sin(pi y))
struct FieldSpec {
  enum class Kind { Constant, Linear, Sine };
  Kind kind = Kind::Constant;
  double a = 0.0, b = 0.0, c = 0.0;

  static FieldSpec parse(const std::string& text) {
    std::istringstream ss(text);
    std::string word;
    ss >> word;
    FieldSpec f;
    bool ok = false;
    if (word == "constant") {
      f.kind = Kind::Constant;
      ok = static_cast<bool>(ss >> f.c);
    } else if (word == "linear") {
      f.kind = Kind::Linear;
      ok = static_cast<bool>(ss >> f.a >> f.b >> f.c);
    } else if (word == "sin") {
      f.kind = Kind::Sine;
      ok = static_cast<bool>(ss >> f.a);
    }
    std::string extra;
    if (!ok || (ss >> extra)) throw Error(ErrorCode::Config, "bad field spec '" + text + "'");
    if (!std::isfinite(f.a) || !std::isfinite(f.b) || !std::isfinite(f.c)) {
      throw Error(ErrorCode::Config, "non-finite coefficient in '" + text + "'");
    }
    return f;
  }

  ScalarField field() const {
    switch (kind) {
      case Kind::Constant: return [c = c](const Point2&) { return c; };
      case Kind::Linear: return [a = a, b = b, c = c](const Point2& p) { return a * p.x + b * p.y + c; };
      case Kind::Sine:
        return [k = a](const Point2& p) { return k * std::sin(M_PI * p.x) * std::sin(M_PI * p.y); };
    }
    return {};
  }

  std::string str() const {
    switch (kind) {
      case Kind::Constant: return "constant " + format_real(c);
      case Kind::Linear: return "linear " + format_real(a) + " " + format_real(b) + " " + format_real(c);
      case Kind::Sine: return "sin " + format_real(a);
    }
    return {};
  }
};

/// Region where the Neumann flux is folded into the source: none | box x0 y0 x1 y1.
struct RegionSpec {
  bool any = false;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  static RegionSpec parse(const std::string& text) {
    std::istringstream ss(text);
    std::string word;
    ss >> word;
    RegionSpec r;
    std::string extra;
    if (word == "none") {
      if (ss >> extra) throw Error(ErrorCode::Config, "bad region spec '" + text + "'");
      return r;
    }
    if (word != "box" || !(ss >> r.x0 >> r.y0 >> r.x1 >> r.y1) || (ss >> extra) || !(r.x0 < r.x1) || !(r.y0 < r.y1)) {
      throw Error(ErrorCode::Config, "bad region spec '" + text + "'");
    }
    r.any = true;
    return r;
  }

  bool contains(const Point2& p) const { return any && p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }

  std::string str() const {
    if (!any) return "none";
    return "box " + format_real(x0) + " " + format_real(y0) + " " + format_real(x1) + " " + format_real(y1);
  }
};

// ------------------------------------------------------------------- run config

inline const std::vector<std::string>& artifact_kinds() {
  static const std::vector<std::string> kinds = {"mesh",        "partition",   "a_single",    "a_full", "load",
                                                 "subdomains",  "constraints", "solution",    "report"};
  return kinds;
}

struct RunConfig {
  std::filesystem::path base_dir = ".";  // relative paths resolve against this

  double side_length = 1.0;
  double h = 0.125;

  KernelSpec kernel{};
  bool calibrated_scale = true;
  int quad_order = 4;

  FieldSpec f = FieldSpec::parse("constant 1");
  FieldSpec g = FieldSpec::parse("constant 0");
  FieldSpec f_neumann = FieldSpec::parse("constant 0");
  RegionSpec neumann_region{};
  std::optional<FieldSpec> reaction;

  int bx = 1, by = 1;
  std::optional<std::filesystem::path> partition_file;

  ConstraintMode constraint_mode = ConstraintMode::NonRedundant;
  SolverOptions solver{};

  double scatter_tolerance = 1e-12;
  double equivalence_tolerance = 1e-8;
  double constraint_tolerance = 1e-10;
  double energy_tolerance = 1e-10;

  std::filesystem::path output_dir = "out";
  std::set<std::string> artifacts = {"report", "solution"};

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base_dir / p; }

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::Config, what); };
    if (!(side_length > 0.0)) bad("mesh.side_length must be positive");
    if (!(h > 0.0) || !(h < side_length)) bad("mesh.h must lie in (0, side_length)");
    const double cells = side_length / h;
    if (std::abs(cells - std::round(cells)) > 1e-9 * std::max(1.0, cells)) bad("mesh.side_length must be a multiple of mesh.h");
    try {
      kernel.validate();
    } catch (const Error& e) {
      bad(std::string("kernel: ") + e.what());
    }
    if (quad_order < 1 || quad_order > 20) bad("kernel.quad_order must lie in [1, 20]");
    if (!partition_file && (bx < 1 || by < 1)) bad("decomposition.bx and decomposition.by must be >= 1");
    if (partition_file && !std::filesystem::exists(resolve(*partition_file))) {
      bad("partition file " + resolve(*partition_file).string() + " does not exist");
    }
    if (!(solver.tolerance > 0.0) || !(solver.tolerance < 1.0)) bad("solver.tolerance must lie in (0, 1)");
    for (double t : {scatter_tolerance, equivalence_tolerance, constraint_tolerance, energy_tolerance}) {
      if (!(t > 0.0)) bad("check tolerances must be positive");
    }
    for (const auto& a : artifacts) {
      if (std::find(artifact_kinds().begin(), artifact_kinds().end(), a) == artifact_kinds().end()) {
        bad("unknown artifact '" + a + "'");
      }
    }
  }
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Parses the INI-style run configuration. Unknown sections or keys are rejected so
/// that typos do not silently fall back to defaults.
inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = ".") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::Config, std::string("config parse error: ") + e.what());
  }

  static const std::map<std::string, std::set<std::string>> allowed = {
      {"mesh", {"side_length", "h"}},
      {"kernel", {"family", "delta", "s", "scale", "truncation", "quad_order"}},
      {"load", {"f", "g", "f_neumann", "neumann_region", "reaction"}},
      {"decomposition", {"bx", "by", "partition_file"}},
      {"constraints", {"mode"}},
      {"solver", {"method", "tolerance"}},
      {"checks", {"scatter_tolerance", "equivalence_tolerance", "constraint_tolerance", "energy_tolerance"}},
      {"outputs", {"directory", "artifacts"}},
  };
  for (const auto& [section, body] : tree) {
    auto it = allowed.find(section);
    if (it == allowed.end()) throw Error(ErrorCode::Config, "unknown section [" + section + "]");
    if (body.empty() && !body.data().empty()) throw Error(ErrorCode::Config, "key '" + section + "' outside a section");
    for (const auto& kv : body) {
      if (!it->second.count(kv.first)) throw Error(ErrorCode::Config, "unknown key " + section + "." + kv.first);
    }
  }

  auto text = [&](const std::string& key) -> std::optional<std::string> {
    auto v = tree.get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return detail::trim(*v);
  };
  auto number = [&](const std::string& key, double fallback) {
    auto v = text(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size() || !std::isfinite(d)) throw std::invalid_argument(*v);
      return d;
    } catch (const std::exception&) {
      throw Error(ErrorCode::Config, key + ": '" + *v + "' is not a number");
    }
  };
  auto integer = [&](const std::string& key, int fallback) {
    const double d = number(key, fallback);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw Error(ErrorCode::Config, key + " must be an integer");
    return static_cast<int>(d);
  };

  RunConfig c;
  c.base_dir = base_dir;
  if (!tree.get_child_optional("mesh")) throw Error(ErrorCode::Config, "missing [mesh] section");
  if (!tree.get_child_optional("kernel")) throw Error(ErrorCode::Config, "missing [kernel] section");
  if (!text("mesh.h")) throw Error(ErrorCode::Config, "missing mesh.h");
  if (!text("kernel.delta")) throw Error(ErrorCode::Config, "missing kernel.delta");
  c.side_length = number("mesh.side_length", 1.0);
  c.h = number("mesh.h", 0.0);

  const std::string family = detail::lower(text("kernel.family").value_or("constant"));
  if (family == "constant") {
    c.kernel.family = KernelFamily::Constant;
  } else if (family == "gaussian") {
    c.kernel.family = KernelFamily::Gaussian;
  } else if (family == "fractional") {
    c.kernel.family = KernelFamily::FractionalTruncated;
  } else {
    throw Error(ErrorCode::Config, "kernel.family must be constant, gaussian or fractional");
  }
  c.kernel.delta = number("kernel.delta", 0.0);
  c.kernel.s = number("kernel.s", 0.5);
  const std::string trunc = detail::lower(text("kernel.truncation").value_or("barycenter_pair"));
  if (trunc == "barycenter_pair") {
    c.kernel.truncation = TruncationMode::BarycenterPair;
  } else if (trunc == "pointwise") {
    c.kernel.truncation = TruncationMode::Pointwise;
  } else {
    throw Error(ErrorCode::Config, "kernel.truncation must be barycenter_pair or pointwise");
  }
  const std::string scale = detail::lower(text("kernel.scale").value_or("calibrated"));
  if (scale == "calibrated") {
    if (c.kernel.family != KernelFamily::Constant) {
      throw Error(ErrorCode::Config, "kernel.scale = calibrated is only defined for the constant family");
    }
    c.calibrated_scale = true;
    c.kernel.scale = c.kernel.delta > 0.0 ? calibrated_constant_kernel(c.kernel.delta).scale : 1.0;
  } else {
    c.calibrated_scale = false;
    c.kernel.scale = number("kernel.scale", 1.0);
  }
  c.quad_order = integer("kernel.quad_order", 4);

  if (auto v = text("load.f")) c.f = FieldSpec::parse(*v);
  if (auto v = text("load.g")) c.g = FieldSpec::parse(*v);
  if (auto v = text("load.f_neumann")) c.f_neumann = FieldSpec::parse(*v);
  if (auto v = text("load.neumann_region")) c.neumann_region = RegionSpec::parse(*v);
  if (auto v = text("load.reaction"); v && detail::lower(*v) != "none") c.reaction = FieldSpec::parse(*v);

  if (auto v = text("decomposition.partition_file")) {
    if (text("decomposition.bx") || text("decomposition.by")) {
      throw Error(ErrorCode::Config, "give either decomposition.bx/by or decomposition.partition_file, not both");
    }
    c.partition_file = *v;
  }
  c.bx = integer("decomposition.bx", 1);
  c.by = integer("decomposition.by", 1);

  const std::string mode = detail::lower(text("constraints.mode").value_or("nonredundant"));
  if (mode == "nonredundant") {
    c.constraint_mode = ConstraintMode::NonRedundant;
  } else if (mode == "redundant") {
    c.constraint_mode = ConstraintMode::Redundant;
  } else {
    throw Error(ErrorCode::Config, "constraints.mode must be nonredundant or redundant");
  }

  const std::string method = detail::lower(text("solver.method").value_or("direct"));
  if (method == "direct") {
    c.solver.method = SolverOptions::Method::Direct;
  } else if (method == "cg") {
    c.solver.method = SolverOptions::Method::ConjugateGradient;
  } else {
    throw Error(ErrorCode::Config, "solver.method must be direct or cg");
  }
  c.solver.tolerance = number("solver.tolerance", 1e-10);

  c.scatter_tolerance = number("checks.scatter_tolerance", c.scatter_tolerance);
  c.equivalence_tolerance = number("checks.equivalence_tolerance", c.equivalence_tolerance);
  c.constraint_tolerance = number("checks.constraint_tolerance", c.constraint_tolerance);
  c.energy_tolerance = number("checks.energy_tolerance", c.energy_tolerance);

  if (auto v = text("outputs.directory")) c.output_dir = *v;
  if (auto v = text("outputs.artifacts")) {
    c.artifacts.clear();
    std::istringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::lower(detail::trim(item));
      if (item.empty() || item == "none") continue;
      if (item == "all") {
        c.artifacts.insert(artifact_kinds().begin(), artifact_kinds().end());
      } else {
        c.artifacts.insert(item);
      }
    }
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open config " + path.string());
  return parse_config(in, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

// --------------------------------------------------------------------- pipeline

/// Everything the pipeline produced; later stages stay empty when a run stops early.
struct RunState {
  RunConfig config;
  Mesh mesh;
  PairTable table;
  GlobalSystem global;
  LoadData load;
  Vector u_single;
  std::optional<Decomposition> dec;
  std::vector<SubdomainSystem> systems;
  std::optional<ConstraintMatrix> constraints;  // the configured mode
  std::optional<ConstraintMatrix> solve_constraints;  // rows used by the KKT solve
  std::optional<DDSolution> dd;
  Reconstruction reconstruction;
  Report report;
  std::vector<std::string> failures;  // invariant checks that did not hold
  std::vector<std::pair<std::string, double>> timings;
};

enum class Stage { Coverage, Full };

inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return 2;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidMesh:
    case ErrorCode::SingularEvaluation: return 3;
    case ErrorCode::InvalidDecomposition:
    case ErrorCode::CollarDeficiency: return 4;
    case ErrorCode::CoverageViolation: return 5;
    case ErrorCode::SolverFailure:
    case ErrorCode::DimensionMismatch: return 6;
    case ErrorCode::CheckFailed: return 7;
    case ErrorCode::Io: return 8;
  }
  return 1;
}

namespace detail {

class StageTimer {
 public:
  StageTimer(RunState& s, std::string name) : state_(s), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    state_.timings.emplace_back(name_, d.count());
  }

 private:
  RunState& state_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

inline void check(RunState& s, bool ok, const std::string& what) {
  if (!ok) s.failures.push_back(what);
}

}  // namespace detail

/// mesh -> kernel -> single assembly/solve -> decomposition -> coverage -> multi
/// assembly -> constraints -> KKT solve -> reports. Errors propagate as nlddd::Error;
/// failed invariant checks are collected in state.failures.
inline RunState run_pipeline(const RunConfig& config, Stage stop = Stage::Full) {
  RunState s;
  s.config = config;
  Report& r = s.report;
  r.add("kernel_family", to_string(config.kernel.family));
  r.add("kernel_truncation", to_string(config.kernel.truncation));
  r.add("delta", config.kernel.delta);
  r.add("kernel_scale", config.kernel.scale);
  r.add("quad_order", config.quad_order);
  r.add("f", config.f.str());
  r.add("g", config.g.str());
  r.add("f_neumann", config.f_neumann.str());
  r.add("neumann_region", config.neumann_region.str());
  r.add("reaction", config.reaction ? config.reaction->str() : std::string("none"));

  {
    detail::StageTimer t(s, "mesh");
    s.mesh = build_frame_mesh(config.side_length, config.h, config.kernel.delta);
  }
  r.add("side_length", config.side_length);
  r.add("h", s.mesh.h());
  r.add("nodes", s.mesh.num_nodes());
  r.add("elements", s.mesh.num_elements());
  r.add("unknowns", s.mesh.num_unknowns());

  AssemblyOptions aopt;
  aopt.quad_order = config.quad_order;
  if (config.reaction) aopt.reaction = config.reaction->field();
  {
    detail::StageTimer t(s, "single_assembly");
    s.table = make_pair_table(s.mesh, config.kernel, config.quad_order);
    s.global = assemble_full(s.mesh, s.table, aopt);
    ScalarField f = config.neumann_region.any
                        ? fold_neumann(config.f.field(), config.f_neumann.field(),
                                       [reg = config.neumann_region](const Point2& p) { return reg.contains(p); })
                        : config.f.field();
    s.load = make_load_data(s.mesh, f, config.g.field(), s.global, config.quad_order);
  }
  r.add("element_pairs", s.table.pairs.size());
  r.add("a_single_nonzeros", static_cast<std::size_t>(s.global.a_single.nonZeros()));
  r.add("a_single_symmetry_defect", symmetry_defect(s.global.a_single));

  {
    detail::StageTimer t(s, "single_solve");
    s.u_single = solve_single(s.global.a_single, s.load.b_single, config.solver);
  }
  const double e_single = energy_single(s.global, s.u_single, s.load.g_vec, s.load.load);
  r.add("energy_single", e_single);

  {
    detail::StageTimer t(s, "decomposition");
    Partition part = config.partition_file ? read_partition_csv(config.resolve(*config.partition_file), s.mesh)
                                           : partition_blocks(s.mesh, config.bx, config.by);
    s.dec = decompose(s.mesh, config.kernel, s.table.pairs, std::move(part));
  }
  const Decomposition& dec = *s.dec;
  std::size_t floating = 0;
  for (const auto& g : dec.geometry) floating += g.floating ? 1 : 0;
  r.add("subdomains", dec.count());
  r.add("floating_subdomains", floating);
  for (std::size_t n = 0; n < dec.count(); ++n) {
    const auto& g = dec.geometry[n];
    r.add("subdomain_" + std::to_string(n),
          "omega=" + std::to_string(g.omega_elems.size()) + " hat=" + std::to_string(g.hat_elems.size()) +
              " gamma=" + std::to_string(g.gamma_elems.size()) + " unknowns=" + std::to_string(dec.index.num_unknowns[n]) +
              " collar=" + std::to_string(dec.index.num_collar(n)) + " floating=" + (g.floating ? "true" : "false"));
  }
  r.add("coverage_checked_pairs", dec.coverage.checked_pairs);
  r.add("coverage_min_zeta_a", dec.coverage.min_zeta);
  r.add("coverage_passed", dec.coverage.passed());
  if (stop == Stage::Coverage) {
    r.add("status", "ok");
    return s;
  }

  {
    detail::StageTimer t(s, "multi_assembly");
    s.systems = assemble_all_subdomains(s.mesh, s.table, dec, s.load, aopt);
  }
  const ScatterReport scatter = scatter_sum_check(s.systems, s.mesh, s.global, s.load.b_single);
  r.add("scatter_matrix_residual", scatter.matrix_residual);
  r.add("scatter_load_residual", scatter.load_residual);
  detail::check(s, scatter.matrix_residual <= config.scatter_tolerance, "scatter matrix residual above tolerance");
  detail::check(s, scatter.load_residual <= config.scatter_tolerance, "scatter load residual above tolerance");

  s.constraints = build_constraints(dec.index, config.constraint_mode);
  const ConstraintReport crep = verify_constraint_matrix(*s.constraints, dec.index);
  r.add("constraint_mode", to_string(config.constraint_mode));
  r.add("constraint_rows", s.constraints->num_rows());
  r.add("constraint_expected_rows", crep.expected_rows);
  r.add("constraint_rank", crep.rank_checked ? std::to_string(crep.rank) : std::string("unchecked"));
  if (config.constraint_mode == ConstraintMode::Redundant) {
    r.add("constraint_rank_deficiency_expected", redundant_deficiency(dec.index));
    if (crep.rank_checked) {
      detail::check(s, s.constraints->num_rows() - crep.rank == redundant_deficiency(dec.index),
                    "redundant constraint rank deficiency differs from the per-node count");
    }
  }
  for (const auto& p : crep.problems) s.failures.push_back("constraints: " + p);

  // The direct KKT path needs full row rank; redundant runs solve with the
  // non-redundant subset, which has the same solution set.
  s.solve_constraints = config.constraint_mode == ConstraintMode::NonRedundant
                            ? *s.constraints
                            : build_constraints(dec.index, ConstraintMode::NonRedundant);
  r.add("solve_constraint_mode", to_string(s.solve_constraints->mode));
  {
    detail::StageTimer t(s, "dd_solve");
    const KKTSystem kkt = assemble_kkt(s.systems, *s.solve_constraints);
    r.add("kkt_size", static_cast<std::size_t>(kkt.matrix.rows()));
    s.dd = solve_dd(kkt, config.solver);
  }
  s.reconstruction = reconstruct_global(s.dd->u, s.systems, s.mesh.num_unknowns());
  const EquivalenceReport eq = equivalence_report(s.reconstruction.u, s.u_single, *s.constraints, s.dd->u,
                                                  s.reconstruction.max_disagreement, s.dd->residual);
  const double stat = stationarity_defect(s.systems, *s.solve_constraints, *s.dd);
  const double e_dd = energy_sum(s.systems, s.dd->u);
  const double e_gap = std::abs(e_dd - e_single) / (1.0 + std::abs(e_single));
  const bool single_block = dec.count() == 1;

  r.add("kkt_residual", eq.solver_residual);
  r.add("stationarity_defect", stat);
  r.add("constraint_violation", eq.constraint_violation);
  r.add("max_disagreement", eq.max_disagreement);
  r.add("rel_inf_error", eq.rel_inf_error);
  r.add("rel_l2_error", eq.rel_l2_error);
  r.add("solution_bitwise_identical", eq.bitwise_identical);
  if (single_block) r.add("matrix_bitwise_identical", bitwise_equal(s.systems.front().a, s.global.a_single));
  r.add("energy_dd", e_dd);
  r.add("energy_relative_gap", e_gap);

  detail::check(s, eq.rel_inf_error <= config.equivalence_tolerance, "DD solution differs from the single-domain solution");
  detail::check(s, eq.constraint_violation <= config.constraint_tolerance, "interface constraints violated");
  detail::check(s, eq.max_disagreement <= config.constraint_tolerance, "subdomain copies of a node disagree");
  detail::check(s, stat <= config.solver.tolerance, "KKT stationarity defect above solver tolerance");
  detail::check(s, e_gap <= config.energy_tolerance, "energy sum differs from the single-domain energy");

  r.add("checks_failed", s.failures.size());
  for (std::size_t k = 0; k < s.failures.size(); ++k) r.add("failure_" + std::to_string(k), s.failures[k]);
  r.add("status", s.failures.empty() ? "ok" : "check_failed");
  return s;
}

/// Stacked constraint matrix (M_1 ... M_Ns) in global column order.
inline SparseMatrix stacked_constraints(const ConstraintMatrix& c) {
  Eigen::Index cols = 0;
  std::vector<Eigen::Index> offsets;
  for (const auto& b : c.blocks) {
    offsets.push_back(cols);
    cols += b.cols();
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t n = 0; n < c.blocks.size(); ++n) {
    for (int r = 0; r < c.blocks[n].outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(c.blocks[n], r); it; ++it) trips.emplace_back(r, offsets[n] + it.col(), it.value());
    }
  }
  SparseMatrix m(static_cast<Eigen::Index>(c.num_rows()), cols);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

/// Writes the selected artifacts into `dir`; returns the written paths. An empty
/// selection writes nothing and does not touch the file system. Artifacts whose
/// stage was not reached are skipped.
inline std::vector<std::filesystem::path> export_artifacts(const RunState& s, const std::set<std::string>& selection,
                                                           const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  if (selection.empty()) return written;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error(ErrorCode::Io, "cannot create output directory " + dir.string());
  auto want = [&](const char* k) { return selection.count(k) > 0; };
  auto add = [&](const std::string& name) {
    written.push_back(dir / name);
    return written.back();
  };

  if (want("mesh")) write_mesh(add("mesh.txt"), s.mesh);
  if (want("a_single")) write_matrix_market(add("a_single.mtx"), s.global.a_single);
  if (want("a_full")) write_matrix_market(add("a_full.mtx"), s.global.full);
  if (want("load")) write_vector_csv(add("b_single.csv"), s.load.b_single, "b");
  if (s.dec && want("partition")) write_partition_csv(add("partition.csv"), s.dec->partition);
  if (want("subdomains")) {
    for (const auto& sys : s.systems) {
      const std::string stem = "subdomain_" + std::to_string(sys.id);
      write_matrix_market(add(stem + "_A.mtx"), sys.a);
      write_vector_csv(add(stem + "_b.csv"), sys.b, "b");
      Vector ids(static_cast<Eigen::Index>(sys.unknown_nodes.size()));
      for (std::size_t i = 0; i < sys.unknown_nodes.size(); ++i) ids[static_cast<Eigen::Index>(i)] = static_cast<double>(sys.unknown_nodes[i]);
      write_vector_csv(add(stem + "_nodes.csv"), ids, "global_node");
    }
  }
  if (s.constraints && want("constraints")) {
    write_matrix_market(add("constraints.mtx"), stacked_constraints(*s.constraints));
    write_constraint_rows_csv(add("constraint_rows.csv"), *s.constraints);
  }
  if (s.dd && want("solution")) write_solution_csv(add("solution.csv"), s.mesh, s.u_single, s.reconstruction.u);
  if (want("report")) s.report.write(add("report.txt"));
  return written;
}

struct RunOutcome {
  int exit_code = 0;
  std::string message;
  std::optional<RunState> state;
};

/// Runs the pipeline, writes artifacts and maps every failure to its exit code.
/// `selection_override` replaces the configured artifact selection (used by export).
inline RunOutcome run(const RunConfig& config, Stage stop = Stage::Full,
                      const std::optional<std::set<std::string>>& selection_override = std::nullopt) {
  RunOutcome out;
  try {
    out.state = run_pipeline(config, stop);
    const auto& sel = selection_override ? *selection_override : config.artifacts;
    export_artifacts(*out.state, sel, config.resolve(config.output_dir));
    if (!out.state->failures.empty()) {
      out.exit_code = exit_code(ErrorCode::CheckFailed);
      out.message = "invariant check failed: " + out.state->failures.front();
    }
  } catch (const Error& e) {
    out.exit_code = exit_code(e.code());
    out.message = e.what();
  } catch (const std::exception& e) {
    out.exit_code = 1;
    out.message = std::string("internal error: ") + e.what();
  }
  return out;
}

}  // namespace nlddd
