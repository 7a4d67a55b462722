#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace nlddd;
using namespace nlddd::testing;

namespace {

struct Solved {
  ConstraintMatrix c;
  KKTSystem kkt;
  DDSolution sol;
  Reconstruction rec;
  Vector u_single;
};

Solved solve(const Problem& p) {
  Solved s;
  s.c = build_constraints(p.dec.index, ConstraintMode::NonRedundant);
  s.kkt = assemble_kkt(p.systems, s.c);
  s.sol = solve_dd(s.kkt);
  s.rec = reconstruct_global(s.sol.u, p.systems, p.mesh.num_unknowns());
  s.u_single = solve_single(p.global.a_single, p.load.b_single);
  return s;
}

}  // namespace

TEST(AssembleKkt, DimensionsAndSymmetry) {
  const Problem p(kDeskH, constant_kernel(), 2, 2);
  const ConstraintMatrix c = build_constraints(p.dec.index, ConstraintMode::NonRedundant);
  const KKTSystem kkt = assemble_kkt(p.systems, c);
  std::size_t primal = 0;
  for (const auto& s : p.systems) primal += s.unknown_nodes.size();
  EXPECT_EQ(static_cast<std::size_t>(kkt.num_primal), primal);
  EXPECT_EQ(static_cast<std::size_t>(kkt.matrix.rows()), primal + c.num_rows());
  EXPECT_EQ(kkt.matrix.rows(), kkt.matrix.cols());
  EXPECT_LE(symmetry_defect(kkt.matrix), 1e-14 * inf_norm(kkt.matrix));
  // The multiplier block is zero.
  const SparseMatrix zero_block = block_of(kkt.matrix, static_cast<int>(primal), static_cast<int>(kkt.matrix.rows()),
                                          static_cast<int>(primal), static_cast<int>(kkt.matrix.rows()));
  EXPECT_EQ(zero_block.nonZeros(), 0);
}

TEST(AssembleKkt, SingleBlockIsTheSingleDomainMatrix) {
  const Problem p(kDeskH, constant_kernel(), 1, 1);
  const ConstraintMatrix c = build_constraints(p.dec.index, ConstraintMode::NonRedundant);
  const KKTSystem kkt = assemble_kkt(p.systems, c);
  EXPECT_EQ(kkt.num_constraints, 0);
  EXPECT_TRUE(bitwise_equal(kkt.matrix, p.global.a_single));
  const DDSolution sol = solve_dd(kkt);
  EXPECT_TRUE(bitwise_equal(sol.u.front(), solve_single(p.global.a_single, p.load.b_single)));
}

TEST(AssembleKkt, RejectsRedundantConstraints) {
  const Problem p(kDeskH, constant_kernel(), 2, 2);
  const ConstraintMatrix c = build_constraints(p.dec.index, ConstraintMode::Redundant);
  try {
    assemble_kkt(p.systems, c);
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    EXPECT_NE(std::string(e.what()).find("non-redundant"), std::string::npos);
  }
}

TEST(SolveDd, ZeroAndConstantData) {
  for (auto [h, b] : {std::pair{kDeskH, 2}, std::pair{kFineH, 3}}) {
    const auto zero = [](const Point2&) { return 0.0; };
    const Problem p0(h, gaussian_kernel(), b, b, zero, zero);
    const Solved s0 = solve(p0);
    for (const auto& u : s0.sol.u) EXPECT_TRUE(u.isZero(0.0));
    EXPECT_TRUE(s0.sol.lambda.isZero(0.0));

    const Problem pc(h, gaussian_kernel(), b, b, zero, [](const Point2&) { return -1.75; });
    const Solved sc = solve(pc);
    for (const auto& u : sc.sol.u) EXPECT_LE((u.array() + 1.75).abs().maxCoeff(), 1e-10);
  }
}

struct EquivCase {
  double h;
  int blocks;
  bool gaussian;
};

class Equivalence : public ::testing::TestWithParam<EquivCase> {};

TEST_P(Equivalence, MatchesSingleDomain) {
  const auto c = GetParam();
  const Problem p(c.h, c.gaussian ? gaussian_kernel() : constant_kernel(), c.blocks, c.blocks);
  const Solved s = solve(p);
  const EquivalenceReport r = equivalence_report(s.rec.u, s.u_single, s.c, s.sol.u, s.rec.max_disagreement, s.sol.residual);
  EXPECT_LE(r.rel_inf_error, 1e-8);
  EXPECT_LE(r.rel_l2_error, 1e-8);
  EXPECT_LE(r.constraint_violation, 1e-10);
  EXPECT_LE(r.max_disagreement, 1e-10);
  EXPECT_LE(r.solver_residual, 1e-10);
  EXPECT_LE(stationarity_defect(p.systems, s.c, s.sol), 1e-10);
  const double e_single = energy_single(p.global, s.u_single, p.load.g_vec, p.load.load);
  EXPECT_LE(std::abs(energy_sum(p.systems, s.sol.u) - e_single), 1e-10 * (1.0 + std::abs(e_single)));
}

std::string case_name(const ::testing::TestParamInfo<EquivCase>& info) {
  const auto& c = info.param;
  return std::string(c.h == kDeskH ? "desk" : "fine") + "_" + std::to_string(c.blocks) + "x" + std::to_string(c.blocks) +
         (c.gaussian ? "_gaussian" : "_constant");
}

INSTANTIATE_TEST_SUITE_P(Decompositions, Equivalence,
                         ::testing::Values(EquivCase{kDeskH, 2, false}, EquivCase{kDeskH, 2, true},
                                           EquivCase{kFineH, 3, false}, EquivCase{kFineH, 3, true}),
                         case_name);

TEST(Reconstruct, IdentityDisagreementAndMissingOwner) {
  const Problem one(kDeskH, constant_kernel(), 1, 1);
  std::mt19937_64 rng(3);
  const Vector u = random_vector(49, rng);
  const Reconstruction r1 = reconstruct_global({u}, one.systems, 49);
  EXPECT_TRUE(bitwise_equal(r1.u, u));
  EXPECT_EQ(r1.max_disagreement, 0.0);

  const Problem p(kDeskH, constant_kernel(), 2, 2);
  std::vector<Vector> parts;
  for (const auto& s : p.systems) parts.push_back(restrict_to(s, u));
  EXPECT_EQ(reconstruct_global(parts, p.systems, 49).max_disagreement, 0.0);
  const ConstraintMatrix c = build_constraints(p.dec.index, ConstraintMode::NonRedundant);
  const auto& row = c.rows.front();
  parts[static_cast<std::size_t>(row.minus)][row.col_minus] += 0.01;
  EXPECT_GE(reconstruct_global(parts, p.systems, 49).max_disagreement, 0.01 - 1e-15);
  EXPECT_THROW(reconstruct_global(parts, p.systems, 50), Error);
}

TEST(SolveDd, FloatingOnlyConfigurationIsSingular) {
  // The floating centre block alone, without constraints: constants lie in its kernel.
  const Problem p(kFineH, gaussian_kernel(), 3, 3);
  std::vector<SubdomainSystem> floating = {p.systems[4]};
  ConstraintMatrix none;
  none.blocks.resize(1);
  none.blocks[0].resize(0, static_cast<Eigen::Index>(floating[0].size()));
  KKTSystem kkt = assemble_kkt(floating, none);
  kkt.rhs = Vector::Ones(kkt.rhs.size());
  EXPECT_THROW(solve_dd(kkt), Error);
}

TEST(EquivalenceReport, FieldsAreNonnegative) {
  const Problem p(kDeskH, gaussian_kernel(), 2, 2);
  const Solved s = solve(p);
  Vector off = s.u_single;
  off[0] += 0.5;
  const EquivalenceReport r = equivalence_report(off, s.u_single, s.c, s.sol.u, 0.0, 0.0);
  EXPECT_NEAR(r.rel_inf_error, 0.5 / std::max(1.0, s.u_single.cwiseAbs().maxCoeff()), 1e-15);
  EXPECT_FALSE(r.bitwise_identical);
  EXPECT_THROW(equivalence_report(Vector::Zero(3), s.u_single, s.c, s.sol.u, 0.0, 0.0), Error);
}
