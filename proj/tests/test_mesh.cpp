#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "nlddd/mesh.hpp"

using namespace nlddd;
using nlddd::testing::kDeskH;

namespace {

// Brute-force count of grid nodes inside the open square (0,L)^2.
std::size_t interior_grid_nodes(double L, double h) {
  const int n = static_cast<int>(std::lround(L / h));
  std::size_t c = 0;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) c += (i > 0 && i < n && j > 0 && j < n) ? 1 : 0;
  }
  return c;
}

std::size_t find_node(const Mesh& m, double x, double y) {
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    if (std::abs(m.vertex(i).x - x) < 1e-12 && std::abs(m.vertex(i).y - y) < 1e-12) return i;
  }
  return m.num_nodes();
}

}  // namespace

TEST(FrameMesh, DeskCounts) {
  const Mesh m = build_frame_mesh(1.0, kDeskH, 0.25);
  EXPECT_EQ(m.num_nodes(), 169u);
  EXPECT_EQ(m.num_elements(), 288u);
  EXPECT_EQ(m.num_unknowns(), interior_grid_nodes(1.0, kDeskH));
  EXPECT_EQ(m.num_unknowns(), 49u);
  for (std::size_t i = 0; i < m.num_unknowns(); ++i) {
    const Point2 p = m.vertex(i);
    EXPECT_GT(p.x, 0.0);
    EXPECT_LT(p.x, 1.0);
    EXPECT_GT(p.y, 0.0);
    EXPECT_LT(p.y, 1.0);
  }
  std::size_t omega = 0;
  for (auto r : m.regions()) omega += r == Region::Omega ? 1 : 0;
  EXPECT_EQ(omega, 128u);
}

TEST(FrameMesh, CoarseSingleUnknown) {
  const Mesh m = build_frame_mesh(1.0, 0.5, 0.5);
  EXPECT_EQ(m.num_nodes(), 25u);
  ASSERT_EQ(m.num_unknowns(), 1u);
  EXPECT_DOUBLE_EQ(m.vertex(0).x, 0.5);
  EXPECT_DOUBLE_EQ(m.vertex(0).y, 0.5);
}

TEST(FrameMesh, FrameWidthRoundsUp) {
  EXPECT_EQ(frame_layers(0.125, 0.3), 3u);
  EXPECT_EQ(frame_layers(0.125, 0.25), 2u);
  const Mesh m = build_frame_mesh(1.0, 0.125, 0.3);
  double xmin = 0.0;
  for (std::size_t i = 0; i < m.num_nodes(); ++i) xmin = std::min(xmin, m.vertex(i).x);
  EXPECT_NEAR(-xmin, 0.375, 1e-15);
  EXPECT_GE(-xmin, 0.3);
  EXPECT_TRUE(frame_covers_horizon(m, 0.3));
}

TEST(FrameMesh, RejectsBadArguments) {
  EXPECT_THROW(build_frame_mesh(1.0, 1.0, 0.25), Error);
  EXPECT_THROW(build_frame_mesh(1.0, 0.125, 0.0), Error);
  EXPECT_THROW(build_frame_mesh(1.0, 0.125, -1.0), Error);
  EXPECT_THROW(build_frame_mesh(1.0, 0.3, 0.25), Error);
  EXPECT_THROW(build_frame_mesh(1.0, -0.1, 0.25), Error);
}

TEST(FrameMesh, AreaSumsToFrameSquare) {
  const Mesh m = build_frame_mesh(1.0, kDeskH, 0.25);
  EXPECT_NEAR(m.total_area(), 1.5 * 1.5, 1e-12 * 2.25);
  const Mesh m2 = build_frame_mesh(1.0, kDeskH, 0.3);
  EXPECT_NEAR(m2.total_area(), 1.75 * 1.75, 1e-12 * 1.75 * 1.75);
}

TEST(FrameMesh, NumberingContract) {
  const Mesh m = build_frame_mesh(1.0, kDeskH, 0.25);
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    EXPECT_EQ(m.node_class(i) == NodeClass::OmegaUnknown, i < m.num_unknowns());
  }
}

TEST(ClassifyNodes, DeskMesh) {
  const Mesh m = build_frame_mesh(1.0, kDeskH, 0.25);
  const auto cls = classify_nodes(m);
  EXPECT_EQ(cls.gamma_nodes.size(), 120u);
  EXPECT_EQ(cls.omega_nodes.size(), 49u);
  const std::size_t corner = find_node(m, 0.0, 0.0);
  ASSERT_LT(corner, m.num_nodes());
  EXPECT_EQ(m.node_class(corner), NodeClass::GammaDirichlet);
  const std::size_t centre = find_node(m, 0.5, 0.5);
  ASSERT_LT(centre, m.num_nodes());
  EXPECT_EQ(m.node_class(centre), NodeClass::OmegaUnknown);
  // Independent rule: a node is Dirichlet iff some incident element is GAMMA.
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    bool touches_gamma = false;
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
      if (m.element(e).has_vertex(i) && m.region(e) == Region::Gamma) touches_gamma = true;
    }
    EXPECT_EQ(touches_gamma, m.node_class(i) == NodeClass::GammaDirichlet) << "node " << i;
  }
}

TEST(NodeElements, Incidence) {
  const Mesh m = build_frame_mesh(1.0, kDeskH, 0.25);
  EXPECT_EQ(node_elements(m, find_node(m, 0.5, 0.5)).size(), 6u);
  // Outer frame corners: the diagonal runs lower-left to upper-right, so the
  // lower-left and upper-right corners carry two triangles, the others one.
  EXPECT_EQ(node_elements(m, find_node(m, -0.25, -0.25)).size(), 2u);
  EXPECT_EQ(node_elements(m, find_node(m, 1.25, 1.25)).size(), 2u);
  EXPECT_EQ(node_elements(m, find_node(m, 1.25, -0.25)).size(), 1u);
  EXPECT_EQ(node_elements(m, find_node(m, -0.25, 1.25)).size(), 1u);
  EXPECT_THROW(node_elements(m, m.num_nodes()), Error);
  const Mesh empty;
  EXPECT_THROW(node_elements(empty, 0), Error);
}

TEST(NodeElements, RoundTripWithVertexLists) {
  const Mesh m = build_frame_mesh(1.0, kDeskH, 0.25);
  std::vector<std::set<std::size_t>> expect(m.num_nodes());
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    for (auto v : m.element(e).vertices) expect[v].insert(e);
  }
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    const auto& got = node_elements(m, i);
    EXPECT_EQ(std::set<std::size_t>(got.begin(), got.end()), expect[i]);
  }
}

TEST(FromParts, RejectsInvalidInput) {
  const std::vector<Point2> pts = {{0, 0}, {1, 0}, {0, 1}, {2, 2}};
  // Degenerate element.
  EXPECT_THROW(Mesh::from_parts({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}, {Region::Omega}, 1.0), Error);
  // Missing node.
  EXPECT_THROW(Mesh::from_parts(pts, {{0, 1, 7}}, {Region::Omega}, 1.0), Error);
  // Region count mismatch.
  EXPECT_THROW(Mesh::from_parts(pts, {{0, 1, 2}}, {}, 1.0), Error);
  // Dirichlet node listed before an unknown.
  const std::vector<Point2> sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {2, 0}};
  EXPECT_THROW(Mesh::from_parts(sq, {{1, 4, 2}, {0, 1, 3}}, {Region::Gamma, Region::Omega}, 1.0), Error);
}

TEST(FrameMesh, Deterministic) {
  const Mesh a = build_frame_mesh(1.0, kDeskH, 0.25);
  const Mesh b = build_frame_mesh(1.0, kDeskH, 0.25);
  ASSERT_EQ(a.num_nodes(), b.num_nodes());
  for (std::size_t i = 0; i < a.num_nodes(); ++i) {
    EXPECT_EQ(a.vertex(i).x, b.vertex(i).x);
    EXPECT_EQ(a.vertex(i).y, b.vertex(i).y);
  }
  for (std::size_t e = 0; e < a.num_elements(); ++e) EXPECT_EQ(a.element(e).vertices, b.element(e).vertices);
}
