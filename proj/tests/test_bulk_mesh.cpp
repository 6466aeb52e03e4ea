#include "surfacttrack/bulk_mesh.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace surfacttrack;
using namespace surfacttrack::bulk;

namespace {

const Box kBench{{0.0, 0.0}, {1.0, 2.0}};

InterfaceMesh bubble(int K = 32) { return InterfaceMesh::circle({0.5, 0.5}, 0.25, K); }

double total_area(const BulkMesh& m) {
  double s = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) s += m.area(t);
  return s;
}

std::map<double, int> diameter_histogram(const BulkMesh& m) {
  std::map<double, int> h;
  for (int t = 0; t < m.num_triangles(); ++t) ++h[std::round(m.diameter(t) * 1e9) / 1e9];
  return h;
}

}  // namespace

TEST(BulkMesh, SizesForBenchmarkLevels) {
  AdaptConfig cfg;
  cfg.level_k = 5;
  cfg.level_l = 2;
  EXPECT_DOUBLE_EQ(cfg.h_fine(kBench), 1.0 / 32);
  EXPECT_DOUBLE_EQ(cfg.h_coarse(kBench), 1.0 / 4);
}

TEST(BulkMesh, CoarseMeshAwayFromInterface) {
  AdaptConfig cfg;
  const BulkMesh coarse = coarse_mesh(kBench, cfg);
  EXPECT_NEAR(total_area(coarse), 2.0, 1e-12);
  for (int t = 0; t < coarse.num_triangles(); ++t) EXPECT_LE(coarse.diameter(t), 0.25 + 1e-12);

  const BulkMesh m = adapt(kBench, bubble(), cfg);
  // The top quarter of the box is far from the bubble and stays coarse.
  int far = 0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    const Vec2 c = m.point(t, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    if (c.y() > 1.5) {
      ++far;
      EXPECT_GT(m.diameter(t), 0.125);
    }
  }
  EXPECT_GT(far, 0);
}

TEST(BulkMesh, AreaSumAndFineBand) {
  AdaptConfig cfg;
  const InterfaceMesh g = bubble(64);
  const BulkMesh m = adapt(kBench, g, cfg);
  EXPECT_NEAR(total_area(m), kBench.area(), 1e-12 * kBench.area());
  const double hf = cfg.h_fine(kBench);
  const auto labels = classify_elements(m, g);
  int cut = 0;
  for (int t = 0; t < m.num_triangles(); ++t) {
    if (labels[t] == Phase::interfacial) {
      ++cut;
      EXPECT_LE(m.diameter(t), hf + 1e-12);
    }
  }
  EXPECT_GT(cut, 0);
}

TEST(BulkMesh, ConformingEdges) {
  // Every interior edge has exactly two triangles, boundary edges one.
  const BulkMesh m = adapt(kBench, bubble(), AdaptConfig{});
  std::vector<int> count(m.num_edges(), 0);
  for (int t = 0; t < m.num_triangles(); ++t)
    for (int e : m.triangle_edges(t)) ++count[e];
  for (int e = 0; e < m.num_edges(); ++e) {
    if (m.edge_side(e) == kInteriorEdge) EXPECT_EQ(count[e], 2) << "edge " << e;
    else EXPECT_EQ(count[e], 1) << "edge " << e;
  }
}

TEST(BulkMesh, BoundaryTags) {
  const BulkMesh m = adapt(kBench, bubble(), AdaptConfig{});
  double len[4] = {0, 0, 0, 0};
  for (int e = 0; e < m.num_edges(); ++e) {
    const int s = m.edge_side(e);
    if (s == kInteriorEdge) continue;
    const Vec2 a = m.vertex(m.edge(e)[0]);
    const Vec2 b = m.vertex(m.edge(e)[1]);
    len[s] += (b - a).norm();
    switch (s) {
      case bottom: EXPECT_EQ(a.y(), 0.0); EXPECT_EQ(b.y(), 0.0); break;
      case top: EXPECT_EQ(a.y(), 2.0); EXPECT_EQ(b.y(), 2.0); break;
      case left: EXPECT_EQ(a.x(), 0.0); EXPECT_EQ(b.x(), 0.0); break;
      case right: EXPECT_EQ(a.x(), 1.0); EXPECT_EQ(b.x(), 1.0); break;
    }
  }
  EXPECT_NEAR(len[bottom], 1.0, 1e-12);
  EXPECT_NEAR(len[top], 1.0, 1e-12);
  EXPECT_NEAR(len[left], 2.0, 1e-12);
  EXPECT_NEAR(len[right], 2.0, 1e-12);
}

TEST(BulkMesh, AdaptIsAFixedPoint) {
  const InterfaceMesh g = bubble();
  const BulkMesh a = adapt(kBench, g, AdaptConfig{});
  const BulkMesh b = adapt(kBench, g, AdaptConfig{});
  EXPECT_EQ(a.num_triangles(), b.num_triangles());
  EXPECT_EQ(diameter_histogram(a), diameter_histogram(b));
}

TEST(BulkMesh, ClassificationMatchesSampling) {
  AdaptConfig cfg;
  cfg.level_k = 5;
  cfg.level_l = 5;
  const Box unit{{0.0, 0.0}, {1.0, 1.0}};
  const InterfaceMesh g = bubble(64);
  const BulkMesh m = adapt(unit, g, cfg);
  const auto labels = classify_elements(m, g);

  // 100 points per triangle on a barycentric lattice including the boundary.
  const int n = 12;
  for (int t = 0; t < m.num_triangles(); ++t) {
    int in = 0, out = 0;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) {
        const double l1 = double(i) / n, l2 = double(j) / n;
        const Vec2 p = m.point(t, {1.0 - l1 - l2, l1, l2});
        (inside_polygon(g, p) ? in : out) += 1;
      }
    }
    if (labels[t] == Phase::interior) EXPECT_EQ(out, 0) << t;
    if (labels[t] == Phase::exterior) EXPECT_EQ(in, 0) << t;
    if (in > 0 && out > 0) EXPECT_EQ(labels[t], Phase::interfacial) << t;
  }
}

TEST(BulkMesh, ClassificationSimpleCases) {
  const InterfaceMesh g = bubble(16);
  const BulkMesh m = adapt(kBench, g, AdaptConfig{});
  const auto labels = classify_elements(m, g);
  EXPECT_EQ(labels[m.locate({0.9, 1.9}).triangle], Phase::exterior);
  EXPECT_EQ(labels[m.locate({0.5, 0.5}).triangle], Phase::interior);
  const Vec2 v = g.vertex(0);
  EXPECT_EQ(labels[m.locate(v).triangle], Phase::interfacial);
}

TEST(BulkMesh, PhaseValues) {
  const std::vector<Phase> l{Phase::interior, Phase::exterior, Phase::interfacial};
  const Vector rho = phase_field(l, 100.0, 1000.0);
  EXPECT_EQ(rho[0], 100.0);
  EXPECT_EQ(rho[1], 1000.0);
  EXPECT_EQ(rho[2], 550.0);
  EXPECT_DOUBLE_EQ(phase_field(l, 0.1, 10.0)[2], 5.05);
  const Vector c = phase_field(l, 3.0, 3.0);
  EXPECT_TRUE((c.array() == 3.0).all());
}

TEST(BulkMesh, LocateMatchesExhaustiveScan) {
  const BulkMesh m = adapt(kBench, bubble(), AdaptConfig{});
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uy(0.0, 2.0);
  for (int s = 0; s < 2000; ++s) {
    const Vec2 p(ux(rng), uy(rng));
    const Location loc = m.locate(p);
    int want = -1;
    for (int t = 0; t < m.num_triangles() && want < 0; ++t) {
      const auto l = m.bary_in(t, p);
      if (std::min({l[0], l[1], l[2]}) >= -1e-12) want = t;
    }
    ASSERT_EQ(loc.triangle, want);
    const Vec2 back = m.point(loc.triangle, loc.bary);
    EXPECT_NEAR((back - p).norm(), 0.0, 1e-13);
  }
}

TEST(BulkMesh, BarycentricSpecialPoints) {
  const BulkMesh m = coarse_mesh(kBench, AdaptConfig{});
  const int t = 3;
  for (int i = 0; i < 3; ++i) {
    const auto l = m.bary_in(t, m.vertex(m.triangle(t)[i]));
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(l[j], i == j ? 1.0 : 0.0, 1e-14);
  }
  const auto c = m.bary_in(t, m.point(t, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
  for (double v : c) EXPECT_NEAR(v, 1.0 / 3, 1e-14);
  EXPECT_THROW((void)m.locate({2.0, 0.5}), Error);
}

TEST(BulkMesh, VelocityTransfer) {
  const BulkMesh a = adapt(kBench, bubble(), AdaptConfig{});
  const BulkMesh b = adapt(kBench, InterfaceMesh::circle({0.5, 0.8}, 0.25, 32), AdaptConfig{});
  auto lin = [](const Vec2& z) { return Vec2(1.0 + 2.0 * z.x() - z.y(), 0.5 * z.y() - 3.0 * z.x()); };
  auto quad = [](const Vec2& z) {
    return Vec2(z.x() * z.x() - z.x() * z.y() + 2.0, z.y() * z.y() + 0.5 * z.x());
  };

  const Vector ua = interpolate_p2(a, lin);
  EXPECT_EQ(transfer_velocity(a, ua, a), ua);
  const Vector ub = transfer_velocity(a, ua, b);
  EXPECT_LE((ub - interpolate_p2(b, lin)).cwiseAbs().maxCoeff(), 1e-12);
  Vector ra = Vector::Random(ua.size());
  const Vector rb = transfer_velocity(a, ra, b);
  EXPECT_LE((transfer_velocity(b, rb, b) - rb).cwiseAbs().maxCoeff(), 1e-12);

  // Quadratics under nested refinement: coarse mesh into an adapted one.
  const BulkMesh c = coarse_mesh(kBench, AdaptConfig{});
  const Vector qc = interpolate_p2(c, quad);
  const Vector qa = transfer_velocity(c, qc, a);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uy(0.0, 2.0);
  for (int s = 0; s < 500; ++s) {
    const Vec2 p(ux(rng), uy(rng));
    EXPECT_NEAR((eval_p2(a, qa, p) - quad(p)).norm(), 0.0, 1e-12);
  }
}

TEST(BulkMesh, DensityTransfer) {
  const BulkMesh a = adapt(kBench, bubble(), AdaptConfig{});
  const BulkMesh b = adapt(kBench, InterfaceMesh::circle({0.5, 0.7}, 0.25, 32), AdaptConfig{});
  Vector r(a.num_triangles());
  for (int t = 0; t < a.num_triangles(); ++t) r[t] = 1.0 + t % 5;
  EXPECT_LE((transfer_density(a, r, a) - r).cwiseAbs().maxCoeff(), 1e-14);
  const Vector cst = Vector::Constant(a.num_triangles(), 7.5);
  EXPECT_LE((transfer_density(a, cst, b).array() - 7.5).abs().maxCoeff(), 1e-14);

  // Coarse into nested fine: every new triangle lies inside one old one.
  const BulkMesh c = coarse_mesh(kBench, AdaptConfig{});
  Vector rc(c.num_triangles());
  for (int t = 0; t < c.num_triangles(); ++t) rc[t] = 0.5 * t;
  const Vector ra = transfer_density(c, rc, a);
  for (int t = 0; t < a.num_triangles(); ++t)
    EXPECT_NEAR(ra[t], rc[c.locate(a.point(t, {1.0 / 3, 1.0 / 3, 1.0 / 3})).triangle], 1e-12 * (1.0 + ra[t]));
}

TEST(BulkMesh, SegmentSplitCoversSegment) {
  const BulkMesh m = adapt(kBench, bubble(), AdaptConfig{});
  const Vec2 p0(0.21, 0.43), p1(0.37, 0.52);
  const auto pieces = split_segment(m, p0, p1);
  ASSERT_FALSE(pieces.empty());
  EXPECT_EQ(pieces.front().t0, 0.0);
  EXPECT_EQ(pieces.back().t1, 1.0);
  for (std::size_t i = 1; i < pieces.size(); ++i) EXPECT_EQ(pieces[i].t0, pieces[i - 1].t1);
  for (const auto& s : pieces) {
    for (double t : {s.t0, s.t1, 0.5 * (s.t0 + s.t1)}) {
      const auto l = m.bary_in(s.triangle, p0 + t * (p1 - p0));
      EXPECT_GE(std::min({l[0], l[1], l[2]}), -1e-10);
    }
  }
}
