#include "surfacttrack/interface_update.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace surfacttrack;
using namespace surfacttrack::front;

namespace {

const AnalyticVelocity kZero{[](const Vec2&) { return Vec2::Zero(); }};

InterfaceMesh perturbed_circle(int K, double amplitude, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-amplitude, amplitude);
  std::vector<double> theta(K);
  for (int k = 0; k < K; ++k) theta[k] = (k + d(rng)) * 2.0 * std::numbers::pi / K;
  std::vector<Vec2> pts;
  for (double t : theta) pts.emplace_back(std::cos(t), std::sin(t));
  return InterfaceMesh(pts);
}

}  // namespace

TEST(InterfaceUpdate, HgRestOnRegularPolygon) {
  for (int K : {8, 32, 100}) {
    const InterfaceMesh g = InterfaceMesh::circle({0.3, -0.2}, 1.0, K);
    const auto upd = step_hg(g, kZero, 1e-2);
    for (int k = 0; k < K; ++k) {
      EXPECT_NEAR((upd.positions[k] - g.vertex(k)).norm(), 0.0, 1e-13);
      EXPECT_NEAR(upd.kappa[k], -1.0 / std::cos(std::numbers::pi / K), 1e-12);
    }
    EXPECT_LE(upd.residual, 1e-12);
  }
}

TEST(InterfaceUpdate, HgCurvatureIdentity) {
  const InterfaceMesh g = perturbed_circle(40, 0.3, 2);
  const AnalyticVelocity u{[](const Vec2& z) { return Vec2(0.4 * z.y() + 0.1, -0.2 * z.x() * z.x()); }, 3};
  const auto upd = step_hg(g, u, 0.05);
  const SparseMatrix A = laplace_beltrami_stiffness(g);
  Vector x(g.num_vertices()), y(g.num_vertices());
  for (int k = 0; k < g.num_vertices(); ++k) {
    x[k] = upd.positions[k].x();
    y[k] = upd.positions[k].y();
  }
  const Vector ax = A * x, ay = A * y;
  const auto n = vertex_normal_weights(g);
  for (int k = 0; k < g.num_vertices(); ++k)
    EXPECT_NEAR((Vec2(ax[k], ay[k]) + upd.kappa[k] * n[k]).norm(), 0.0, 1e-12);
  const Vector b = normal_velocity_moments(g, u);
  for (int k = 0; k < g.num_vertices(); ++k)
    EXPECT_NEAR(n[k].dot(upd.positions[k] - g.vertex(k)), 0.05 * b[k], 1e-13);
}

TEST(InterfaceUpdate, HgTranslationPreservesArea) {
  const InterfaceMesh g = InterfaceMesh::circle({0.1, 0.2}, 1.0, 48, 0.3);
  const AnalyticVelocity u{[](const Vec2&) { return Vec2(0.7, -1.3); }};
  const double tau = 0.01;
  const auto upd = step_hg(g, u, tau);
  EXPECT_NEAR(enclosed_area(g.with_positions(upd.positions)), enclosed_area(g), 1e-12);
  for (int k = 0; k < g.num_vertices(); ++k)
    EXPECT_NEAR((upd.positions[k] - g.vertex(k) - tau * Vec2(0.7, -1.3)).norm(), 0.0, 1e-14);
  for (int k = 0; k < g.num_vertices(); ++k)
    EXPECT_NEAR(upd.kappa[k], -1.0 / std::cos(std::numbers::pi / 48), 1e-12);
}

TEST(InterfaceUpdate, HgAreaIdentity) {
  const InterfaceMesh g = InterfaceMesh::circle({0.0, 0.0}, 1.0, 64);
  const AnalyticVelocity u{[](const Vec2& z) { return Vec2(0.3 * z.x() - z.y(), 0.3 * z.y() + z.x()); }, 2};
  double prev = 0.0;
  for (double tau : {1e-2, 5e-3, 2.5e-3}) {
    const auto upd = step_hg(g, u, tau);
    const double dA = enclosed_area(g.with_positions(upd.positions)) - enclosed_area(g);
    const double flux = tau * normal_velocity_moments(g, u).sum();
    const double gap = std::abs(dA - flux);
    EXPECT_LE(gap, 2.0 * tau * tau);
    if (prev > 0.0) EXPECT_LT(gap, 0.3 * prev);
    prev = gap;
  }
}

TEST(InterfaceUpdate, HgEquidistributes) {
  // Edge ratio close to 3.
  InterfaceMesh g = perturbed_circle(16, 0.35, 4);
  double ratio = edge_ratio(g);
  EXPECT_GT(ratio, 2.8);
  for (int step = 0; step < 200; ++step) {
    const auto upd = step_hg(g, kZero, 1e-3);
    g = g.with_positions(upd.positions);
    const double r = edge_ratio(g);
    EXPECT_LE(r, ratio + 1e-12) << "step " << step;
    ratio = r;
  }
  EXPECT_LT(ratio, 1.05);
}

TEST(InterfaceUpdate, HgRejectsDegenerateNormals) {
  const InterfaceMesh tri = InterfaceMesh::circle({0.0, 0.0}, 1.0, 3);
  const InterfaceMesh flat = tri.with_positions({{0.0, 0.0}, {2.0, 0.0}, {1.0, 0.0}});
  EXPECT_THROW(step_hg(flat, kZero, 0.1), GeometryError);
}

TEST(InterfaceUpdate, GdLagrangianTransport) {
  const InterfaceMesh g = perturbed_circle(30, 0.3, 1);
  auto field = [](const Vec2& z) { return Vec2(std::sin(z.y()), 0.5 * z.x() * z.y()); };
  const AnalyticVelocity u{field};
  const double tau = 0.013;
  const auto upd = step_gd(g, u, tau, GdRhsMode::lumped);
  for (int k = 0; k < g.num_vertices(); ++k) {
    const Vec2 q = g.vertex(k);
    const Vec2 want = q + tau * field(q);
    EXPECT_EQ(upd.positions[k].x(), want.x());
    EXPECT_EQ(upd.positions[k].y(), want.y());
  }
  const auto rest = step_gd(g, kZero, tau);
  for (int k = 0; k < g.num_vertices(); ++k) EXPECT_EQ(rest.positions[k], g.vertex(k));
}

TEST(InterfaceUpdate, GdFullRhsWithConstantVelocity) {
  const InterfaceMesh g = perturbed_circle(30, 0.3, 6);
  const AnalyticVelocity u{[](const Vec2&) { return Vec2(0.25, -0.5); }};
  const auto upd = step_gd(g, u, 0.1, GdRhsMode::full);
  for (int k = 0; k < g.num_vertices(); ++k)
    EXPECT_NEAR((upd.positions[k] - g.vertex(k) - Vec2(0.025, -0.05)).norm(), 0.0, 1e-14);
}

TEST(InterfaceUpdate, GdVectorCurvatureOnRegularPolygon) {
  for (int K : {4, 8, 64}) {
    const InterfaceMesh g = InterfaceMesh::circle({0.0, 0.0}, 1.0, K);
    const auto kv = gd_curvature(g, g.vertices());
    // Second difference of the vertices over the lumped mass: 2 (1 - cos(2 pi/K)) / (2 sin(pi/K))^2.
    const double s = 2.0 * std::sin(std::numbers::pi / K);
    const double expected = 2.0 * (1.0 - std::cos(2.0 * std::numbers::pi / K)) / (s * s);
    for (int k = 0; k < K; ++k) {
      EXPECT_NEAR(kv[k].norm(), expected, 1e-12);
      EXPECT_NEAR(kv[k].dot(g.vertex(k)), -kv[k].norm(), 1e-12);
    }
  }
}
