#include "surfacttrack/manufactured.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace surfacttrack;
using namespace surfacttrack::exact;

namespace {

constexpr double kPi = std::numbers::pi;

using oracle::fd_residual;
using oracle::param;

}  // namespace

TEST(Manufactured, ExactFieldValues) {
  EXPECT_EQ(psi({1.0, 0.0}, 0.3), 0.0);
  EXPECT_NEAR(psi({std::sqrt(0.5), std::sqrt(0.5)}, 0.0), 0.5, 1e-15);
  EXPECT_NEAR(psi({1.0, 1.0}, 1.0), 0.00247875217666636, 1e-15);
}

TEST(Manufactured, VelocityValues) {
  const Vec2 u0 = velocity({0.8, -0.3}, 0.0);
  EXPECT_NEAR(u0.x(), kPi * 0.8 / 2, 1e-15);
  EXPECT_EQ(u0.y(), 0.0);
  EXPECT_EQ(velocity({0.0, 0.7}, 0.4).norm(), 0.0);
  EXPECT_NEAR(velocity({1.2, 0.7}, 0.5).norm(), 0.0, 1e-15);
}

TEST(Manufactured, VelocityIsTheParameterizationRate) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> th(0.0, 2 * kPi), tt(0.0, 1.0);
  for (int s = 0; s < 200; ++s) {
    const double theta = th(rng), t = tt(rng);
    const double k = 1e-6;
    const Vec2 rate = (param(theta, t + k) - param(theta, t - k)) / (2 * k);
    EXPECT_NEAR((rate - velocity(param(theta, t), t)).norm(), 0.0, 1e-8);
  }
}

TEST(Manufactured, CurvatureOnUnitCircle) {
  for (int k = 0; k < 64; ++k) {
    const double th = 2 * kPi * k / 64;
    EXPECT_NEAR(curvature({std::cos(th), std::sin(th)}, 0.0), -1.0, 1e-12);
  }
  // Ellipse with semi-axes sqrt(2) and 1 at the end of the major axis: -sqrt(2) / 1.
  EXPECT_NEAR(curvature({std::sqrt(2.0), 0.0}, 0.5), -std::sqrt(2.0), 1e-12);
}

TEST(Manufactured, ForcingHandValues) {
  EXPECT_NEAR(forcing({1.0, 0.0}, 0.0), 0.0, 1e-12);
  EXPECT_NEAR(forcing({std::sqrt(0.5), std::sqrt(0.5)}, 0.0), 3 * kPi / 8 - 1, 1e-12);
  EXPECT_THROW(forcing({1.1, 0.0}, 0.0), GeometryError);
}

TEST(Manufactured, ForcingMatchesFiniteDifferenceResidual) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> th(0.0, 2 * kPi), tt(0.0, 1.0);
  for (int s = 0; s < 300; ++s) {
    const double theta = th(rng), t = tt(rng);
    const Vec2 z = param(theta, t);
    EXPECT_NEAR(forcing(z, t, 1e-9), fd_residual(theta, t), 1e-6) << theta << " " << t;
  }
}

TEST(Manufactured, ProjectionExamples) {
  EXPECT_NEAR((project({2.0, 0.0}, 0.0) - Vec2(1.0, 0.0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((project({3.0, 0.0}, 0.5) - Vec2(std::sqrt(2.0), 0.0)).norm(), 0.0, 1e-12);
  const Vec2 on = param(0.9, 0.3);
  EXPECT_NEAR((project(on, 0.3) - on).norm(), 0.0, 1e-12);
  EXPECT_THROW(project({0.0, 0.0}, 0.2), GeometryError);
}

TEST(Manufactured, ProjectionIsClosestPoint) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> th(0.0, 2 * kPi), tt(0.0, 1.0), rr(0.6, 1.6);
  for (int s = 0; s < 200; ++s) {
    const double t = tt(rng);
    const double theta = th(rng);
    const Vec2 p = rr(rng) * param(theta, t);
    const Vec2 y = project(p, t);
    EXPECT_NEAR(level_set(y, t), 1.0, 1e-12);
    EXPECT_NEAR((project(y, t) - y).norm(), 0.0, 1e-12);
    for (int j = 0; j < 50; ++j)
      EXPECT_LE((p - y).norm(), (p - param(2 * kPi * j / 50, t)).norm() + 1e-12);
  }
}

TEST(Manufactured, ConvergenceIsSecondOrderAndConservative) {
  const auto gd16 = run_convergence(Scheme::gd, 16);
  const auto gd32 = run_convergence(Scheme::gd, 32);
  const auto hg32 = run_convergence(Scheme::hg, 32);
  EXPECT_NEAR(gd16.h0, 2 * std::sin(kPi / 16), 1e-15);
  EXPECT_NEAR(gd16.h0, 3.9018e-01, 5e-5);
  const double order = std::log(gd16.error / gd32.error) / std::log(gd16.h0 / gd32.h0);
  EXPECT_GT(order, 1.5);
  EXPECT_LE(gd32.max_mass_defect, 1e-12);
  EXPECT_LE(hg32.max_mass_defect, 1e-12);
  EXPECT_EQ(gd16.steps, static_cast<int>(std::ceil(1.0 / (gd16.h0 * gd16.h0))));
}
