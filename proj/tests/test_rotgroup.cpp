#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "resync/oracles.hpp"
#include "resync/rotgroup.hpp"

namespace resync {
namespace {

Block<2> rot2(double theta) {
  Block<2> r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

RotationStack<2> stack2(std::initializer_list<double> angles) {
  RotationStack<2> s(static_cast<int>(angles.size()), 2);
  int i = 0;
  for (double a : angles) s[i++] = rot2(a);
  return s;
}

TEST(ProjectSo, IdentityIsFixed) {
  const auto p = project_so(Block<3>::Identity());
  EXPECT_TRUE(p.rotation.isApprox(Block<3>::Identity(), 1e-14));
  EXPECT_FALSE(p.degenerate);
}

TEST(ProjectSo, ReflectedDiagonalGoesToIdentity) {
  Block<2> m;
  m << 2, 0, 0, -1;
  const auto p = project_so(m);
  EXPECT_LT((p.rotation - Block<2>::Identity()).norm(), 1e-12);
  EXPECT_FALSE(p.degenerate);
}

TEST(ProjectSo, RotationIsFixed) {
  Block<2> m;
  m << 0, 1, -1, 0;
  EXPECT_LT((project_so(m).rotation - m).norm(), 1e-14);
}

TEST(ProjectSo, DegenerateReflectionIsFlagged) {
  Block<2> m;
  m << 1, 0, 0, -1;
  const auto p = project_so(m);
  EXPECT_TRUE(p.degenerate);
  EXPECT_TRUE(is_rotation(p.rotation));
}

TEST(ProjectSo, NoCloserRotationAmongSamples) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Block<3> m = gaussian_block<3>(rng);
    const Block<3> p = project_so(m).rotation;
    ASSERT_TRUE(is_rotation(p));
    for (int k = 0; k < 100; ++k) {
      const Block<3> r = random_rotation<3>(rng);
      EXPECT_LE((p - m).norm(), (r - m).norm() + 1e-12);
    }
  }
}

TEST(ProjectSo, DynamicDimension) {
  std::mt19937_64 rng(4);
  const Block<Eigen::Dynamic> m = gaussian_block<Eigen::Dynamic>(rng, 5);
  const auto p = project_so(m);
  EXPECT_EQ(p.rotation.rows(), 5);
  EXPECT_TRUE(is_rotation(p.rotation));
}

TEST(TangentProject, SelfIsZero) {
  std::mt19937_64 rng(5);
  const Block<3> x = random_rotation<3>(rng);
  EXPECT_LT(tangent_project(x, x).norm(), 1e-14);
}

TEST(TangentProject, SkewAtIdentityIsFixed) {
  Block<3> s;
  s << 0, 1, -2, -1, 0, 3, 2, -3, 0;
  EXPECT_LT((tangent_project(Block<3>::Identity(), s) - s).norm(), 1e-15);
}

TEST(TangentProject, HandCase) {
  Block<2> b;
  b << 1, 2, 0, 1;
  Block<2> expected;
  expected << 0, 1, -1, 0;
  EXPECT_LT((tangent_project(Block<2>::Identity(), b) - expected).norm(), 1e-15);
}

TEST(TangentProject, IdempotentAndTangent) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 100; ++t) {
    const Block<3> x = random_rotation<3>(rng);
    const Block<3> b = gaussian_block<3>(rng);
    const Block<3> v = tangent_project(x, b);
    EXPECT_LT((tangent_project(x, v) - v).norm(), 1e-12);
    const Block<3> s = x.transpose() * v;
    EXPECT_LT((s + s.transpose()).norm(), 1e-12);
  }
}

TEST(QrRetract, ZeroStepIsExact) {
  std::mt19937_64 rng(7);
  const Block<3> x = random_rotation<3>(rng);
  const Block<3> v = tangent_project(x, gaussian_block<3>(rng));
  EXPECT_EQ(qr_retract(x, v, 0.0), x);
}

TEST(QrRetract, HandCase) {
  Block<2> v;
  v << 0, 1, -1, 0;
  const Block<2> q = qr_retract(Block<2>::Identity(), v, 0.1);
  // A = [[1, -0.1], [0.1, 1]]: the first column of Q is (1, 0.1) normalized.
  const double c = 1.0 / std::sqrt(1.01);
  Block<2> expected;
  expected << c, -0.1 * c, 0.1 * c, c;
  EXPECT_LT((q - expected).norm(), 1e-14);
  EXPECT_NEAR(q.determinant(), 1.0, 1e-14);
}

TEST(QrRetract, StaysInSoD) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const Block<3> x = random_rotation<3>(rng);
    const Block<3> v = tangent_project(x, gaussian_block<3>(rng));
    const Block<3> q = qr_retract(x, v, unit(rng));
    EXPECT_LE(rotation_violation(q), kOrthogonalityTol);
    EXPECT_NEAR(q.determinant(), 1.0, 1e-10);
  }
}

TEST(QrRetract, SingularArgumentThrows) {
  // X - mu V = 0 for V = X, mu = 1 (V is not tangent, but the guard must hold).
  const Block<2> x = Block<2>::Identity();
  EXPECT_THROW(qr_retract(x, x, 1.0), RankDeficient);
}

TEST(RandomRotation, DrawsAreRotations) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 10000; ++t) {
    ASSERT_TRUE(is_rotation(random_rotation<3>(rng)));
  }
  EXPECT_TRUE(is_rotation(random_rotation<Eigen::Dynamic>(rng, 4)));
}

TEST(RandomRotation, SeedDeterminism) {
  std::mt19937_64 a(10);
  std::mt19937_64 b(10);
  EXPECT_EQ(random_rotation_stack<3>(a, 5), random_rotation_stack<3>(b, 5));
}

TEST(Align, SelfAlignment) {
  std::mt19937_64 rng(11);
  const auto x = random_rotation_stack<3>(rng, 6);
  const auto a = align(x, x);
  EXPECT_LT((a.rotation - Block<3>::Identity()).norm(), 1e-12);
  EXPECT_LT(dist(x, x), 1e-12);
}

TEST(Align, SingleBlockAlwaysAlignable) {
  EXPECT_LT(dist(stack2({0.3}), stack2({1.0})), 1e-12);
}

TEST(Align, TwoBlockConvention) {
  const auto x = stack2({0.0, 1.0});
  const auto y = stack2({0.2, 1.2});
  const auto a = align(x, y);
  // Y R* matches X, so R* undoes the 0.2 offset.
  EXPECT_LT((a.rotation - rot2(-0.2)).norm(), 1e-12);
  EXPECT_LT((a.aligned.to_matrix() - x.to_matrix()).norm(), 1e-12);
  EXPECT_LT(dist(x, y), 1e-12);
  const auto grid = oracle::procrustes_grid_d2(x, y);
  EXPECT_NEAR(grid.residual, dist(x, y), 1e-3);
}

TEST(Distances, NormOrdering) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    const auto x = random_rotation_stack<3>(rng, 7);
    const auto y = random_rotation_stack<3>(rng, 7);
    const auto dd = distances(x, y);
    EXPECT_LE(dd.linf, dd.l2 + 1e-12);
    EXPECT_LE(dd.l2, dd.l1 + 1e-12);
    EXPECT_LE(dd.l1, 7 * dd.linf + 1e-12);
  }
}

TEST(Distances, GlobalRotationInvariance) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_rotation_stack<3>(rng, 5);
    const auto y = random_rotation_stack<3>(rng, 5);
    const Block<3> g = random_rotation<3>(rng);
    EXPECT_NEAR(dist(x, y), dist(x, y.right_multiplied(g)), 1e-10);
  }
}

TEST(Stack, MatrixRoundTrip) {
  std::mt19937_64 rng(14);
  const auto x = random_rotation_stack<3>(rng, 4);
  EXPECT_EQ(RotationStack<3>::from_matrix(x.to_matrix()), x);
  EXPECT_THROW(RotationStack<3>::from_matrix(Eigen::MatrixXd::Zero(5, 3)), InvalidParams);
}

TEST(Stack, ShapeMismatchRejected) {
  EXPECT_THROW(RotationStack<3>(2, 2), InvalidParams);
  const RotationStack<3> a(2, 3);
  const RotationStack<3> b(3, 3);
  EXPECT_THROW(dist(a, b), InvalidParams);
}

}  // namespace
}  // namespace resync
