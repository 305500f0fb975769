#include <gtest/gtest.h>

#include <random>

#include "resync/oracles.hpp"
#include "resync/solver.hpp"
#include "resync/verify.hpp"

namespace resync {
namespace {

TEST(GridOracle, IdenticalStacks) {
  std::mt19937_64 rng(91);
  const auto x = random_rotation_stack<2>(rng, 3);
  const auto r = oracle::procrustes_grid_d2(x, x);
  EXPECT_LT(r.residual, oracle::grid_error_bound(3));
  EXPECT_NEAR(r.angle, 0.0, 1e-12);
}

TEST(GridOracle, NeverBeatsProcrustes) {
  std::mt19937_64 rng(92);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_rotation_stack<2>(rng, 3);
    const auto y = random_rotation_stack<2>(rng, 3);
    const auto r = oracle::procrustes_grid_d2(x, y);
    EXPECT_GE(r.residual, dist(x, y) - 1e-12);
    EXPECT_LE(r.residual, dist(x, y) + oracle::grid_error_bound(3));
  }
}

TEST(GridOracle, RejectsCoarseGridAndWrongDimension) {
  std::mt19937_64 rng(93);
  const auto x = random_rotation_stack<2>(rng, 2);
  EXPECT_THROW(oracle::procrustes_grid_d2(x, x, {10}), InvalidParams);
  const auto y = random_rotation_stack<Eigen::Dynamic>(rng, 2, 3);
  EXPECT_THROW(oracle::procrustes_grid_d2(y, y), InvalidParams);
}

TEST(FiniteDifference, ZeroDirection) {
  std::mt19937_64 rng(94);
  const auto x = random_rotation_stack<3>(rng, 4);
  const GeneralBlockStack<3> v(4, 3);
  auto f = [](const RotationStack<3>& s) { return s.to_matrix().sum(); };
  EXPECT_EQ(oracle::finite_difference_directional<3>(f, x, v, 1e-6), 0.0);
}

TEST(FiniteDifference, QuadraticMatchesClosedForm) {
  std::mt19937_64 rng(95);
  for (int t = 0; t < 10; ++t) {
    const auto x = random_rotation_stack<3>(rng, 5);
    GeneralBlockStack<3> c(5, 3);
    GeneralBlockStack<3> v(5, 3);
    for (int i = 0; i < 5; ++i) {
      c[i] = gaussian_block<3>(rng);
      v[i] = tangent_project(x[i], gaussian_block<3>(rng));
    }
    auto f = [&c](const RotationStack<3>& s) { return (s.to_matrix() - c.to_matrix()).squaredNorm(); };
    double analytic = 0.0;
    for (int i = 0; i < 5; ++i) {
      const Block<3> grad = tangent_project(x[i], Block<3>(2.0 * (x[i] - c[i])));
      analytic += (grad.array() * v[i].array()).sum();
    }
    EXPECT_NEAR(oracle::finite_difference_directional<3>(f, x, v, 1e-5), analytic, 1e-6);
  }
}

TEST(FiniteDifference, CayleyCurveStaysOnManifold) {
  std::mt19937_64 rng(96);
  const auto x = random_rotation_stack<3>(rng, 4);
  GeneralBlockStack<3> v(4, 3);
  for (int i = 0; i < 4; ++i) v[i] = tangent_project(x[i], gaussian_block<3>(rng));
  EXPECT_LE(max_rotation_violation(oracle::cayley_curve(x, v, 0.7)), kOrthogonalityTol);
  EXPECT_EQ(oracle::cayley_curve(x, v, 0.0), x);
}

TEST(FiniteDifference, NonSmoothPointRejected) {
  const auto inst = generate_instance<3>({10, 3, 1.0, 1.0, 0.0, 97});
  const GeneralBlockStack<3> v(10, 3);
  EXPECT_THROW(oracle::objective_directional_fd(inst.graph, *inst.ground_truth, v, 1e-6), NonSmoothPoint);
}

TEST(SpectrumOracle, Diagonal) {
  Eigen::VectorXd d(5);
  d << 1, -2, 5, 0, 3;
  const auto s = oracle::spectrum(Eigen::MatrixXd(d.asDiagonal()));
  Eigen::VectorXd expected(5);
  expected << 5, 3, 1, 0, -2;
  EXPECT_LT((s.values - expected).norm(), 1e-14);
}

TEST(SpectrumOracle, ReconstructsMatrix) {
  std::mt19937_64 rng(98);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(40, 40);
  for (int c = 0; c < 40; ++c) {
    for (int r = 0; r < 40; ++r) a(r, c) = normal(rng);
  }
  const Eigen::MatrixXd y = a + a.transpose();
  const auto s = oracle::spectrum(y);
  EXPECT_LT((s.vectors * s.values.asDiagonal() * s.vectors.transpose() - y).norm(), 1e-10);
  EXPECT_LT((s.vectors.transpose() * s.vectors - Eigen::MatrixXd::Identity(40, 40)).norm(), 1e-12);
}

TEST(SpectrumOracle, CleanGram) {
  const auto inst = generate_instance<3>({10, 3, 1.0, 1.0, 0.0, 99});
  const auto s = oracle::spectrum(dense_data_matrix(inst.graph));
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(s.values(k), 9.0, 1e-10);
  EXPECT_NEAR(s.values(3), -1.0, 1e-10);
}

TEST(Statistics, KsAgainstOwnCdf) {
  std::vector<double> uniform;
  for (int k = 0; k < 1000; ++k) uniform.push_back((k + 0.5) / 1000.0);
  EXPECT_NEAR(oracle::ks_statistic(uniform, [](double t) { return t; }), 0.0005, 1e-12);
}

TEST(Statistics, So2TraceCdf) {
  EXPECT_DOUBLE_EQ(oracle::so2_trace_cdf(-3.0), 0.0);
  EXPECT_DOUBLE_EQ(oracle::so2_trace_cdf(0.0), 0.5);
  EXPECT_DOUBLE_EQ(oracle::so2_trace_cdf(2.5), 1.0);
}

TEST(Statistics, PerturbWithinRadius) {
  std::mt19937_64 rng(100);
  const auto truth = random_rotation_stack<3>(rng, 20);
  for (int t = 0; t < 10; ++t) {
    const auto x = oracle::perturb_within(truth, 0.05, rng);
    EXPECT_LE(max_rotation_violation(x), kOrthogonalityTol);
    for (int i = 0; i < 20; ++i) EXPECT_LE((x[i] - truth[i]).norm(), 0.05 + 1e-12);
  }
}

TEST(Suites, ProcrustesPasses) {
  verify::ProcrustesOptions opt;
  opt.instances = 5;
  EXPECT_TRUE(verify::procrustes(opt).passed);
}

TEST(Suites, SpectrumPasses) {
  verify::SpectrumOptions opt;
  opt.matrices = 3;
  opt.max_size = 120;
  EXPECT_TRUE(verify::spectrum(opt).passed);
}

TEST(Suites, FiniteDifferencePasses) {
  verify::FiniteDifferenceOptions opt;
  opt.points = 10;
  EXPECT_TRUE(verify::finite_difference<3>(opt).passed);
}

TEST(Suites, FiniteDifferenceCatchesWrongProjector) {
  verify::FiniteDifferenceOptions opt;
  opt.points = 10;
  const auto rep = verify::finite_difference<3>(opt, [](const RotationStack<3>& x, const ObservationGraph<3>& g) {
    const auto e = euclidean_subgradient(x, g);
    GeneralBlockStack<3> out(x.size(), 3);
    for (int i = 0; i < x.size(); ++i) {
      const Block<3> xtb = x[i].transpose() * e[i];
      out[i] = 0.5 * x[i] * (xtb + xtb.transpose());
    }
    return out;
  });
  EXPECT_FALSE(rep.passed);
  EXPECT_GT(rep.worst, 1e-2);
}

TEST(Suites, FiniteDifferenceCatchesMissingFactorTwo) {
  verify::FiniteDifferenceOptions opt;
  opt.points = 10;
  const auto rep = verify::finite_difference<3>(opt, [](const RotationStack<3>& x, const ObservationGraph<3>& g) {
    auto out = riemannian_subgradient(x, g);
    for (auto& b : out) b *= 0.5;
    return out;
  });
  EXPECT_FALSE(rep.passed);
}

TEST(Suites, HaarPassesOnSmallSample) {
  verify::HaarOptions opt;
  opt.invariant_draws = 1000;
  opt.mean_draws = 20000;
  opt.ks_draws = 20000;
  EXPECT_TRUE(verify::haar(opt).passed);
}

TEST(Suites, WeakSharpnessSmall) {
  verify::WeakSharpnessOptions opt;
  opt.seeds = 1;
  opt.samples = 20;
  opt.min_passes = 20;
  const auto st = verify::weak_sharpness_stats(opt);
  EXPECT_GE(st.min_ratio, st.threshold);
  EXPECT_EQ(st.passes_per_seed.front(), 20);
}

}  // namespace
}  // namespace resync
