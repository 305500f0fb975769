#include <gtest/gtest.h>

#include <random>

#include "resync/eigen_solver.hpp"
#include "resync/model.hpp"
#include "resync/oracles.hpp"
#include "resync/spectrin.hpp"

namespace resync {
namespace {

Eigen::MatrixXd random_symmetric(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(size, size);
  for (int c = 0; c < size; ++c) {
    for (int r = 0; r < size; ++r) a(r, c) = normal(rng);
  }
  return 0.5 * (a + a.transpose());
}

TEST(LeadingEigenpairs, Diagonal) {
  Eigen::VectorXd diag(6);
  diag << 3, 2, 1, 0, 0, 0;
  const auto e = leading_eigenpairs(Eigen::MatrixXd(diag.asDiagonal()), 2);
  EXPECT_NEAR(e.values(0), 3.0, 1e-14);
  EXPECT_NEAR(e.values(1), 2.0, 1e-14);
  EXPECT_LT((e.vectors - Eigen::MatrixXd::Identity(6, 2)).norm(), 1e-14);
}

TEST(LeadingEigenpairs, CleanGramSubspace) {
  const int n = 10;
  const auto inst = generate_instance<3>({n, 3, 1.0, 1.0, 0.0, 31});
  const auto e = leading_eigenpairs(dense_data_matrix(inst.graph), 3);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(e.values(k), n - 1.0, 1e-10);
  const Eigen::MatrixXd span = inst.ground_truth->to_matrix() / std::sqrt(static_cast<double>(n));
  EXPECT_LT(oracle::principal_angle(span, e.vectors), 1e-8);
}

TEST(LeadingEigenpairs, MatchesOracleDense) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Eigen::MatrixXd y = random_symmetric(60, 40 + s);
    const auto ref = oracle::spectrum(y);
    const auto e = leading_eigenpairs(y, 3);
    EXPECT_LT(oracle::principal_angle(ref.vectors.leftCols(3), e.vectors), 1e-8);
    EXPECT_LT((e.values - ref.values.head(3)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(LeadingEigenpairs, KrylovMatchesOracle) {
  const Eigen::MatrixXd y = random_symmetric(450, 50);
  EigenSolverOptions opts;
  opts.dense_threshold = 0;  // force the iterative path
  const auto e = leading_eigenpairs(y, 3, opts);
  const auto ref = oracle::spectrum(y);
  EXPECT_LT(oracle::principal_angle(ref.vectors.leftCols(3), e.vectors), 1e-8);
}

TEST(LeadingEigenpairs, GraphOperatorMatchesDense) {
  const auto inst = generate_instance<3>({150, 3, 0.5, 0.4, 0.0, 51});
  EigenSolverOptions opts;
  opts.dense_threshold = 0;
  const auto iterative = leading_eigenpairs(GraphOperator<3>(inst.graph), 3, opts);
  const auto dense = leading_eigenpairs(dense_data_matrix(inst.graph), 3);
  EXPECT_LT(oracle::principal_angle(dense.vectors, iterative.vectors), 1e-8);
}

TEST(LeadingEigenpairs, SignConvention) {
  const auto e = leading_eigenpairs(random_symmetric(40, 52), 3);
  for (int c = 0; c < 3; ++c) {
    Eigen::Index idx;
    e.vectors.col(c).cwiseAbs().maxCoeff(&idx);
    EXPECT_GT(e.vectors(idx, c), 0.0);
  }
}

TEST(LeadingEigenpairs, Deterministic) {
  const auto inst = generate_instance<3>({120, 3, 0.5, 0.5, 0.0, 53});
  EigenSolverOptions opts;
  opts.dense_threshold = 0;
  const auto a = leading_eigenpairs(GraphOperator<3>(inst.graph), 3, opts);
  const auto b = leading_eigenpairs(GraphOperator<3>(inst.graph), 3, opts);
  EXPECT_EQ(a.vectors, b.vectors);
}

TEST(LeadingEigenpairs, RejectsAsymmetric) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Identity(4, 4);
  y(0, 1) = 1.0;
  EXPECT_THROW(leading_eigenpairs(y, 2), InvalidParams);
}

TEST(LeadingEigenpairs, BudgetExhaustion) {
  EigenSolverOptions opts;
  opts.dense_threshold = 0;
  opts.max_restarts = 0;
  opts.basis_size = 8;
  EXPECT_THROW(leading_eigenpairs(random_symmetric(300, 54), 3, opts), NoConvergence);
}

TEST(Spectrin, CleanFullObservationRecovers) {
  const auto inst = generate_instance<3>({20, 3, 1.0, 1.0, 0.0, 61});
  const auto init = spectrin(inst.graph);
  EXPECT_LE(dist(init.stack, *inst.ground_truth), 1e-6);
  EXPECT_LE(max_rotation_violation(init.stack), kOrthogonalityTol);
}

TEST(Spectrin, CleanRecoveryAcrossSeeds) {
  // Both eigenbasis orientations occur across seeds; the selection must fix
  // either one.
  int flipped = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto inst = generate_instance<3>({20, 3, 1.0, 1.0, 0.0, 100 + s});
    const auto init = spectrin(inst.graph);
    EXPECT_LE(dist(init.stack, *inst.ground_truth), 1e-6);
    flipped += init.flipped ? 1 : 0;
  }
  EXPECT_GT(flipped, 0);
  EXPECT_LT(flipped, 20);
}

TEST(Spectrin, NaiveAgreesWhenNotFlipped) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto inst = generate_instance<3>({20, 3, 1.0, 1.0, 0.0, 100 + s});
    const auto eig = leading_eigenpairs(dense_data_matrix(inst.graph), 3);
    const auto sp = spectrin_from_eigenvectors<3>(eig.vectors, 20);
    const auto nv = naive_from_eigenvectors<3>(eig.vectors, 20);
    if (sp.flipped) {
      EXPECT_FALSE(sp.stack == nv.stack);
    } else {
      EXPECT_EQ(sp.stack, nv.stack);
    }
  }
}

TEST(Spectrin, ScaleConvention) {
  const Eigen::MatrixXd u = leading_eigenpairs(random_symmetric(30, 62), 3).vectors;
  EXPECT_NEAR(scaled_eigenbasis<3>(u, 10).norm(), std::sqrt(30.0), 1e-12);
}

TEST(Spectrin, OrientationRobustness) {
  const int n = 60;
  const auto inst = generate_instance<3>({n, 3, 0.6, 0.5, 0.0, 63});
  const auto& truth = *inst.ground_truth;
  const Eigen::MatrixXd u = leading_eigenpairs(dense_data_matrix(inst.graph), 3).vectors;
  const auto base = spectrin_from_eigenvectors<3>(u, n);
  const double base_dist = dist(base.stack, truth);
  for (int k = 0; k < 3; ++k) {
    Eigen::MatrixXd w = u;
    w.col(k) *= -1.0;
    const auto alt = spectrin_from_eigenvectors<3>(w, n);
    EXPECT_NEAR(dist(alt.stack, truth), base_dist, 1e-8) << "column " << k;
    if (k < 2) {
      EXPECT_NEAR(alt.phi_residual + alt.psi_residual, base.phi_residual + base.psi_residual, 1e-8);
    } else {
      EXPECT_NEAR(alt.phi_residual, base.psi_residual, 1e-12);
      EXPECT_NEAR(alt.psi_residual, base.phi_residual, 1e-12);
    }
  }
}

TEST(Spectrin, TieGoesToPhi) {
  // A zero last column makes Phi and Psi identical.
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(6, 3);
  u(0, 0) = u(3, 0) = u(1, 1) = u(4, 1) = 1.0 / std::sqrt(2.0);
  const auto init = spectrin_from_eigenvectors<3>(u, 2);
  EXPECT_FALSE(init.flipped);
  EXPECT_EQ(init.phi_residual, init.psi_residual);
}

TEST(Spectrin, MonotoneInP) {
  const int n = 200;
  std::vector<double> means;
  for (double p : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    double sum = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto inst = generate_instance<3>({n, 3, p, 0.3, 0.0, 500 + s});
      sum += dist(spectrin(inst.graph).stack, *inst.ground_truth);
    }
    means.push_back(sum / 20.0);
  }
  for (std::size_t k = 1; k < means.size(); ++k) EXPECT_LE(means[k], 1.05 * means[k - 1]) << "level " << k;
}

TEST(Spectrin, OutputInSoD) {
  const auto inst = generate_instance<3>({100, 3, 0.2, 0.2, 0.0, 64});
  EXPECT_LE(max_rotation_violation(spectrin(inst.graph).stack), kOrthogonalityTol);
  EXPECT_LE(max_rotation_violation(naive_spectrin(inst.graph).stack), kOrthogonalityTol);
}

TEST(Spectrin, DenseAndGraphPathsAgree) {
  const auto inst = generate_instance<3>({40, 3, 0.5, 0.5, 0.0, 65});
  const auto a = spectrin(inst.graph);
  const auto b = spectrin<3>(dense_data_matrix(inst.graph), 40);
  EXPECT_LT(dist(a.stack, b.stack), 1e-8);
}

TEST(Spectrin, ShapeChecked) {
  EXPECT_THROW(spectrin_from_eigenvectors<3>(Eigen::MatrixXd::Zero(10, 3), 4), InvalidParams);
}

}  // namespace
}  // namespace resync
