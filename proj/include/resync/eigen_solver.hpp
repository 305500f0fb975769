#pragma once

// Leading eigenpairs of a symmetric operator.
//
// Small problems go to a dense symmetric eigensolver. Larger ones use a
// restarted block Krylov method with full reorthogonalization and
// Rayleigh-Ritz extraction; the operator only needs `rows()` and
// `apply(V) -> Y V` on an N x b block.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>

#include "resync/errors.hpp"

namespace resync {

struct EigenPairSet {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // N x count, orthonormal columns
};

struct EigenSolverOptions {
  double target_tolerance = 1e-12;    // stop once every residual is below this (relative)
  double required_tolerance = 1e-9;   // otherwise fail with NoConvergence
  int max_restarts = 200;
  Eigen::Index dense_threshold = 256;  // N at or below this uses the dense path
  int block_size = 0;                  // 0: count + 4
  Eigen::Index basis_size = 0;         // 0: min(N, max(20 * block, 80))
  std::uint64_t seed = 0x5eedULL;
};

class DenseOperator {
 public:
  explicit DenseOperator(const Eigen::MatrixXd& m) : m_(&m) {}
  Eigen::Index rows() const { return m_->rows(); }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& v) const { return (*m_) * v; }

 private:
  const Eigen::MatrixXd* m_;
};

namespace detail {

// Fixed sign convention: the largest-magnitude entry of each vector is positive.
inline void normalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

// Empty if the dense QR iteration did not converge.
inline std::optional<EigenPairSet> dense_leading(const Eigen::MatrixXd& y, int count) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(y);
  if (es.info() != Eigen::Success) return std::nullopt;
  const Eigen::Index n = y.rows();
  EigenPairSet out;
  out.values.resize(count);
  out.vectors.resize(n, count);
  for (int k = 0; k < count; ++k) {
    out.values(k) = es.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = es.eigenvectors().col(n - 1 - k);
  }
  normalize_signs(out.vectors);
  return out;
}

// Orthonormalizes the columns of w against basis.leftCols(used) and each other
// (two Gram-Schmidt passes). Columns that vanish are replaced by random ones.
inline void orthonormalize_block(const Eigen::MatrixXd& basis, Eigen::Index used, Eigen::MatrixXd& w,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (int attempt = 0;; ++attempt) {
      const double before = w.col(c).norm();
      for (int pass = 0; pass < 2; ++pass) {
        if (used > 0) w.col(c).noalias() -= basis.leftCols(used) * (basis.leftCols(used).transpose() * w.col(c));
        if (c > 0) w.col(c).noalias() -= w.leftCols(c) * (w.leftCols(c).transpose() * w.col(c));
      }
      const double after = w.col(c).norm();
      if (after > 1e-10 * std::max(before, 1e-300) && after > 0.0) {
        w.col(c) /= after;
        break;
      }
      if (attempt > 8) throw NoConvergence("cannot extend Krylov basis");
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = normal(rng);
    }
  }
}

}  // namespace detail

/// The `count` algebraically largest eigenpairs of a symmetric operator.
template <class Op>
EigenPairSet leading_eigenpairs(const Op& op, int count, const EigenSolverOptions& opts = {}) {
  const Eigen::Index n = op.rows();
  if (count < 1 || count > n) throw InvalidParams("eigenpair count out of range");

  if (n <= opts.dense_threshold) {
    const Eigen::MatrixXd dense = op.apply(Eigen::MatrixXd::Identity(n, n));
    if (auto pairs = detail::dense_leading(0.5 * (dense + dense.transpose()), count)) return *pairs;
    // otherwise continue with the iterative solver
  }

  const Eigen::Index b = std::min<Eigen::Index>(n, opts.block_size > 0 ? opts.block_size : count + 4);
  Eigen::Index cap = opts.basis_size > 0 ? opts.basis_size : std::max<Eigen::Index>(20 * b, 80);
  cap = std::min(cap, n);
  const Eigen::Index nblocks = std::max<Eigen::Index>(1, cap / b);
  const Eigen::Index width = nblocks * b;

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd start(n, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) start(r, c) = normal(rng);
  }

  Eigen::MatrixXd basis(n, width);
  Eigen::MatrixXd image(n, width);
  double best = std::numeric_limits<double>::infinity();
  EigenPairSet best_pairs;

  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    detail::orthonormalize_block(basis, 0, start, rng);
    basis.leftCols(b) = start;
    Eigen::Index used = b;
    for (Eigen::Index k = 0;; ++k) {
      image.middleCols(k * b, b) = op.apply(basis.middleCols(k * b, b));
      if (k + 1 == nblocks) break;
      Eigen::MatrixXd next = image.middleCols(k * b, b);
      detail::orthonormalize_block(basis, used, next, rng);
      basis.middleCols(used, b) = next;
      used += b;
    }

    Eigen::MatrixXd t = basis.leftCols(used).transpose() * image.leftCols(used);
    t = (0.5 * (t + t.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
    if (small.info() != Eigen::Success) throw NoConvergence("Rayleigh-Ritz eigensolve failed");

    const Eigen::Index m = used;
    Eigen::MatrixXd coeff(m, b);
    for (Eigen::Index c = 0; c < b; ++c) coeff.col(c) = small.eigenvectors().col(m - 1 - c);
    const Eigen::MatrixXd ritz = basis.leftCols(used) * coeff;
    const Eigen::MatrixXd ritz_image = image.leftCols(used) * coeff;

    double scale = 1.0;
    for (Eigen::Index c = 0; c < m; ++c) scale = std::max(scale, std::abs(small.eigenvalues()(c)));
    double worst = 0.0;
    EigenPairSet pairs;
    pairs.values.resize(count);
    pairs.vectors = ritz.leftCols(count);
    for (int c = 0; c < count; ++c) {
      const double theta = small.eigenvalues()(m - 1 - c);
      pairs.values(c) = theta;
      worst = std::max(worst, (ritz_image.col(c) - theta * ritz.col(c)).norm() / scale);
    }
    if (worst < best) {
      best = worst;
      best_pairs = pairs;
    }
    if (worst <= opts.target_tolerance || used == n) break;
    start = ritz;
  }

  if (!(best <= opts.required_tolerance)) {
    throw NoConvergence("block Krylov eigensolver stalled at relative residual " + std::to_string(best));
  }
  // Re-orthonormalize against rounding; the columns are already orthonormal
  // to working precision.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(best_pairs.vectors);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, count);
  for (int c = 0; c < count; ++c) {
    if (q.col(c).dot(best_pairs.vectors.col(c)) < 0.0) q.col(c) *= -1.0;
  }
  best_pairs.vectors = q;
  detail::normalize_signs(best_pairs.vectors);
  return best_pairs;
}

/// Dense symmetric input. Throws InvalidParams if y is not symmetric.
inline EigenPairSet leading_eigenpairs(const Eigen::MatrixXd& y, int count, const EigenSolverOptions& opts = {}) {
  if (y.rows() != y.cols()) throw InvalidParams("matrix is not square");
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  if ((y - y.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw InvalidParams("matrix is not symmetric");
  if (y.rows() <= opts.dense_threshold && count >= 1 && count <= y.rows()) {
    if (auto pairs = detail::dense_leading(y, count)) return *pairs;
    EigenSolverOptions iterative = opts;
    iterative.dense_threshold = 0;
    return leading_eigenpairs(DenseOperator(y), count, iterative);
  }
  return leading_eigenpairs(DenseOperator(y), count, opts);
}

}  // namespace resync
