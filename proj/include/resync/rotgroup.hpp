#pragma once

// Primitives on SO(d) and the product manifold SO(d)^n.
//
// Every routine is templated on the compile-time block dimension D
// (2, 3, or Eigen::Dynamic for a runtime d).

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "resync/errors.hpp"

namespace resync {

template <int D>
using Block = Eigen::Matrix<double, D, D>;

inline constexpr double kOrthogonalityTol = 1e-10;
inline constexpr double kSkewTol = 1e-12;
inline constexpr double kSingularTol = 1e-12;

struct RotationTag {};
struct GeneralTag {};

/// An ordered stack of n square d x d blocks, the nd x d matrix
/// (X_1; ...; X_n). The tag separates SO(d)^n points from unconstrained
/// quantities such as subgradients or unprojected eigenvector blocks.
template <int D, class Tag>
class BasicBlockStack {
 public:
  using BlockType = Block<D>;

  BasicBlockStack() = default;

  BasicBlockStack(int n, int d) : d_(d), blocks_(static_cast<std::size_t>(n), BlockType::Zero(d, d)) {
    check_dim(d);
  }

  BasicBlockStack(std::vector<BlockType> blocks, int d) : d_(d), blocks_(std::move(blocks)) {
    check_dim(d);
    for (const auto& b : blocks_) {
      if (b.rows() != d || b.cols() != d) throw InvalidParams("block shape does not match stack dimension");
    }
  }

  static BasicBlockStack identity(int n, int d = D) {
    BasicBlockStack s(n, d);
    for (auto& b : s.blocks_) b.setIdentity(d, d);
    return s;
  }

  /// Splits an nd x d matrix into its n row blocks.
  static BasicBlockStack from_matrix(const Eigen::MatrixXd& m, int d = D) {
    if (d <= 0 || m.cols() != d || m.rows() % d != 0) throw InvalidParams("matrix is not a stack of d x d blocks");
    const int n = static_cast<int>(m.rows() / d);
    BasicBlockStack s(n, d);
    for (int i = 0; i < n; ++i) s.blocks_[i] = m.middleRows(i * d, d);
    return s;
  }

  Eigen::MatrixXd to_matrix() const {
    Eigen::MatrixXd m(size() * d_, d_);
    for (int i = 0; i < size(); ++i) m.middleRows(i * d_, d_) = blocks_[i];
    return m;
  }

  int size() const { return static_cast<int>(blocks_.size()); }
  int dim() const { return d_; }

  BlockType& operator[](int i) { return blocks_[static_cast<std::size_t>(i)]; }
  const BlockType& operator[](int i) const { return blocks_[static_cast<std::size_t>(i)]; }

  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& b : blocks_) s += b.squaredNorm();
    return s;
  }

  double norm() const { return std::sqrt(squared_norm()); }

  /// Every block right-multiplied by g.
  BasicBlockStack right_multiplied(const BlockType& g) const {
    BasicBlockStack out = *this;
    for (auto& b : out.blocks_) b = (b * g).eval();
    return out;
  }

  friend bool operator==(const BasicBlockStack& a, const BasicBlockStack& b) {
    if (a.d_ != b.d_ || a.size() != b.size()) return false;
    for (int i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) return false;
    }
    return true;
  }

 private:
  static void check_dim(int d) {
    if (d < 1 || (D != Eigen::Dynamic && d != D)) throw InvalidParams("block dimension mismatch");
  }

  int d_ = (D == Eigen::Dynamic ? 0 : D);
  std::vector<BlockType> blocks_;
};

template <int D>
using RotationStack = BasicBlockStack<D, RotationTag>;
template <int D>
using GeneralBlockStack = BasicBlockStack<D, GeneralTag>;

/// max(||R^T R - I||_F, |det R - 1|); zero for an exact rotation.
template <class Derived>
double rotation_violation(const Eigen::MatrixBase<Derived>& r) {
  const auto n = r.rows();
  const double orth = (r.transpose() * r - Eigen::MatrixXd::Identity(n, n)).norm();
  return std::max(orth, std::abs(r.determinant() - 1.0));
}

template <class Derived>
bool is_rotation(const Eigen::MatrixBase<Derived>& r, double tol = kOrthogonalityTol) {
  return r.rows() == r.cols() && r.allFinite() && rotation_violation(r) <= tol;
}

template <int D, class Tag>
double max_rotation_violation(const BasicBlockStack<D, Tag>& s) {
  double worst = 0.0;
  for (const auto& b : s) worst = std::max(worst, rotation_violation(b));
  return worst;
}

template <int D>
struct SoProjection {
  Block<D> rotation;
  // The determinant correction fired while the two smallest singular values
  // coincide, so the nearest rotation is not unique.
  bool degenerate = false;
};

/// Nearest SO(d) matrix in Frobenius norm: P Q^T from the SVD M = P S Q^T,
/// with the last column of P negated when det(P) det(Q) < 0.
template <class Derived>
auto project_so(const Eigen::MatrixBase<Derived>& m) {
  constexpr int D = Derived::RowsAtCompileTime;
  using BlockType = Block<D>;
  const BlockType mm = m;
  const auto d = mm.rows();
  Eigen::JacobiSVD<BlockType> svd(mm, Eigen::ComputeFullU | Eigen::ComputeFullV);
  BlockType p = svd.matrixU();
  const BlockType& q = svd.matrixV();
  SoProjection<D> out;
  if (p.determinant() * q.determinant() < 0.0) {
    p.col(d - 1) *= -1.0;
    const auto& sv = svd.singularValues();
    if (d >= 2) {
      const double scale = std::max(1.0, sv(0));
      out.degenerate = std::abs(sv(d - 2) - sv(d - 1)) <= kSingularTol * scale;
    } else {
      out.degenerate = sv(0) <= kSingularTol;
    }
  }
  out.rotation = p * q.transpose();
  return out;
}

/// Orthogonal projection onto T_X = {X S : S skew}: X (X^T B - B^T X) / 2.
template <class DerivedX, class DerivedB>
auto tangent_project(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedB>& b) {
  using BlockType = Block<DerivedX::RowsAtCompileTime>;
  const BlockType xtb = x.transpose() * b;
  return BlockType(0.5 * x * (xtb - xtb.transpose()));
}

/// Q-factor of X - mu*V with the R-factor's diagonal made positive. Returns X
/// unchanged when mu or V is exactly zero.
/// Throws RankDeficient when X - mu*V is numerically singular.
template <class DerivedX, class DerivedV>
auto qr_retract(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedV>& v, double mu) {
  using BlockType = Block<DerivedX::RowsAtCompileTime>;
  if (mu == 0.0 || (v.array() == 0.0).all()) return BlockType(x);
  const BlockType a = x - mu * v;
  const auto d = a.rows();
  Eigen::HouseholderQR<BlockType> qr(a);
  BlockType q = qr.householderQ();
  const auto& r = qr.matrixQR();
  const double scale = std::max(1.0, a.norm());
  for (Eigen::Index k = 0; k < d; ++k) {
    const double rkk = r(k, k);
    if (!(std::abs(rkk) > kSingularTol * scale)) throw RankDeficient("retraction argument is singular; reduce the step size");
    if (rkk < 0.0) q.col(k) *= -1.0;
  }
  return q;
}

template <int D, class Rng>
Block<D> gaussian_block(Rng& rng, int d = D) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Block<D> g(d, d);
  for (Eigen::Index c = 0; c < d; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) g(r, c) = normal(rng);
  }
  return g;
}

/// Haar-uniform draw on SO(d): Gaussian QR with positive-diagonal R, then
/// the last column negated if the determinant came out -1.
template <int D, class Rng>
Block<D> random_rotation(Rng& rng, int d = D) {
  if (d < 2) throw InvalidParams("random_rotation requires d >= 2");
  for (;;) {
    const Block<D> g = gaussian_block<D>(rng, d);
    Eigen::HouseholderQR<Block<D>> qr(g);
    Block<D> q = qr.householderQ();
    const auto& r = qr.matrixQR();
    bool singular = false;
    for (int k = 0; k < d; ++k) {
      if (r(k, k) == 0.0) singular = true;
      if (r(k, k) < 0.0) q.col(k) *= -1.0;
    }
    if (singular) continue;  // probability zero
    if (q.determinant() < 0.0) q.col(d - 1) *= -1.0;
    return q;
  }
}

template <int D, class Rng>
RotationStack<D> random_rotation_stack(Rng& rng, int n, int d = D) {
  RotationStack<D> s(n, d);
  for (auto& b : s) b = random_rotation<D>(rng, d);
  return s;
}

template <int D>
struct Alignment {
  Block<D> rotation;
  RotationStack<D> aligned;
  bool degenerate = false;
};

/// Gauge alignment of Y onto X. The rotation is
///   R* = argmin_{R in SO(d)} ||X - Y R||_F = P_SO(sum_i Y_i^T X_i),
/// and `aligned` is Y R*, so that dist(X, Y) = ||X - Y R*||_F.
template <int D>
Alignment<D> align(const RotationStack<D>& x, const RotationStack<D>& y) {
  if (x.size() != y.size() || x.dim() != y.dim()) throw InvalidParams("align: stacks differ in shape");
  const int d = x.dim();
  Block<D> cross = Block<D>::Zero(d, d);
  for (int i = 0; i < x.size(); ++i) cross.noalias() += y[i].transpose() * x[i];
  auto proj = project_so(cross);
  return {proj.rotation, y.right_multiplied(proj.rotation), proj.degenerate};
}

struct StackDistances {
  double l2 = 0.0;
  double l1 = 0.0;
  double linf = 0.0;
};

/// dist, dist_1 and dist_inf, all measured after the same alignment R*.
template <int D>
StackDistances distances(const RotationStack<D>& x, const RotationStack<D>& y) {
  const Alignment<D> a = align(x, y);
  StackDistances out;
  double sq = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double r = (x[i] - a.aligned[i]).norm();
    sq += r * r;
    out.l1 += r;
    out.linf = std::max(out.linf, r);
  }
  out.l2 = std::sqrt(sq);
  return out;
}

template <int D>
double dist(const RotationStack<D>& x, const RotationStack<D>& y) {
  return distances(x, y).l2;
}

template <int D>
double dist1(const RotationStack<D>& x, const RotationStack<D>& y) {
  return distances(x, y).l1;
}

template <int D>
double dist_inf(const RotationStack<D>& x, const RotationStack<D>& y) {
  return distances(x, y).linf;
}

}  // namespace resync
