#pragma once

// Spectral initialization: leading-d eigenspace of the data matrix, scaled by
// sqrt(n), projected blockwise onto SO(d), with a choice between the two
// determinant orientations of the eigenbasis.

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "resync/eigen_solver.hpp"
#include "resync/model.hpp"
#include "resync/rotgroup.hpp"

namespace resync {

template <int D>
struct SpectralInit {
  RotationStack<D> stack;
  bool flipped = false;       // the reversed-last-column candidate was chosen
  double phi_residual = 0.0;  // ||P(Phi) - Phi||_F
  double psi_residual = 0.0;  // ||P(Psi) - Psi||_F
  int degenerate_blocks = 0;  // blockwise projections flagged non-unique
};

inline constexpr double kSelectionTieTol = 1e-12;

namespace detail {

template <int D>
struct ProjectedCandidate {
  RotationStack<D> stack;
  double residual = 0.0;
  int degenerate = 0;
};

template <int D>
ProjectedCandidate<D> project_blocks(const GeneralBlockStack<D>& raw) {
  ProjectedCandidate<D> out{RotationStack<D>(raw.size(), raw.dim())};
  double sq = 0.0;
  for (int i = 0; i < raw.size(); ++i) {
    const auto proj = project_so(raw[i]);
    out.stack[i] = proj.rotation;
    out.degenerate += proj.degenerate ? 1 : 0;
    sq += (proj.rotation - raw[i]).squaredNorm();
  }
  out.residual = std::sqrt(sq);
  return out;
}

}  // namespace detail

/// Phi = sqrt(n) [u_1 ... u_d] as a stack of n blocks.
template <int D>
GeneralBlockStack<D> scaled_eigenbasis(const Eigen::MatrixXd& u, int n, int d = D) {
  if (u.rows() != static_cast<Eigen::Index>(n) * d || u.cols() != d) throw InvalidParams("eigenvector matrix must be nd x d");
  return GeneralBlockStack<D>::from_matrix(std::sqrt(static_cast<double>(n)) * u, d);
}

/// Selection step given the leading eigenvectors u (nd x d). Residuals equal
/// to within kSelectionTieTol go to Phi.
template <int D>
SpectralInit<D> spectrin_from_eigenvectors(const Eigen::MatrixXd& u, int n, int d = D) {
  GeneralBlockStack<D> phi = scaled_eigenbasis<D>(u, n, d);
  GeneralBlockStack<D> psi = phi;
  for (auto& b : psi) b.col(d - 1) *= -1.0;
  auto phi_proj = detail::project_blocks(phi);
  auto psi_proj = detail::project_blocks(psi);
  SpectralInit<D> out;
  out.phi_residual = phi_proj.residual;
  out.psi_residual = psi_proj.residual;
  out.flipped = psi_proj.residual < phi_proj.residual - kSelectionTieTol;
  auto& chosen = out.flipped ? psi_proj : phi_proj;
  out.stack = std::move(chosen.stack);
  out.degenerate_blocks = chosen.degenerate;
  return out;
}

/// Blockwise projection of Phi with no orientation choice.
template <int D>
SpectralInit<D> naive_from_eigenvectors(const Eigen::MatrixXd& u, int n, int d = D) {
  auto proj = detail::project_blocks(scaled_eigenbasis<D>(u, n, d));
  SpectralInit<D> out;
  out.phi_residual = proj.residual;
  out.psi_residual = std::numeric_limits<double>::quiet_NaN();
  out.stack = std::move(proj.stack);
  out.degenerate_blocks = proj.degenerate;
  return out;
}

template <int D, class Op>
SpectralInit<D> spectrin(const Op& y, int n, int d = D, const EigenSolverOptions& opts = {}) {
  return spectrin_from_eigenvectors<D>(leading_eigenpairs(y, d, opts).vectors, n, d);
}

template <int D, class Op>
SpectralInit<D> naive_spectrin(const Op& y, int n, int d = D, const EigenSolverOptions& opts = {}) {
  return naive_from_eigenvectors<D>(leading_eigenpairs(y, d, opts).vectors, n, d);
}

/// Spectral initialization straight from the graph, without forming the
/// dense data matrix.
template <int D>
SpectralInit<D> spectrin(const ObservationGraph<D>& graph, const EigenSolverOptions& opts = {}) {
  return spectrin<D>(GraphOperator<D>(graph), graph.num_nodes(), graph.dim(), opts);
}

template <int D>
SpectralInit<D> naive_spectrin(const ObservationGraph<D>& graph, const EigenSolverOptions& opts = {}) {
  return naive_spectrin<D>(GraphOperator<D>(graph), graph.num_nodes(), graph.dim(), opts);
}

}  // namespace resync
