#pragma once

// Brute-force references for the production routines. None of these reuse
// the numerical kernels they are meant to check: the Procrustes grid uses
// plain trigonometry, finite differences follow a Cayley curve rather than
// the QR retraction, and the spectrum oracle is a self-contained Householder
// tridiagonalization followed by implicit QL.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <vector>

#include "resync/errors.hpp"
#include "resync/model.hpp"
#include "resync/rotgroup.hpp"

namespace resync::oracle {

struct GridSpec {
  int resolution = 100000;

  void validate() const {
    if (resolution < 1000) throw InvalidParams("grid resolution must be at least 1000");
  }
};

struct GridResult {
  double angle = 0.0;
  double residual = 0.0;
};

/// min over theta on the grid of ||X - Y R(theta)||_F, for d = 2.
template <int D>
GridResult procrustes_grid_d2(const RotationStack<D>& x, const RotationStack<D>& y, GridSpec grid = {}) {
  grid.validate();
  if (x.dim() != 2 || y.dim() != 2 || x.size() != y.size()) throw InvalidParams("grid oracle needs matching d = 2 stacks");
  GridResult best{0.0, std::numeric_limits<double>::infinity()};
  for (int k = 0; k < grid.resolution; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / grid.resolution;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    double sq = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      const auto& a = x[i];
      const auto& b = y[i];
      // (Y R)(r, :) = [b(r,0) c + b(r,1) s, -b(r,0) s + b(r,1) c]
      for (int r = 0; r < 2; ++r) {
        const double e0 = a(r, 0) - (b(r, 0) * c + b(r, 1) * s);
        const double e1 = a(r, 1) - (-b(r, 0) * s + b(r, 1) * c);
        sq += e0 * e0 + e1 * e1;
      }
    }
    if (sq < best.residual) best = {theta, sq};
  }
  best.residual = std::sqrt(best.residual);
  return best;
}

/// Upper bound on how far the grid minimum can sit above the true minimum:
/// the residual is Lipschitz in theta with constant ||Y||_F = sqrt(2n).
inline double grid_error_bound(int n, GridSpec grid = {}) {
  return std::sqrt(2.0 * n) * std::numbers::pi / grid.resolution;
}

/// Point on the Cayley curve c(t) = X (I - t S / 2)^{-1} (I + t S / 2),
/// S = X^T V skew, which lies in SO(d) with c(0) = X and c'(0) = V.
template <int D>
RotationStack<D> cayley_curve(const RotationStack<D>& x, const GeneralBlockStack<D>& v, double t) {
  RotationStack<D> out(x.size(), x.dim());
  const int d = x.dim();
  const Block<D> eye = Block<D>::Identity(d, d);
  for (int i = 0; i < x.size(); ++i) {
    Block<D> s = x[i].transpose() * v[i];
    s = (0.5 * (s - s.transpose())).eval();
    const Block<D> left = eye - 0.5 * t * s;
    const Block<D> right = eye + 0.5 * t * s;
    out[i] = x[i] * left.partialPivLu().solve(right);
  }
  return out;
}

/// Central difference (f(c(t)) - f(c(-t))) / (2t) along the Cayley curve
/// through X with velocity V (V must be tangent at X).
template <int D>
double finite_difference_directional(const std::function<double(const RotationStack<D>&)>& f,
                                     const RotationStack<D>& x, const GeneralBlockStack<D>& v, double t) {
  if (!(t > 0.0)) throw InvalidParams("finite-difference step must be positive");
  if (v.norm() == 0.0) return 0.0;
  return (f(cayley_curve(x, v, t)) - f(cayley_curve(x, v, -t))) / (2.0 * t);
}

/// Finite-difference directional derivative of the synchronization objective.
/// Throws NonSmoothPoint if any edge residual at X is at or below `smooth_tol`.
template <int D>
double objective_directional_fd(const ObservationGraph<D>& graph, const RotationStack<D>& x,
                                const GeneralBlockStack<D>& v, double t, double smooth_tol = 1e-6) {
  // Objective written out directly rather than through solver.hpp.
  auto f = [&graph](const RotationStack<D>& s) {
    double acc = 0.0;
    for (const auto& e : graph.edges()) {
      double sq = 0.0;
      const int d = s.dim();
      for (int r = 0; r < d; ++r) {
        for (int c = 0; c < d; ++c) {
          double v2 = -e.measurement(r, c);
          for (int k = 0; k < d; ++k) v2 += s[e.i](r, k) * s[e.j](c, k);
          sq += v2 * v2;
        }
      }
      acc += 2.0 * std::sqrt(sq);
    }
    return acc;
  };
  for (const auto& e : graph.edges()) {
    if ((x[e.i] * x[e.j].transpose() - e.measurement).norm() <= smooth_tol) {
      throw NonSmoothPoint("edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) + ") has a vanishing residual");
    }
  }
  return finite_difference_directional<D>(f, x, v, t);
}

struct Spectrum {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns match values
};

namespace detail {

// Householder reduction of a symmetric matrix to tridiagonal form,
// accumulating the orthogonal transform in z (row-major std::vector).
inline void tridiagonalize(std::vector<double>& z, int n, std::vector<double>& diag, std::vector<double>& off) {
  auto a = [&](int i, int j) -> double& { return z[static_cast<std::size_t>(i) * n + j]; };
  diag.assign(n, 0.0);
  off.assign(n, 0.0);
  for (int i = n - 1; i > 0; --i) {
    const int l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scale = 0.0;
      for (int k = 0; k <= l; ++k) scale += std::abs(a(i, k));
      if (scale == 0.0) {
        off[i] = a(i, l);
      } else {
        for (int k = 0; k <= l; ++k) {
          a(i, k) /= scale;
          h += a(i, k) * a(i, k);
        }
        double f = a(i, l);
        const double g = (f >= 0.0 ? -std::sqrt(h) : std::sqrt(h));
        off[i] = scale * g;
        h -= f * g;
        a(i, l) = f - g;
        f = 0.0;
        for (int j = 0; j <= l; ++j) {
          a(j, i) = a(i, j) / h;
          double gg = 0.0;
          for (int k = 0; k <= j; ++k) gg += a(j, k) * a(i, k);
          for (int k = j + 1; k <= l; ++k) gg += a(k, j) * a(i, k);
          off[j] = gg / h;
          f += off[j] * a(i, j);
        }
        const double hh = f / (h + h);
        for (int j = 0; j <= l; ++j) {
          const double fj = a(i, j);
          const double gj = off[j] - hh * fj;
          off[j] = gj;
          for (int k = 0; k <= j; ++k) a(j, k) -= (fj * off[k] + gj * a(i, k));
        }
      }
    } else {
      off[i] = a(i, l);
    }
    diag[i] = h;
  }
  diag[0] = 0.0;
  off[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    if (diag[i] != 0.0) {
      for (int j = 0; j < i; ++j) {
        double g = 0.0;
        for (int k = 0; k < i; ++k) g += a(i, k) * a(k, j);
        for (int k = 0; k < i; ++k) a(k, j) -= g * a(k, i);
      }
    }
    diag[i] = a(i, i);
    a(i, i) = 1.0;
    for (int j = 0; j < i; ++j) a(j, i) = a(i, j) = 0.0;
  }
}

// Implicit QL with Wilkinson-style shifts on a tridiagonal matrix.
inline void tridiagonal_ql(std::vector<double>& diag, std::vector<double>& off, std::vector<double>& z, int n) {
  auto zz = [&](int i, int j) -> double& { return z[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 1; i < n; ++i) off[i - 1] = off[i];
  off[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m = l;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(diag[m]) + std::abs(diag[m + 1]);
        if (std::abs(off[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (m != l) {
        if (iter++ == 60) throw NoConvergence("tridiagonal QL did not converge");
        double g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
        double r = std::hypot(g, 1.0);
        g = diag[m] - diag[l] + off[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0;
        double c = 1.0;
        double p = 0.0;
        int i = m - 1;
        for (; i >= l; --i) {
          double f = s * off[i];
          const double b = c * off[i];
          r = std::hypot(f, g);
          off[i + 1] = r;
          if (r == 0.0) {
            diag[i + 1] -= p;
            off[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = diag[i + 1] - p;
          r = (diag[i] - g) * s + 2.0 * c * b;
          p = s * r;
          diag[i + 1] = g + p;
          g = c * r - b;
          for (int k = 0; k < n; ++k) {
            f = zz(k, i + 1);
            zz(k, i + 1) = s * zz(k, i) + c * f;
            zz(k, i) = c * zz(k, i) - s * f;
          }
        }
        if (r == 0.0 && i >= l) continue;
        diag[l] -= p;
        off[l] = g;
        off[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace detail

/// Full eigendecomposition of a symmetric matrix, eigenvalues descending.
inline Spectrum spectrum(const Eigen::MatrixXd& y) {
  if (y.rows() != y.cols()) throw InvalidParams("spectrum oracle needs a square matrix");
  const int n = static_cast<int>(y.rows());
  std::vector<double> z(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) z[static_cast<std::size_t>(i) * n + j] = 0.5 * (y(i, j) + y(j, i));
  }
  std::vector<double> diag;
  std::vector<double> off;
  detail::tridiagonalize(z, n, diag, off);
  detail::tridiagonal_ql(diag, off, z, n);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return diag[a] > diag[b]; });
  Spectrum out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (int c = 0; c < n; ++c) {
    out.values(c) = diag[order[c]];
    for (int r = 0; r < n; ++r) out.vectors(r, c) = z[static_cast<std::size_t>(r) * n + order[c]];
  }
  return out;
}

/// Largest principal angle between the column spans of two orthonormal bases.
inline double principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  // sin of the largest angle = ||(I - A A^T) B||_2
  const Eigen::MatrixXd resid = b - a * (a.transpose() * b);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid);
  const double s = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  return std::asin(std::min(1.0, s));
}

/// CDF of tr(R) = 2 cos(theta) for Haar R on SO(2).
inline double so2_trace_cdf(double t) {
  if (t <= -2.0) return 0.0;
  if (t >= 2.0) return 1.0;
  return 1.0 - std::acos(t / 2.0) / std::numbers::pi;
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double f = cdf(sample[k]);
    worst = std::max({worst, f - k / n, (k + 1) / n - f});
  }
  return worst;
}

/// Random point whose blocks sit at Frobenius distance at most `radius` from
/// the corresponding truth blocks, moving each along a random tangent
/// direction by a uniform fraction of the radius.
template <int D, class Rng>
RotationStack<D> perturb_within(const RotationStack<D>& truth, double radius, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int d = truth.dim();
  RotationStack<D> out(truth.size(), d);
  for (int i = 0; i < truth.size(); ++i) {
    Block<D> s = gaussian_block<D>(rng, d);
    s = (s - s.transpose()).eval();
    const double target = radius * unit(rng);
    // For skew S with ||S||_F = a, the Cayley transform moves the block by
    // roughly a; bisect on the scale to land within the radius exactly.
    auto moved = [&](double a) {
      const Block<D> u = (a / s.norm()) * s;
      const Block<D> eye = Block<D>::Identity(d, d);
      return Block<D>((eye - 0.5 * u).partialPivLu().solve(eye + 0.5 * u));
    };
    double lo = 0.0;
    double hi = 2.0 * target + 1e-300;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((moved(mid) - Block<D>::Identity(d, d)).norm() <= target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    out[i] = truth[i] * moved(lo);
  }
  return out;
}

}  // namespace resync::oracle
