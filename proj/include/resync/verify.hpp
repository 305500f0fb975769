#pragma once

// End-to-end checks of the production routines against the oracles.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "resync/eigen_solver.hpp"
#include "resync/model.hpp"
#include "resync/oracles.hpp"
#include "resync/rotgroup.hpp"
#include "resync/solver.hpp"

namespace resync::verify {

struct SuiteReport {
  std::string name;
  bool passed = false;
  std::string summary;
  double worst = 0.0;  // suite-specific worst-case statistic
};

struct ProcrustesOptions {
  int instances = 50;
  int max_n = 3;
  double tolerance = 1e-3;
  oracle::GridSpec grid{};
  std::uint64_t seed = 7;
};

/// d = 2 Procrustes distances against the exhaustive angle grid.
inline SuiteReport procrustes(const ProcrustesOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<int> pick_n(1, opt.max_n);
  double worst = 0.0;
  double worst_lower = 0.0;
  for (int t = 0; t < opt.instances; ++t) {
    const int n = pick_n(rng);
    const auto x = random_rotation_stack<2>(rng, n);
    const auto y = random_rotation_stack<2>(rng, n);
    const double prod = dist(x, y);
    const auto grid = oracle::procrustes_grid_d2(x, y, opt.grid);
    worst = std::max(worst, std::abs(prod - grid.residual));
    // The grid can never beat the exact minimizer beyond rounding.
    worst_lower = std::max(worst_lower, prod - grid.residual);
  }
  SuiteReport r{"procrustes", worst <= opt.tolerance && worst_lower <= 1e-12, {}, worst};
  std::ostringstream s;
  s << opt.instances << " instances, max |dist - grid| = " << worst << " (tol " << opt.tolerance << ")";
  r.summary = s.str();
  return r;
}

struct SpectrumOptions {
  int matrices = 20;
  int min_size = 60;
  int max_size = 600;
  double tolerance = 1e-8;
  std::uint64_t seed = 11;
};

/// Leading eigen-subspace of random symmetric matrices against the
/// tridiagonal-QL oracle.
inline SuiteReport spectrum(const SpectrumOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick_d(2, 3);
  double worst = 0.0;
  for (int t = 0; t < opt.matrices; ++t) {
    const int d = pick_d(rng);
    // sizes spread over [min, max], rounded to a multiple of d
    const int span = opt.max_size - opt.min_size;
    int size = opt.min_size + (opt.matrices > 1 ? span * t / (opt.matrices - 1) : 0);
    size -= size % d;
    Eigen::MatrixXd a(size, size);
    for (int c = 0; c < size; ++c) {
      for (int r = 0; r < size; ++r) a(r, c) = normal(rng);
    }
    const Eigen::MatrixXd y = 0.5 * (a + a.transpose());
    const auto prod = leading_eigenpairs(y, d);
    const auto ref = oracle::spectrum(y);
    worst = std::max(worst, oracle::principal_angle(ref.vectors.leftCols(d), prod.vectors));
  }
  SuiteReport r{"spectrum", worst < opt.tolerance, {}, worst};
  std::ostringstream s;
  s << opt.matrices << " matrices, max principal angle = " << worst << " (tol " << opt.tolerance << ")";
  r.summary = s.str();
  return r;
}

template <int D>
using GradientFn = std::function<GeneralBlockStack<D>(const RotationStack<D>&, const ObservationGraph<D>&)>;

struct FiniteDifferenceOptions {
  int points = 50;
  int n = 12;
  double p = 0.6;
  double q = 0.8;
  double step = 1e-6;
  double tolerance = 1e-4;
  std::uint64_t seed = 13;
};

/// Riemannian subgradient against central differences of the objective at
/// random smooth points. The error is relative to ||grad|| ||V||.
template <int D = 3>
SuiteReport finite_difference(const FiniteDifferenceOptions& opt = {}, GradientFn<D> gradient = {}) {
  if (!gradient) {
    gradient = [](const RotationStack<D>& x, const ObservationGraph<D>& g) { return riemannian_subgradient(x, g); };
  }
  const int d = (D == Eigen::Dynamic ? 3 : D);
  std::mt19937_64 rng(opt.seed);
  double worst = 0.0;
  int skipped = 0;
  for (int t = 0; t < opt.points; ++t) {
    const auto inst = generate_instance<D>({opt.n, d, opt.p, opt.q, 0.0, opt.seed * 1000 + t});
    const auto x = random_rotation_stack<D>(rng, opt.n, d);
    GeneralBlockStack<D> v(opt.n, d);
    for (int i = 0; i < opt.n; ++i) v[i] = tangent_project(x[i], gaussian_block<D>(rng, d));
    const double vnorm = v.norm();
    for (auto& b : v) b /= vnorm;
    double fd = 0.0;
    try {
      fd = oracle::objective_directional_fd(inst.graph, x, v, opt.step);
    } catch (const NonSmoothPoint&) {
      ++skipped;
      continue;
    }
    const auto g = gradient(x, inst.graph);
    double ip = 0.0;
    for (int i = 0; i < opt.n; ++i) ip += (g[i].array() * v[i].array()).sum();
    const double scale = std::max(g.norm() * v.norm(), 1e-12);
    worst = std::max(worst, std::abs(fd - ip) / scale);
  }
  SuiteReport r{"finite-difference", worst <= opt.tolerance && skipped < opt.points, {}, worst};
  std::ostringstream s;
  s << opt.points - skipped << " smooth points, max relative error = " << worst << " (tol " << opt.tolerance << ")";
  r.summary = s.str();
  return r;
}

struct HaarOptions {
  int invariant_draws = 10000;
  int mean_draws = 100000;
  int ks_draws = 100000;
  std::uint64_t seed = 17;
};

/// Haar sampling: SO(d) membership, zero mean for d = 3, and the SO(2) trace
/// law via Kolmogorov-Smirnov.
inline SuiteReport haar(const HaarOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  double violation = 0.0;
  for (int t = 0; t < opt.invariant_draws; ++t) {
    violation = std::max(violation, rotation_violation(random_rotation<3>(rng)));
    violation = std::max(violation, rotation_violation(random_rotation<2>(rng)));
  }
  Block<3> mean = Block<3>::Zero();
  for (int t = 0; t < opt.mean_draws; ++t) mean += random_rotation<3>(rng);
  mean /= opt.mean_draws;
  const double mean_tol = 3.0 / std::sqrt(static_cast<double>(opt.mean_draws));
  const double mean_dev = mean.cwiseAbs().maxCoeff();

  std::vector<double> traces(static_cast<std::size_t>(opt.ks_draws));
  for (auto& tr : traces) tr = random_rotation<2>(rng).trace();
  const double ks = oracle::ks_statistic(traces, oracle::so2_trace_cdf);
  // 0.1% critical value of the one-sample Kolmogorov-Smirnov test
  const double ks_crit = 1.95 / std::sqrt(static_cast<double>(opt.ks_draws));

  SuiteReport r{"haar", violation <= kOrthogonalityTol && mean_dev <= mean_tol && ks <= ks_crit, {}, ks};
  std::ostringstream s;
  s << "max violation " << violation << ", max |mean entry| " << mean_dev << " (tol " << mean_tol << "), KS " << ks
    << " (crit " << ks_crit << ")";
  r.summary = s.str();
  return r;
}

struct WeakSharpnessOptions {
  int n = 200;
  double p = 0.5;
  double q = 0.3;
  int samples = 100;
  int seeds = 5;
  int min_passes = 99;        // per seed
  double radius_factor = 0.05;  // dist_inf(X, X*) <= radius_factor * p
  std::uint64_t seed = 1;
};

struct WeakSharpnessStats {
  double min_ratio = 0.0;  // min (f(X) - f(X*)) / dist1(X, X*)
  double threshold = 0.0;  // npq / 8
  std::vector<int> passes_per_seed;
};

/// Samples X near the ground truth and checks
///   f(X) - f(X*) >= (n p q / 8) dist1(X, X*).
inline WeakSharpnessStats weak_sharpness_stats(const WeakSharpnessOptions& opt = {}) {
  WeakSharpnessStats st;
  st.threshold = opt.n * opt.p * opt.q / 8.0;
  st.min_ratio = std::numeric_limits<double>::infinity();
  const double radius = opt.radius_factor * opt.p;
  for (int s = 0; s < opt.seeds; ++s) {
    const auto inst = generate_instance<3>({opt.n, 3, opt.p, opt.q, 0.0, opt.seed + static_cast<std::uint64_t>(s)});
    const auto& truth = *inst.ground_truth;
    const double f_star = objective(truth, inst.graph);
    std::mt19937_64 rng(9000 + opt.seed + s);
    int passes = 0;
    int drawn = 0;
    while (drawn < opt.samples) {
      const auto x = oracle::perturb_within(truth, radius, rng);
      const StackDistances dd = distances(x, truth);
      if (dd.linf > radius) continue;  // alignment moved a block outside the ball
      ++drawn;
      const double gain = objective(x, inst.graph) - f_star;
      if (dd.l1 > 0.0) st.min_ratio = std::min(st.min_ratio, gain / dd.l1);
      if (gain >= st.threshold * dd.l1) ++passes;
    }
    st.passes_per_seed.push_back(passes);
  }
  return st;
}

inline SuiteReport weak_sharpness(const WeakSharpnessOptions& opt = {}) {
  const auto st = weak_sharpness_stats(opt);
  const bool ok = std::all_of(st.passes_per_seed.begin(), st.passes_per_seed.end(),
                              [&](int p) { return p >= opt.min_passes; });
  SuiteReport r{"weak-sharpness", ok, {}, st.min_ratio};
  std::ostringstream s;
  s << "min (f(X)-f(X*))/dist1 = " << st.min_ratio << " vs npq/8 = " << st.threshold << "; passes per seed:";
  for (int p : st.passes_per_seed) s << ' ' << p << '/' << opt.samples;
  r.summary = s.str();
  return r;
}

}  // namespace resync::verify
