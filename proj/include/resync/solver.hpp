#pragma once

// Riemannian subgradient iteration for the least-unsquared objective
//   f(X) = sum over directed edges (i, j) of ||X_i X_j^T - Y_ij||_F
// on SO(d)^n, with geometrically decaying steps mu_k = mu0 * gamma^k.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "resync/errors.hpp"
#include "resync/model.hpp"
#include "resync/rotgroup.hpp"

namespace resync {

struct SolverConfig {
  double mu0 = 0.0;
  double gamma = 0.95;
  int max_iters = 500;
  double step_floor = 1e-16;
  double zero_residual_tol = 1e-12;
  int max_halvings = 30;  // retries with mu/2 when a retraction is rank deficient

  void validate() const {
    if (!(mu0 > 0.0) || !std::isfinite(mu0)) throw InvalidParams("mu0 must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidParams("gamma must lie in (0, 1)");
    if (max_iters < 0) throw InvalidParams("max_iters must be non-negative");
    if (!(step_floor >= 0.0)) throw InvalidParams("step_floor must be non-negative");
    if (!(zero_residual_tol >= 0.0)) throw InvalidParams("zero_residual_tol must be non-negative");
  }
};

/// 1 / (n p q) when the model ratios are known. Otherwise p is taken as 1 and
/// q estimated from the edge count, which gives n / (2 |E|).
template <int D>
double default_initial_step(const ObservationGraph<D>& graph, const RcmParams& params) {
  const double n = graph.num_nodes();
  if (params.ratios_known()) return 1.0 / (n * params.p * params.q);
  if (graph.num_edges() == 0) throw InvalidParams("cannot derive a step size for a graph without edges");
  return n / (2.0 * graph.num_edges());
}

template <int D>
double edge_residual(const RotationStack<D>& x, const Edge<D>& e) {
  return (x[e.i] * x[e.j].transpose() - e.measurement).norm();
}

/// Each unordered edge counts twice, once per orientation.
template <int D>
double objective(const RotationStack<D>& x, const ObservationGraph<D>& graph) {
  double s = 0.0;
  for (const auto& e : graph.edges()) s += edge_residual(x, e);
  return 2.0 * s;
}

struct ObjectiveSplit {
  double total = 0.0;
  double clean = 0.0;    // true-measurement edges
  double outlier = 0.0;  // corrupted edges
};

/// f = g + h over true and outlier edges. Edges without a label count only
/// toward the total.
template <int D>
ObjectiveSplit objective_split(const RotationStack<D>& x, const ObservationGraph<D>& graph) {
  ObjectiveSplit out;
  for (const auto& e : graph.edges()) {
    const double r = 2.0 * edge_residual(x, e);
    out.total += r;
    if (e.label == EdgeLabel::kTrue) out.clean += r;
    if (e.label == EdgeLabel::kOutlier) out.outlier += r;
  }
  return out;
}

/// 2 sum_{j in E_i} (X_i - Y_ij X_j) / ||X_i X_j^T - Y_ij||_F, with the zero
/// matrix chosen from the subdifferential for residuals at or below `zero_tol`.
template <int D>
Block<D> euclidean_subgradient_block(const RotationStack<D>& x, const ObservationGraph<D>& graph, int i,
                                     double zero_tol = 1e-12) {
  const int d = x.dim();
  const Block<D>& xi = x[i];
  Block<D> acc = Block<D>::Zero(d, d);
  for (const Incidence& inc : graph.incident(i)) {
    const Block<D> y = graph.measurement(inc);
    const Block<D>& xj = x[inc.neighbor];
    const double r = (xi * xj.transpose() - y).norm();
    if (r <= zero_tol) continue;
    acc.noalias() += (xi - y * xj) / r;
  }
  return 2.0 * acc;
}

template <int D>
GeneralBlockStack<D> euclidean_subgradient(const RotationStack<D>& x, const ObservationGraph<D>& graph,
                                           double zero_tol = 1e-12) {
  GeneralBlockStack<D> g(x.size(), x.dim());
  for (int i = 0; i < x.size(); ++i) g[i] = euclidean_subgradient_block(x, graph, i, zero_tol);
  return g;
}

/// Blockwise tangent projection of the Euclidean subgradient.
template <int D>
GeneralBlockStack<D> riemannian_subgradient(const RotationStack<D>& x, const ObservationGraph<D>& graph,
                                            double zero_tol = 1e-12) {
  GeneralBlockStack<D> g(x.size(), x.dim());
  for (int i = 0; i < x.size(); ++i) g[i] = tangent_project(x[i], euclidean_subgradient_block(x, graph, i, zero_tol));
  return g;
}

/// One simultaneous update X_i <- Qr(X_i - mu * grad_i); every subgradient is
/// evaluated at the input X before any block moves.
template <int D>
RotationStack<D> resync_step(const RotationStack<D>& x, const ObservationGraph<D>& graph, double mu,
                             double zero_tol = 1e-12) {
  if (!(mu >= 0.0)) throw InvalidParams("step size must be non-negative");
  if (mu == 0.0) return x;
  const GeneralBlockStack<D> grad = riemannian_subgradient(x, graph, zero_tol);
  RotationStack<D> next(x.size(), x.dim());
  for (int i = 0; i < x.size(); ++i) next[i] = qr_retract(x[i], grad[i], mu);
  return next;
}

struct IterationRecord {
  int iter = 0;
  double mu = 0.0;
  double objective = 0.0;
  std::optional<double> dist;
  std::optional<double> dist1;
  std::optional<double> dist_inf;
  std::optional<double> g_part;
  std::optional<double> h_part;
};

struct IterationTrace {
  std::vector<IterationRecord> records;

  bool empty() const { return records.empty(); }
  const IterationRecord& back() const { return records.back(); }
  std::size_t size() const { return records.size(); }
};

template <int D>
struct SolveResult {
  RotationStack<D> solution;
  IterationTrace trace;
  int iterations = 0;
};

namespace detail {

template <int D>
IterationRecord make_record(int k, double mu, const RotationStack<D>& x, const ObservationGraph<D>& graph,
                            const RotationStack<D>* truth) {
  IterationRecord rec;
  rec.iter = k;
  rec.mu = mu;
  const ObjectiveSplit split = objective_split(x, graph);
  rec.objective = split.total;
  if (graph.has_labels()) {
    rec.g_part = split.clean;
    rec.h_part = split.outlier;
  }
  if (truth != nullptr) {
    const StackDistances dd = distances(x, *truth);
    rec.dist = dd.l2;
    rec.dist1 = dd.l1;
    rec.dist_inf = dd.linf;
  }
  return rec;
}

}  // namespace detail

/// Runs the iteration from `init` until k reaches max_iters or mu_k drops
/// below step_floor. The trace holds one record per iterate, k = 0 included.
template <int D>
SolveResult<D> resync_run(const ObservationGraph<D>& graph, const SolverConfig& config, const RotationStack<D>& init,
                          const RotationStack<D>* ground_truth = nullptr) {
  config.validate();
  if (init.size() != graph.num_nodes() || init.dim() != graph.dim()) throw InvalidParams("initial point does not match graph");
  if (ground_truth != nullptr && (ground_truth->size() != init.size() || ground_truth->dim() != init.dim())) {
    throw InvalidParams("ground truth does not match graph");
  }
  SolveResult<D> out{init, {}, 0};
  for (int k = 0;; ++k) {
    const double mu = config.mu0 * std::pow(config.gamma, k);
    out.trace.records.push_back(detail::make_record(k, mu, out.solution, graph, ground_truth));
    if (k >= config.max_iters || mu < config.step_floor) break;
    double step = mu;
    for (int halving = 0;; ++halving) {
      try {
        out.solution = resync_step(out.solution, graph, step, config.zero_residual_tol);
        break;
      } catch (const RankDeficient&) {
        if (halving >= config.max_halvings) throw;
        step *= 0.5;
      }
    }
    out.iterations = k + 1;
  }
  return out;
}

}  // namespace resync
