#pragma once

// Random Corruption Model instances and the observation graph.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "resync/errors.hpp"
#include "resync/rotgroup.hpp"

namespace resync {

enum class EdgeLabel : unsigned char { kTrue, kOutlier, kUnknown };

struct RcmParams {
  int n = 0;
  int d = 3;
  double p = 1.0;  // true-observation ratio
  double q = 1.0;  // observation ratio
  double sigma = 0.0;
  std::uint64_t seed = 0;

  // p and q are NaN for instances loaded without model metadata.
  bool ratios_known() const { return std::isfinite(p) && std::isfinite(q); }

  void validate() const {
    if (n < 1) throw InvalidParams("n must be positive");
    if (d < 2) throw InvalidParams("d must be at least 2");
    if (!(p > 0.0 && p <= 1.0)) throw InvalidParams("p must lie in (0, 1]");
    if (!(q > 0.0 && q <= 1.0)) throw InvalidParams("q must lie in (0, 1]");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidParams("sigma must be finite and non-negative");
  }

  // NaN ratios compare equal to each other so that metadata-free instances
  // round-trip.
  friend bool operator==(const RcmParams& a, const RcmParams& b) {
    auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.n == b.n && a.d == b.d && same(a.p, b.p) && same(a.q, b.q) && a.sigma == b.sigma && a.seed == b.seed;
  }
};

/// p = q = (log n / n)^{1/3}, the setting with p^2 q = log n / n.
inline double log_cube_ratio(int n) { return std::cbrt(std::log(static_cast<double>(n)) / n); }

template <int D>
struct Edge {
  int i = 0;  // i < j
  int j = 0;
  Block<D> measurement;  // Y_ij; Y_ji is its transpose
  EdgeLabel label = EdgeLabel::kUnknown;
};

struct Incidence {
  int neighbor = 0;
  int edge = 0;
  bool reversed = false;  // the stored block is Y_{neighbor, self}
};

/// Undirected measurement graph. Each unordered pair stores one block Y_ij
/// with i < j; reading (j, i) yields the exact transpose. Incidence lists are
/// kept sorted by neighbor so that per-node sums have a fixed order.
template <int D>
class ObservationGraph {
 public:
  ObservationGraph() = default;

  ObservationGraph(int n, int d = D) : n_(n), d_(d), incidence_(static_cast<std::size_t>(n)) {
    if (n < 1) throw InvalidParams("graph needs at least one node");
    if (d < 1 || (D != Eigen::Dynamic && d != D)) throw InvalidParams("graph block dimension mismatch");
  }

  /// Adds the measurement Y_ij. Pairs given with i > j are stored transposed.
  void add_edge(int i, int j, const Block<D>& y, EdgeLabel label = EdgeLabel::kUnknown) {
    if (i < 0 || j < 0 || i >= n_ || j >= n_) throw InvalidParams("edge endpoint out of range");
    if (i == j) throw InvalidParams("self-loops are not allowed");
    if (y.rows() != d_ || y.cols() != d_) throw InvalidParams("measurement block has the wrong shape");
    Edge<D> e;
    if (i < j) {
      e = {i, j, y, label};
    } else {
      e = {j, i, y.transpose(), label};
    }
    const int idx = static_cast<int>(edges_.size());
    insert_incidence(e.i, {e.j, idx, false});
    insert_incidence(e.j, {e.i, idx, true});
    edges_.push_back(std::move(e));
  }

  int num_nodes() const { return n_; }
  int dim() const { return d_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const std::vector<Edge<D>>& edges() const { return edges_; }
  const Edge<D>& edge(int idx) const { return edges_[static_cast<std::size_t>(idx)]; }

  std::span<const Incidence> incident(int i) const { return incidence_[static_cast<std::size_t>(i)]; }

  /// The block Y_ij for a node-oriented incidence.
  Block<D> measurement(const Incidence& inc) const {
    const auto& y = edges_[static_cast<std::size_t>(inc.edge)].measurement;
    return inc.reversed ? Block<D>(y.transpose()) : y;
  }

  std::optional<Block<D>> measurement(int i, int j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_) return std::nullopt;
    const auto& inc = incidence_[static_cast<std::size_t>(i)];
    auto it = std::lower_bound(inc.begin(), inc.end(), j, [](const Incidence& a, int v) { return a.neighbor < v; });
    if (it == inc.end() || it->neighbor != j) return std::nullopt;
    return measurement(*it);
  }

  bool has_labels() const {
    return std::none_of(edges_.begin(), edges_.end(), [](const Edge<D>& e) { return e.label == EdgeLabel::kUnknown; });
  }

  int count(EdgeLabel label) const {
    return static_cast<int>(
        std::count_if(edges_.begin(), edges_.end(), [label](const Edge<D>& e) { return e.label == label; }));
  }

  friend bool operator==(const ObservationGraph& a, const ObservationGraph& b) {
    if (a.n_ != b.n_ || a.d_ != b.d_ || a.edges_.size() != b.edges_.size()) return false;
    for (std::size_t k = 0; k < a.edges_.size(); ++k) {
      const auto& x = a.edges_[k];
      const auto& y = b.edges_[k];
      if (x.i != y.i || x.j != y.j || x.label != y.label || x.measurement != y.measurement) return false;
    }
    return true;
  }

 private:
  void insert_incidence(int node, Incidence inc) {
    auto& list = incidence_[static_cast<std::size_t>(node)];
    auto it = std::lower_bound(list.begin(), list.end(), inc.neighbor,
                               [](const Incidence& a, int v) { return a.neighbor < v; });
    if (it != list.end() && it->neighbor == inc.neighbor) throw InvalidParams("duplicate edge");
    list.insert(it, inc);
  }

  int n_ = 0;
  int d_ = (D == Eigen::Dynamic ? 0 : D);
  std::vector<Edge<D>> edges_;
  std::vector<std::vector<Incidence>> incidence_;
};

template <int D>
struct Instance {
  ObservationGraph<D> graph;
  std::optional<RotationStack<D>> ground_truth;
  RcmParams params;

  friend bool operator==(const Instance&, const Instance&) = default;
};

/// Samples an instance. Ground truth blocks are projections of Gaussian
/// matrices; each pair i < j is observed with probability q, and an observed
/// pair is a true measurement P_SO(X*_i X*_j^T + sigma G) with probability p,
/// otherwise a Haar-uniform outlier. Draws are sequential in (i, j) order.
template <int D>
Instance<D> generate_instance(const RcmParams& params) {
  params.validate();
  if (D != Eigen::Dynamic && params.d != D) throw InvalidParams("params.d does not match the block dimension");
  const int n = params.n;
  const int d = params.d;
  std::mt19937_64 rng(params.seed);

  RotationStack<D> truth(n, d);
  for (auto& b : truth) b = project_so(gaussian_block<D>(rng, d)).rotation;

  ObservationGraph<D> graph(n, d);
  std::bernoulli_distribution observed(params.q);
  std::bernoulli_distribution genuine(params.p);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!observed(rng)) continue;
      if (genuine(rng)) {
        Block<D> clean = truth[i] * truth[j].transpose();
        if (params.sigma > 0.0) {
          clean = project_so(clean + params.sigma * gaussian_block<D>(rng, d)).rotation;
        }
        graph.add_edge(i, j, clean, EdgeLabel::kTrue);
      } else {
        graph.add_edge(i, j, random_rotation<D>(rng, d), EdgeLabel::kOutlier);
      }
    }
  }
  return {std::move(graph), std::move(truth), params};
}

/// The nd x nd symmetric data matrix: Y_ij on edges, zero elsewhere,
/// zero diagonal blocks.
template <int D>
Eigen::MatrixXd dense_data_matrix(const ObservationGraph<D>& graph) {
  const int d = graph.dim();
  const int nd = graph.num_nodes() * d;
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(nd, nd);
  for (const auto& e : graph.edges()) {
    y.block(e.i * d, e.j * d, d, d) = e.measurement;
    y.block(e.j * d, e.i * d, d, d) = e.measurement.transpose();
  }
  return y;
}

/// The data matrix as an implicit operator, V -> Y V, for the eigensolver.
template <int D>
class GraphOperator {
 public:
  explicit GraphOperator(const ObservationGraph<D>& graph) : graph_(&graph) {}

  Eigen::Index rows() const { return static_cast<Eigen::Index>(graph_->num_nodes()) * graph_->dim(); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& v) const {
    const int d = graph_->dim();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows(), v.cols());
    for (const auto& e : graph_->edges()) {
      out.middleRows(e.i * d, d).noalias() += e.measurement * v.middleRows(e.j * d, d);
      out.middleRows(e.j * d, d).noalias() += e.measurement.transpose() * v.middleRows(e.i * d, d);
    }
    return out;
  }

 private:
  const ObservationGraph<D>* graph_;
};

}  // namespace resync
