// Recover 100 rotations in SO(3) from a graph where half the observed
// relative rotations are replaced by random ones.
#include <iostream>

#include "resync/resync.hpp"

int main() {
  using namespace resync;
  const RcmParams params{100, 3, 0.5, 0.5, 0.0, 42};
  const auto inst = generate_instance<3>(params);
  std::cout << "edges: " << inst.graph.num_edges() << ", outliers: " << inst.graph.count(EdgeLabel::kOutlier)
            << '\n';

  const auto init = spectrin(inst.graph);
  std::cout << "spectral init dist: " << dist(init.stack, *inst.ground_truth) << '\n';

  SolverConfig cfg;
  cfg.mu0 = default_initial_step(inst.graph, inst.params);
  const auto result = resync_run(inst.graph, cfg, init.stack, &*inst.ground_truth);
  std::cout << "after " << result.iterations << " iterations: dist " << *result.trace.back().dist << '\n';
}
