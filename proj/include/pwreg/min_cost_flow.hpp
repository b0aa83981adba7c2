#pragma once

#include <vector>

#include "pwreg/types.hpp"

namespace pwreg {

struct FlowArc {
  int from = 0;
  int to = 0;
  Scalar capacity = 0;
  Scalar cost = 0;
};

struct FlowResult {
  std::vector<Scalar> flow;  // per arc, same order as input
  Scalar cost = 0;
};

/// Minimum-cost flow of exactly `value` units from node s to node t by
/// successive shortest augmenting paths with node potentials.
///
/// Capacities, costs and the flow value are real numbers. Arcs may carry
/// negative costs only if `initial_potentials` is supplied and reduced costs
/// cost(u,v) + pi(u) - pi(v) are all nonnegative under it (callers with
/// layered graphs can compute such potentials in closed form). Throws if the
/// network cannot carry `value` units.
FlowResult solve_min_cost_flow(int node_count, const std::vector<FlowArc>& arcs,
                               int s, int t, Scalar value,
                               const std::vector<Scalar>* initial_potentials = nullptr);

}  // namespace pwreg
