#include "pwreg/min_cost_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace pwreg {

namespace {
constexpr Scalar kCapEps = 1e-12;
}

FlowResult solve_min_cost_flow(int node_count, const std::vector<FlowArc>& arcs,
                               int s, int t, Scalar value,
                               const std::vector<Scalar>* initial_potentials) {
  if (s < 0 || s >= node_count || t < 0 || t >= node_count || s == t)
    throw std::invalid_argument("min_cost_flow: bad terminal nodes");
  if (value < 0) throw std::invalid_argument("min_cost_flow: negative flow value");

  // Paired residual edges: 2i forward, 2i+1 reverse.
  const std::size_t m = arcs.size();
  std::vector<int> to(2 * m), next_edge(2 * m, -1);
  std::vector<Scalar> cap(2 * m), cost(2 * m);
  std::vector<int> head(std::size_t(node_count), -1);
  for (std::size_t i = 0; i < m; ++i) {
    const FlowArc& a = arcs[i];
    if (a.from < 0 || a.from >= node_count || a.to < 0 || a.to >= node_count)
      throw std::invalid_argument("min_cost_flow: arc endpoint out of range");
    to[2 * i] = a.to;
    cap[2 * i] = a.capacity;
    cost[2 * i] = a.cost;
    next_edge[2 * i] = head[std::size_t(a.from)];
    head[std::size_t(a.from)] = int(2 * i);
    to[2 * i + 1] = a.from;
    cap[2 * i + 1] = 0;
    cost[2 * i + 1] = -a.cost;
    next_edge[2 * i + 1] = head[std::size_t(a.to)];
    head[std::size_t(a.to)] = int(2 * i + 1);
  }

  std::vector<Scalar> pot(std::size_t(node_count), 0);
  if (initial_potentials) {
    if (int(initial_potentials->size()) != node_count)
      throw std::invalid_argument("min_cost_flow: potential vector size mismatch");
    pot = *initial_potentials;
  } else {
    for (const FlowArc& a : arcs)
      if (a.cost < 0)
        throw std::invalid_argument(
            "min_cost_flow: negative arc cost requires initial potentials");
  }

  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> dist(static_cast<std::size_t>(node_count));
  std::vector<int> parent_edge(static_cast<std::size_t>(node_count));
  Scalar remaining = value;
  Scalar total_cost = 0;

  while (remaining > kCapEps) {
    // Dijkstra on reduced costs.
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(parent_edge.begin(), parent_edge.end(), -1);
    dist[std::size_t(s)] = 0;
    using Item = std::pair<Scalar, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    pq.emplace(0.0, s);
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[std::size_t(u)]) continue;
      for (int e = head[std::size_t(u)]; e != -1; e = next_edge[std::size_t(e)]) {
        if (cap[std::size_t(e)] <= kCapEps) continue;
        int v = to[std::size_t(e)];
        Scalar rc = cost[std::size_t(e)] + pot[std::size_t(u)] - pot[std::size_t(v)];
        if (rc < 0) {
          if (rc < -1e-6)
            throw std::runtime_error("min_cost_flow: potentials violated (rc=" +
                                     std::to_string(rc) + ")");
          rc = 0;  // floating-point dust
        }
        if (d + rc < dist[std::size_t(v)]) {
          dist[std::size_t(v)] = d + rc;
          parent_edge[std::size_t(v)] = e;
          pq.emplace(dist[std::size_t(v)], v);
        }
      }
    }
    if (dist[std::size_t(t)] == inf)
      throw std::invalid_argument("min_cost_flow: network cannot carry the requested value");

    Scalar dt = dist[std::size_t(t)];
    for (int v = 0; v < node_count; ++v)
      pot[std::size_t(v)] += std::min(dist[std::size_t(v)], dt);

    Scalar push = remaining;
    for (int v = t; v != s;) {
      int e = parent_edge[std::size_t(v)];
      push = std::min(push, cap[std::size_t(e)]);
      v = to[std::size_t(e ^ 1)];
    }
    for (int v = t; v != s;) {
      int e = parent_edge[std::size_t(v)];
      cap[std::size_t(e)] -= push;
      cap[std::size_t(e ^ 1)] += push;
      total_cost += push * cost[std::size_t(e)];
      v = to[std::size_t(e ^ 1)];
    }
    remaining -= push;
  }

  FlowResult res;
  res.cost = total_cost;
  res.flow.resize(m);
  for (std::size_t i = 0; i < m; ++i) res.flow[i] = cap[2 * i + 1];
  return res;
}

}  // namespace pwreg
