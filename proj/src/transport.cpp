#include "pwreg/transport.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "pwreg/min_cost_flow.hpp"

namespace pwreg {
namespace {

constexpr Eigen::Index kSideCap = 3000;

void check_pair(const DiscreteMeasure& alpha, const DiscreteMeasure& beta) {
  if (alpha.cloud.dim() != beta.cloud.dim())
    throw std::invalid_argument("transport: dimension mismatch between measures");
  if (alpha.cloud.size() > kSideCap || beta.cloud.size() > kSideCap)
    throw std::invalid_argument("transport: instance exceeds the 3000-point dense cap");
}

// Node layout: 0 = source terminal, 1..q = alpha, q+1..q+r = beta,
// q+r+1 = sink terminal.
struct Bipartite {
  int q = 0, r = 0;
  int s() const { return 0; }
  int node_a(int i) const { return 1 + i; }
  int node_b(int j) const { return 1 + q + j; }
  int t() const { return 1 + q + r; }
  int count() const { return q + r + 2; }
};

TransportPlan plan_from_flow(const std::vector<Scalar>& arc_flow,
                             const std::vector<FlowArc>& arcs, const Bipartite& g,
                             const Matrix& cost, Scalar per_unit_shift) {
  TransportPlan plan;
  for (std::size_t e = 0; e < arcs.size(); ++e) {
    if (arc_flow[e] <= 1e-12) continue;
    int from = arcs[e].from, to = arcs[e].to;
    if (from >= g.node_a(0) && from <= g.node_a(g.q - 1) && to >= g.node_b(0) &&
        to <= g.node_b(g.r - 1)) {
      int i = from - g.node_a(0);
      int j = to - g.node_b(0);
      Scalar mass = arc_flow[e];
      plan.entries.push_back({i, j, mass});
      plan.total_mass += mass;
      plan.value += mass * (cost(i, j) - per_unit_shift);
    }
  }
  return plan;
}

}  // namespace

Matrix cost_matrix(const DiscreteMeasure& alpha, const DiscreteMeasure& beta) {
  check_pair(alpha, beta);
  const Eigen::Index q = alpha.cloud.size(), r = beta.cloud.size();
  Matrix d(q, r);
  for (Eigen::Index i = 0; i < q; ++i)
    d.row(i) = (beta.cloud.pts.rowwise() - alpha.cloud.pts.row(i)).rowwise().norm().transpose();
  return d;
}

TransportPlan solve_partial_mass(const DiscreteMeasure& alpha,
                                 const DiscreteMeasure& beta, Scalar m) {
  check_pair(alpha, beta);
  Scalar cap = std::min(alpha.total_mass(), beta.total_mass());
  if (m < 0) throw std::invalid_argument("solve_partial_mass: m must be >= 0");
  if (m > cap + 1e-12)
    throw std::invalid_argument("solve_partial_mass: m exceeds min total mass");
  m = std::min(m, cap);
  if (m <= 0) return {};

  Bipartite g{int(alpha.cloud.size()), int(beta.cloud.size())};
  Matrix cost = cost_matrix(alpha, beta);
  std::vector<FlowArc> arcs;
  arcs.reserve(std::size_t(g.q) * std::size_t(g.r) + std::size_t(g.q + g.r));
  for (int i = 0; i < g.q; ++i) arcs.push_back({g.s(), g.node_a(i), alpha.mass(i), 0});
  for (int j = 0; j < g.r; ++j) arcs.push_back({g.node_b(j), g.t(), beta.mass(j), 0});
  const Scalar big = 2 * cap;
  for (int i = 0; i < g.q; ++i)
    for (int j = 0; j < g.r; ++j) arcs.push_back({g.node_a(i), g.node_b(j), big, cost(i, j)});

  FlowResult flow = solve_min_cost_flow(g.count(), arcs, g.s(), g.t(), m);
  return plan_from_flow(flow.flow, arcs, g, cost, 0.0);
}

TransportPlan solve_bounded_distance(const DiscreteMeasure& alpha,
                                     const DiscreteMeasure& beta, Scalar h) {
  check_pair(alpha, beta);
  if (!(h > 0)) throw std::invalid_argument("solve_bounded_distance: h must be > 0");

  Bipartite g{int(alpha.cloud.size()), int(beta.cloud.size())};
  Matrix cost = cost_matrix(alpha, beta);
  const Scalar full = std::min(alpha.total_mass(), beta.total_mass());
  std::vector<FlowArc> arcs;
  for (int i = 0; i < g.q; ++i) arcs.push_back({g.s(), g.node_a(i), alpha.mass(i), 0});
  for (int j = 0; j < g.r; ++j) arcs.push_back({g.node_b(j), g.t(), beta.mass(j), 0});
  arcs.push_back({g.s(), g.t(), full, 0});  // slack: mass that stays put
  Scalar min_red = 0;
  for (int i = 0; i < g.q; ++i)
    for (int j = 0; j < g.r; ++j) {
      Scalar red = cost(i, j) - h;
      if (red < 0) {  // arcs at or above h never help
        arcs.push_back({g.node_a(i), g.node_b(j), full, red});
        min_red = std::min(min_red, red);
      }
    }

  // Layered feasible potentials for the negative arcs: pi = 0 on s and alpha,
  // min incoming reduced cost on each beta node, global min on t.
  std::vector<Scalar> pot(std::size_t(g.count()), 0);
  for (const FlowArc& a : arcs)
    if (a.cost < 0)
      pot[std::size_t(a.to)] = std::min(pot[std::size_t(a.to)], a.cost);
  pot[std::size_t(g.t())] = min_red;

  FlowResult flow = solve_min_cost_flow(g.count(), arcs, g.s(), g.t(), full, &pot);
  return plan_from_flow(flow.flow, arcs, g, cost, h);
}

TransportPlan wasserstein1(const DiscreteMeasure& alpha, const DiscreteMeasure& beta) {
  Scalar ma = alpha.total_mass(), mb = beta.total_mass();
  if (std::abs(ma - mb) >= 1e-9)
    throw std::invalid_argument("wasserstein1: total masses differ");
  return solve_partial_mass(alpha, beta, std::min(ma, mb));
}

std::vector<PlanEntry> extract_correspondence(const TransportPlan& plan) {
  std::vector<PlanEntry> out = plan.entries;
  std::sort(out.begin(), out.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return out;
}

void save_plan_csv(const std::string& path, const TransportPlan& plan) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "i,j,mass\n";
  char buf[40];
  for (const PlanEntry& e : extract_correspondence(plan)) {
    std::snprintf(buf, sizeof buf, "%.17g", e.mass);
    out << e.i << ',' << e.j << ',' << buf << '\n';
  }
}

void save_plan_json(const std::string& path, const TransportPlan& plan) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  char buf[96];
  std::snprintf(buf, sizeof buf, "{\"value\": %.17g, \"total_mass\": %.17g}\n", plan.value,
                plan.total_mass);
  out << buf;
}

}  // namespace pwreg
