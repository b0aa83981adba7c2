#pragma once

#include <string>
#include <vector>

#include "pwreg/types.hpp"

namespace pwreg {

struct PlanEntry {
  int i = 0;      // alpha (reference) index
  int j = 0;      // beta (source) index
  Scalar mass = 0;
};

struct TransportPlan {
  std::vector<PlanEntry> entries;  // nonzero masses only
  Scalar value = 0;                // objective of the solved problem
  Scalar total_mass = 0;           // sum of entry masses
};

/// Exact mass-type partial W1: cheapest plan moving exactly m mass between
/// alpha and beta under Euclidean ground distance, with row sums bounded by
/// the alpha masses and column sums by the beta masses.
/// value = sum pi_ij * d(x_i, y_j).
TransportPlan solve_partial_mass(const DiscreteMeasure& alpha,
                                 const DiscreteMeasure& beta, Scalar m);

/// Exact distance-type partial W1: unconstrained-mass plan paying d - h per
/// unit, which only ever uses pairs with d < h.
/// value = sum pi_ij * (d(x_i, y_j) - h)  (always <= 0).
TransportPlan solve_bounded_distance(const DiscreteMeasure& alpha,
                                     const DiscreteMeasure& beta, Scalar h);

/// Complete transport between equal-total-mass measures; value is W1.
TransportPlan wasserstein1(const DiscreteMeasure& alpha, const DiscreteMeasure& beta);

/// Nonzero plan entries sorted by (i, j).
std::vector<PlanEntry> extract_correspondence(const TransportPlan& plan);

/// Dense Euclidean cost matrix (|alpha| x |beta|); size capped at 3000 a side.
Matrix cost_matrix(const DiscreteMeasure& alpha, const DiscreteMeasure& beta);

void save_plan_csv(const std::string& path, const TransportPlan& plan);
void save_plan_json(const std::string& path, const TransportPlan& plan);

}  // namespace pwreg
