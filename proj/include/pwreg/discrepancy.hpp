#pragma once

#include <string>

#include "pwreg/types.hpp"

namespace pwreg {

/// Robust density-matching discrepancies used by coherent-drift style methods,
/// plus a 1-D translation sweep comparing them with the partial-transport
/// costs.

/// KL(X,Y) = -(1/q) sum_j log( omega/q + (1-omega) sum_i (1/r) phi(y_j|x_i, sigma) )
/// with phi the Gaussian density of variance sigma, q = |X|, r = |Y|.
Scalar kl_divergence(const PointCloud& x, const PointCloud& y, Scalar sigma = 1.0,
                     Scalar omega = 0.2);

/// L2(X,Y) = (1/q^2) sum phi(0|x_i-x_j, 2s) + (1/r^2) sum phi(0|y_i-y_j, 2s)
///           - (2/qr) sum phi(0|x_i-y_j, 2s).
Scalar l2_distance(const PointCloud& x, const PointCloud& y, Scalar sigma = 1.0);

enum class DiscrepancyKind { kl, l2, pw_mass, pw_distance };

struct DiscrepancySpec {
  DiscrepancyKind kind = DiscrepancyKind::kl;
  Scalar threshold = 0;  // m for pw_mass, h for pw_distance
  Scalar sigma = 1.0;
  Scalar omega = 0.2;
};

std::string discrepancy_name(const DiscrepancySpec& spec);

struct LandscapeCurve {
  std::string discrepancy_name;
  Vector t_values;
  Vector values;
};

/// Evaluates the chosen discrepancy between X and the translate Y + t for each
/// grid value. 1-D clouds only; the pw_* kinds call the exact flow solvers.
LandscapeCurve landscape_sweep(const PointCloud& x, const PointCloud& y,
                               const DiscrepancySpec& spec, const Vector& t_grid);

/// Grid [-1, 8] with step 0.05.
Vector default_t_grid();

/// 1-D pair: Y holds 10 equi-spaced points in [0, 3]; X holds the same 10
/// points plus n_outliers equi-spaced in [7.8, 8.2] (a single outlier sits at
/// the midpoint 8.0).
struct ToyPair {
  PointCloud x;
  PointCloud y;
};

ToyPair make_toy_pair(Eigen::Index n_outliers);

void save_curve_csv(const LandscapeCurve& curve, const std::string& path);

}  // namespace pwreg
