#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pwreg/types.hpp"

namespace pwreg {

/// Shifts to per-coordinate mean 0 and divides by the root mean squared
/// distance to the centroid, so the output has total variance 1.
/// Throws "zero variance" when all points coincide.
std::pair<PointCloud, NormalizationRecord> normalize(const PointCloud& cloud);

PointCloud denormalize(const PointCloud& cloud, const NormalizationRecord& rec);

enum class CorruptMode { noise, crop };

/// noise: appends floor(param) points drawn uniformly in the cloud's
/// axis-aligned bounding box.
/// crop: random plane with uniform normal through the centroid; keeps the
/// ceil(param * n) points on the high side of the signed-distance quantile.
PointCloud corrupt(const PointCloud& cloud, CorruptMode mode, Scalar param,
                   std::uint64_t seed);

/// Index set the crop mode retains (ascending). Exposed so harnesses can
/// track ground-truth correspondence through a crop.
std::vector<int> plane_crop_indices(const PointCloud& cloud, Scalar retain_ratio,
                                    std::uint64_t seed);

/// Smooth random offset field plus isotropic Gaussian jitter:
/// output_j = input_j + V_j + eps_j with V drawn so each coordinate of V has
/// covariance lambda^{-1} G_rho (realized through a k-landmark Nystrom factor)
/// and eps ~ N(0, noise_sigma^2 I). Point order is preserved, so ground-truth
/// correspondence is positional.
PointCloud synthesize_deformation(const PointCloud& cloud, Scalar lambda, Scalar rho,
                                  Scalar noise_sigma, int k, std::uint64_t seed);

/// Deterministic wavy-sheet sample: n points on a smooth height-field surface
/// in R^3, for experiments when no mesh file is at hand.
PointCloud sample_surface(int n, std::uint64_t seed);

/// Mean over points of the distance to the nearest other point.
Scalar mean_nn_distance(const PointCloud& cloud);

}  // namespace pwreg
