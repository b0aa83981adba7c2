#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace pwreg {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// A finite point set in R^d, one point per row. d must be 1, 2 or 3 and
/// every coordinate finite.
struct PointCloud {
  Matrix pts;  // n x d

  PointCloud() = default;
  explicit PointCloud(Matrix p) : pts(std::move(p)) { validate(); }

  Eigen::Index size() const { return pts.rows(); }
  Eigen::Index dim() const { return pts.cols(); }

  void validate() const {
    if (pts.rows() < 1) throw std::invalid_argument("point cloud: no points");
    if (pts.cols() < 1 || pts.cols() > 3)
      throw std::invalid_argument("point cloud: dimension must be 1, 2 or 3, got " +
                                  std::to_string(pts.cols()));
    if (!pts.allFinite())
      throw std::invalid_argument("point cloud: non-finite coordinate");
  }
};

/// Weighted point set: per-point strictly positive mass.
struct DiscreteMeasure {
  PointCloud cloud;
  Vector mass;  // n, all > 0

  Scalar total_mass() const { return mass.sum(); }
};

/// Uniform-mass measure over a cloud.
inline DiscreteMeasure to_measure(const PointCloud& cloud, Scalar mass = 1.0) {
  if (!(mass > 0)) throw std::invalid_argument("to_measure: nonpositive mass");
  DiscreteMeasure mu;
  mu.cloud = cloud;
  mu.mass = Vector::Constant(cloud.size(), mass);
  return mu;
}

/// Per-point masses variant; sizes must match and every mass must be > 0.
inline DiscreteMeasure to_measure(const PointCloud& cloud, const Vector& mass) {
  if (mass.size() != cloud.size())
    throw std::invalid_argument("to_measure: mass vector size mismatch");
  if (!(mass.array() > 0).all())
    throw std::invalid_argument("to_measure: nonpositive mass");
  return DiscreteMeasure{cloud, mass};
}

/// Centering/scaling applied by normalize(), in original units.
struct NormalizationRecord {
  RowVector center;  // 1 x d
  Scalar scale = 1;  // > 0
};

}  // namespace pwreg
