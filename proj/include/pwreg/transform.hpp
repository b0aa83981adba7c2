#pragma once

#include "pwreg/types.hpp"

namespace pwreg {

/// Non-rigid map T(y_j) = y_j A + t + V_j (row-vector convention).
struct TransformParams {
  Matrix A;     // d x d
  RowVector t;  // 1 x d
  Matrix V;     // r x d per-point offsets
};

enum class TransformMode { affine_drift, drift_only };

TransformParams identity_transform(Eigen::Index r, Eigen::Index d);

PointCloud apply(const TransformParams& theta, const PointCloud& y);

struct TransformGrads {
  Matrix dA;
  RowVector dt;
  Matrix dV;
};

/// Chain rule through T for an upstream d(loss)/d(T(y_j)) per point:
/// dA = sum_j y_j^T g_j, dt = sum_j g_j, dV_j = g_j.
TransformGrads backprop_to_params(const PointCloud& y, const Matrix& upstream);

/// Flat layout [A, t, V] used by the optimizer; drift mode freezes A and t by
/// zeroing their gradient slots.
Vector pack(const TransformParams& theta);
void unpack(TransformParams& theta, const Vector& flat);
Vector pack(const TransformGrads& grads, TransformMode mode);

}  // namespace pwreg
