#include "pwreg/transform.hpp"

#include <stdexcept>

namespace pwreg {

TransformParams identity_transform(Eigen::Index r, Eigen::Index d) {
  TransformParams theta;
  theta.A = Matrix::Identity(d, d);
  theta.t = RowVector::Zero(d);
  theta.V = Matrix::Zero(r, d);
  return theta;
}

PointCloud apply(const TransformParams& theta, const PointCloud& y) {
  if (y.pts.rows() != theta.V.rows() || y.pts.cols() != theta.A.rows()) {
    throw std::invalid_argument("transform shape mismatch");
  }
  PointCloud out;
  out.pts = y.pts * theta.A;
  out.pts.rowwise() += theta.t;
  out.pts += theta.V;
  return out;
}

TransformGrads backprop_to_params(const PointCloud& y, const Matrix& upstream) {
  if (upstream.rows() != y.pts.rows() || upstream.cols() != y.pts.cols()) {
    throw std::invalid_argument("upstream gradient shape mismatch");
  }
  TransformGrads g;
  g.dA = y.pts.transpose() * upstream;
  g.dt = upstream.colwise().sum();
  g.dV = upstream;
  return g;
}

namespace {

Eigen::Index flat_size(Eigen::Index r, Eigen::Index d) { return d * d + d + r * d; }

}  // namespace

Vector pack(const TransformParams& theta) {
  const Eigen::Index d = theta.A.rows();
  const Eigen::Index r = theta.V.rows();
  Vector flat(flat_size(r, d));
  Eigen::Index at = 0;
  flat.segment(at, d * d) = Eigen::Map<const Vector>(theta.A.data(), d * d);
  at += d * d;
  flat.segment(at, d) = theta.t.transpose();
  at += d;
  flat.segment(at, r * d) = Eigen::Map<const Vector>(theta.V.data(), r * d);
  return flat;
}

void unpack(TransformParams& theta, const Vector& flat) {
  const Eigen::Index d = theta.A.rows();
  const Eigen::Index r = theta.V.rows();
  if (flat.size() != flat_size(r, d)) {
    throw std::invalid_argument("flat parameter size mismatch");
  }
  Eigen::Index at = 0;
  theta.A = Eigen::Map<const Matrix>(flat.data() + at, d, d);
  at += d * d;
  theta.t = flat.segment(at, d).transpose();
  at += d;
  theta.V = Eigen::Map<const Matrix>(flat.data() + at, r, d);
}

Vector pack(const TransformGrads& grads, TransformMode mode) {
  const Eigen::Index d = grads.dA.rows();
  const Eigen::Index r = grads.dV.rows();
  Vector flat(flat_size(r, d));
  Eigen::Index at = 0;
  if (mode == TransformMode::drift_only) {
    flat.segment(at, d * d + d).setZero();
    at += d * d + d;
  } else {
    flat.segment(at, d * d) = Eigen::Map<const Vector>(grads.dA.data(), d * d);
    at += d * d;
    flat.segment(at, d) = grads.dt.transpose();
    at += d;
  }
  flat.segment(at, r * d) = Eigen::Map<const Vector>(grads.dV.data(), r * d);
  return flat;
}

}  // namespace pwreg
