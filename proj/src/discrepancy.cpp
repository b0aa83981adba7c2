#include "pwreg/discrepancy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "pwreg/transport.hpp"

namespace pwreg {

namespace {

constexpr Scalar kPi = 3.14159265358979323846;

void check_pair(const PointCloud& x, const PointCloud& y) {
  x.validate();
  y.validate();
  if (x.dim() != y.dim()) {
    throw std::invalid_argument("dimension mismatch");
  }
}

void check_sigma(Scalar sigma) {
  if (!(sigma > 0)) {
    throw std::invalid_argument("sigma must be positive");
  }
}

// Squared Euclidean distances, rows over a, columns over b.
Matrix squared_distances(const Matrix& a, const Matrix& b) {
  Matrix sq = -2.0 * a * b.transpose();
  sq.colwise() += a.rowwise().squaredNorm();
  sq.rowwise() += b.rowwise().squaredNorm().transpose();
  return sq.cwiseMax(0.0);
}

// Gaussian density with the given variance, evaluated from squared distances.
Matrix gaussian_density(const Matrix& sq, Scalar variance, Eigen::Index d) {
  const Scalar norm = std::pow(2.0 * kPi * variance, -0.5 * static_cast<Scalar>(d));
  return (norm * (-sq.array() / (2.0 * variance)).exp()).matrix();
}

PointCloud translated(const PointCloud& y, Scalar t) {
  PointCloud out = y;
  out.pts.array() += t;
  return out;
}

}  // namespace

Scalar kl_divergence(const PointCloud& x, const PointCloud& y, Scalar sigma, Scalar omega) {
  check_pair(x, y);
  check_sigma(sigma);
  if (!(omega >= 0 && omega < 1)) {
    throw std::invalid_argument("omega must be in [0, 1)");
  }
  const Scalar q = static_cast<Scalar>(x.size());
  const Scalar r = static_cast<Scalar>(y.size());
  const Matrix phi = gaussian_density(squared_distances(y.pts, x.pts), sigma, x.dim());
  const Vector mixture =
      ((omega / q) + ((1.0 - omega) / r) * phi.rowwise().sum().array()).matrix();
  return -mixture.array().log().sum() / q;
}

Scalar l2_distance(const PointCloud& x, const PointCloud& y, Scalar sigma) {
  check_pair(x, y);
  check_sigma(sigma);
  const Scalar q = static_cast<Scalar>(x.size());
  const Scalar r = static_cast<Scalar>(y.size());
  const Eigen::Index d = x.dim();
  const Scalar var = 2.0 * sigma;
  const Scalar xx = gaussian_density(squared_distances(x.pts, x.pts), var, d).sum();
  const Scalar yy = gaussian_density(squared_distances(y.pts, y.pts), var, d).sum();
  const Scalar xy = gaussian_density(squared_distances(x.pts, y.pts), var, d).sum();
  return xx / (q * q) + yy / (r * r) - 2.0 * xy / (q * r);
}

std::string discrepancy_name(const DiscrepancySpec& spec) {
  char buf[64];
  switch (spec.kind) {
    case DiscrepancyKind::kl:
      return "kl";
    case DiscrepancyKind::l2:
      return "l2";
    case DiscrepancyKind::pw_mass:
      std::snprintf(buf, sizeof(buf), "pw_mass(%g)", spec.threshold);
      return buf;
    case DiscrepancyKind::pw_distance:
      std::snprintf(buf, sizeof(buf), "pw_distance(%g)", spec.threshold);
      return buf;
  }
  throw std::logic_error("unknown discrepancy kind");
}

LandscapeCurve landscape_sweep(const PointCloud& x, const PointCloud& y,
                               const DiscrepancySpec& spec, const Vector& t_grid) {
  check_pair(x, y);
  if (x.dim() != 1) {
    throw std::invalid_argument("landscape sweep requires 1-D clouds");
  }
  if (t_grid.size() == 0) {
    throw std::invalid_argument("empty translation grid");
  }
  for (Eigen::Index k = 1; k < t_grid.size(); ++k) {
    if (!(t_grid[k] > t_grid[k - 1])) {
      throw std::invalid_argument("translation grid must be strictly increasing");
    }
  }
  LandscapeCurve curve;
  curve.discrepancy_name = discrepancy_name(spec);
  curve.t_values = t_grid;
  curve.values.resize(t_grid.size());
  const DiscreteMeasure alpha = to_measure(x);
  for (Eigen::Index k = 0; k < t_grid.size(); ++k) {
    const PointCloud yt = translated(y, t_grid[k]);
    switch (spec.kind) {
      case DiscrepancyKind::kl:
        curve.values[k] = kl_divergence(x, yt, spec.sigma, spec.omega);
        break;
      case DiscrepancyKind::l2:
        curve.values[k] = l2_distance(x, yt, spec.sigma);
        break;
      case DiscrepancyKind::pw_mass:
        curve.values[k] = solve_partial_mass(alpha, to_measure(yt), spec.threshold).value;
        break;
      case DiscrepancyKind::pw_distance:
        curve.values[k] =
            solve_bounded_distance(alpha, to_measure(yt), spec.threshold).value;
        break;
    }
  }
  return curve;
}

Vector default_t_grid() {
  const Eigen::Index n = 181;
  Vector grid(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    grid[k] = -1.0 + 0.05 * static_cast<Scalar>(k);
  }
  return grid;
}

ToyPair make_toy_pair(Eigen::Index n_outliers) {
  if (n_outliers < 0) {
    throw std::invalid_argument("negative outlier count");
  }
  const Eigen::Index n_data = 10;
  Vector data(n_data);
  for (Eigen::Index i = 0; i < n_data; ++i) {
    data[i] = 3.0 * static_cast<Scalar>(i) / static_cast<Scalar>(n_data - 1);
  }
  ToyPair pair;
  pair.y.pts = data;
  pair.x.pts.resize(n_data + n_outliers, 1);
  pair.x.pts.topRows(n_data) = data;
  for (Eigen::Index i = 0; i < n_outliers; ++i) {
    const Scalar u = n_outliers == 1
                         ? 0.5
                         : static_cast<Scalar>(i) / static_cast<Scalar>(n_outliers - 1);
    pair.x.pts(n_data + i, 0) = 7.8 + 0.4 * u;
  }
  return pair;
}

void save_curve_csv(const LandscapeCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error(path + ": cannot open for writing");
  }
  out << "t," << curve.discrepancy_name << "\n";
  char buf[128];
  for (Eigen::Index k = 0; k < curve.t_values.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", curve.t_values[k], curve.values[k]);
    out << buf;
  }
  if (!out.good()) {
    throw std::runtime_error(path + ": write failed");
  }
}

}  // namespace pwreg
