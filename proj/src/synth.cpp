#include "pwreg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pwreg/coherence.hpp"
#include "pwreg/rng.hpp"

namespace pwreg {

std::pair<PointCloud, NormalizationRecord> normalize(const PointCloud& cloud) {
  NormalizationRecord rec;
  rec.center = cloud.pts.colwise().mean();
  Matrix centered = cloud.pts.rowwise() - rec.center;
  rec.scale = std::sqrt(centered.squaredNorm() / Scalar(cloud.size()));
  if (!(rec.scale > 1e-300))
    throw std::invalid_argument("normalize: zero variance (all points identical)");
  return {PointCloud(centered / rec.scale), rec};
}

PointCloud denormalize(const PointCloud& cloud, const NormalizationRecord& rec) {
  if (rec.center.size() != cloud.dim())
    throw std::invalid_argument("denormalize: record dimension mismatch");
  return PointCloud((cloud.pts * rec.scale).rowwise() + rec.center);
}

std::vector<int> plane_crop_indices(const PointCloud& cloud, Scalar retain_ratio,
                                    std::uint64_t seed) {
  if (!(retain_ratio > 0) || retain_ratio > 1)
    throw std::invalid_argument("crop: retain ratio must be in (0, 1]");
  const Eigen::Index n = cloud.size();
  CounterRng rng(seed);
  RowVector normal = rng.unit_direction(cloud.dim());
  RowVector centroid = cloud.pts.colwise().mean();
  Vector signed_dist = (cloud.pts.rowwise() - centroid) * normal.transpose();

  const Eigen::Index keep = Eigen::Index(std::ceil(retain_ratio * Scalar(n)));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return signed_dist(a) > signed_dist(b); });
  order.resize(std::size_t(keep));
  std::sort(order.begin(), order.end());
  return order;
}

PointCloud corrupt(const PointCloud& cloud, CorruptMode mode, Scalar param,
                   std::uint64_t seed) {
  if (mode == CorruptMode::noise) {
    if (param < 0) throw std::invalid_argument("corrupt: outlier count must be >= 0");
    const Eigen::Index extra = Eigen::Index(std::floor(param));
    if (extra == 0) return cloud;
    RowVector lo = cloud.pts.colwise().minCoeff();
    RowVector hi = cloud.pts.colwise().maxCoeff();
    CounterRng rng(seed);
    Matrix out(cloud.size() + extra, cloud.dim());
    out.topRows(cloud.size()) = cloud.pts;
    for (Eigen::Index i = 0; i < extra; ++i)
      for (Eigen::Index j = 0; j < cloud.dim(); ++j)
        out(cloud.size() + i, j) = rng.uniform(lo(j), hi(j));
    return PointCloud(std::move(out));
  }
  auto kept = plane_crop_indices(cloud, param, seed);
  Matrix out(Eigen::Index(kept.size()), cloud.dim());
  for (std::size_t i = 0; i < kept.size(); ++i)
    out.row(Eigen::Index(i)) = cloud.pts.row(kept[i]);
  return PointCloud(std::move(out));
}

PointCloud synthesize_deformation(const PointCloud& cloud, Scalar lambda, Scalar rho,
                                  Scalar noise_sigma, int k, std::uint64_t seed) {
  if (!(lambda > 0)) throw std::invalid_argument("synthesize_deformation: lambda must be > 0");
  if (noise_sigma < 0)
    throw std::invalid_argument("synthesize_deformation: noise_sigma must be >= 0");
  if (k > cloud.size())
    throw std::invalid_argument("synthesize_deformation: landmark count exceeds point count");

  NystromFactor f = build_nystrom(cloud, rho, k, seed);
  CounterRng rng(seed + 0x51ED2701ull);
  Matrix u = rng.normal_matrix(f.lambda.size(), cloud.dim());
  // Per-coordinate covariance of V is lambda^{-1} Q diag(l) Q^T ~= lambda^{-1} G.
  Matrix v = (f.Q * f.lambda.cwiseSqrt().asDiagonal() * u) / std::sqrt(lambda);
  Matrix out = cloud.pts + v;
  if (noise_sigma > 0) out += noise_sigma * rng.normal_matrix(cloud.size(), cloud.dim());
  return PointCloud(std::move(out));
}

PointCloud sample_surface(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_surface: need at least 1 point");
  CounterRng rng(seed);
  Matrix pts(n, 3);
  for (int i = 0; i < n; ++i) {
    Scalar u = rng.uniform(-1.5, 1.5);
    Scalar v = rng.uniform(-1.5, 1.5);
    pts(i, 0) = u;
    pts(i, 1) = v;
    pts(i, 2) = 0.45 * std::sin(1.9 * u) * std::cos(1.4 * v) + 0.25 * std::sin(2.6 * (u + v));
  }
  return PointCloud(std::move(pts));
}

Scalar mean_nn_distance(const PointCloud& cloud) {
  const Eigen::Index n = cloud.size();
  if (n < 2) throw std::invalid_argument("mean_nn_distance: need at least 2 points");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      best = std::min(best, (cloud.pts.row(i) - cloud.pts.row(j)).norm());
    }
    total += best;
  }
  return total / Scalar(n);
}

}  // namespace pwreg
