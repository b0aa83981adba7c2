#include "pwreg/coherence.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pwreg/rng.hpp"

namespace pwreg {
namespace {

constexpr Eigen::Index kDenseCap = 4000;

Matrix cross_kernel(const Matrix& a, const Matrix& b, Scalar rho) {
  // ||a_i - b_j||^2 = |a_i|^2 + |b_j|^2 - 2 a_i.b_j
  Vector an = a.rowwise().squaredNorm();
  Vector bn = b.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * a * b.transpose()).colwise() + an;
  d2.rowwise() += bn.transpose();
  return (-d2.cwiseMax(0.0) / rho).array().exp();
}

}  // namespace

Matrix gaussian_kernel(const PointCloud& y, Scalar rho) {
  if (!(rho > 0)) throw std::invalid_argument("gaussian_kernel: rho must be > 0");
  if (y.size() > kDenseCap)
    throw std::invalid_argument("gaussian_kernel: dense kernel capped at 4000 points, got " +
                                std::to_string(y.size()));
  Matrix g = cross_kernel(y.pts, y.pts, rho);
  g = ((g + g.transpose()) / 2).eval();  // kill rounding asymmetry
  g.diagonal().setOnes();
  return g;
}

NystromFactor build_nystrom(const PointCloud& y, Scalar rho, int k, std::uint64_t seed) {
  if (!(rho > 0)) throw std::invalid_argument("build_nystrom: rho must be > 0");
  const int r = int(y.size());
  if (k < 1 || k > r)
    throw std::invalid_argument("build_nystrom: landmark count out of range [1, " +
                                std::to_string(r) + "]");
  CounterRng rng(seed);
  std::vector<int> picks = rng.sample_without_replacement(r, k);

  Matrix land(k, y.dim());
  for (int i = 0; i < k; ++i) land.row(i) = y.pts.row(picks[std::size_t(i)]);

  Matrix c = cross_kernel(y.pts, land, rho);   // r x k
  Matrix w = cross_kernel(land, land, rho);    // k x k
  w = ((w + w.transpose()) / 2).eval();
  w.diagonal().setOnes();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(w);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("build_nystrom: eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();  // ascending
  Scalar floor = 1e-10 * ev(k - 1);
  int kept = 0;
  for (int i = 0; i < k; ++i)
    if (ev(i) > floor) ++kept;
  if (kept == 0) throw std::runtime_error("build_nystrom: kernel block numerically rank 0");

  NystromFactor f;
  f.rho = rho;
  f.landmark_indices = std::move(picks);
  f.Q.resize(r, kept);
  f.lambda.resize(kept);
  for (int j = 0; j < kept; ++j) {
    int src = k - kept + j;  // keep the largest eigenvalues
    f.Q.col(j) = c * eig.eigenvectors().col(src);
    f.lambda(j) = 1.0 / ev(src);
  }
  return f;
}

Scalar coherence_energy(const Matrix& offsets, const PointCloud& y, Scalar rho,
                        Scalar sigma, Scalar lambda) {
  if (!(sigma > 0)) throw std::invalid_argument("coherence_energy: sigma must be > 0");
  if (lambda < 0) throw std::invalid_argument("coherence_energy: lambda must be >= 0");
  if (offsets.rows() != y.size() || offsets.cols() != y.dim())
    throw std::invalid_argument("coherence_energy: offsets shape mismatch");
  Matrix sys = gaussian_kernel(y, rho);
  sys.diagonal().array() += sigma;
  Matrix solved = Eigen::LDLT<Matrix>(sys).solve(offsets);
  return lambda * (offsets.array() * solved.array()).sum();
}

Matrix coherence_gradient(const Matrix& offsets, const NystromFactor& factor,
                          Scalar sigma, Scalar lambda) {
  if (!(sigma > 0)) throw std::invalid_argument("coherence_gradient: sigma must be > 0");
  if (offsets.rows() != factor.Q.rows())
    throw std::invalid_argument("coherence_gradient: offsets/factor shape mismatch");
  const Matrix& q = factor.Q;
  Matrix inner = (1.0 / factor.lambda.array()).matrix().asDiagonal();
  inner += (q.transpose() * q) / sigma;
  Matrix qv = q.transpose() * offsets;  // k x d
  Matrix mid = Eigen::LDLT<Matrix>(inner).solve(qv);
  return 2.0 * lambda * (offsets / sigma - (q * mid) / (sigma * sigma));
}

}  // namespace pwreg
