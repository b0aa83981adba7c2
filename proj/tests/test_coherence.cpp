#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "pwreg/coherence.hpp"
#include "pwreg/serialize.hpp"
#include "support/checks.hpp"
#include "support/random_measures.hpp"

using namespace pwreg;

namespace {

Matrix low_rank(const NystromFactor& f) {
  return f.Q * f.lambda.asDiagonal() * f.Q.transpose();
}

Scalar dense_energy(const Matrix& v, const PointCloud& y, Scalar rho, Scalar sigma,
                    Scalar lambda) {
  Matrix g = gaussian_kernel(y, rho);
  Matrix m = sigma * Matrix::Identity(g.rows(), g.cols()) + g;
  return lambda * (v.transpose() * m.inverse() * v).trace();
}

}  // namespace

TEST_CASE("gaussian kernel closed-form entries") {
  PointCloud one = testutil::random_cloud(1, 3, 1);
  Matrix g1 = gaussian_kernel(one, 2.0);
  REQUIRE(g1.rows() == 1);
  CHECK(g1(0, 0) == 1.0);

  const Scalar rho = 1.7;
  PointCloud two;
  two.pts = Matrix(2, 1);
  two.pts << 0.0, std::sqrt(rho);
  Matrix g2 = gaussian_kernel(two, rho);
  CHECK(g2(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(g2(1, 0) == g2(0, 1));
  CHECK(g2(0, 0) == 1.0);
}

TEST_CASE("gaussian kernel is symmetric positive semidefinite") {
  PointCloud cloud = testutil::random_cloud(50, 3, 5);
  Matrix g = gaussian_kernel(cloud, 2.0);
  CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  CHECK(eig.eigenvalues().minCoeff() > -1e-10);
  CHECK(g.maxCoeff() <= 1.0);
  CHECK(g.minCoeff() > 0.0);
}

TEST_CASE("full-rank factorization reproduces the kernel") {
  PointCloud cloud = testutil::random_cloud(30, 2, 7);
  NystromFactor f = build_nystrom(cloud, 2.0, 30, 3);
  Matrix g = gaussian_kernel(cloud, 2.0);
  CHECK((low_rank(f) - g).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rank-one factor stays inside the kernel range") {
  PointCloud cloud = testutil::random_cloud(20, 2, 9);
  NystromFactor f = build_nystrom(cloud, 2.0, 1, 4);
  Matrix approx = low_rank(f);
  CHECK(approx.maxCoeff() <= 1.0 + 1e-12);
  CHECK(approx.minCoeff() > 0.0);
}

TEST_CASE("a tenth of the landmarks suffices on a smooth curve") {
  const int n = 500;
  Matrix pts(n, 2);
  for (int i = 0; i < n; ++i) {
    const Scalar t = 3.0 * Scalar(i) / Scalar(n - 1);
    pts(i, 0) = t;
    pts(i, 1) = std::sin(t);
  }
  PointCloud curve{std::move(pts)};
  Matrix g = gaussian_kernel(curve, 2.0);
  NystromFactor f = build_nystrom(curve, 2.0, 50, 11);
  CHECK((low_rank(f) - g).norm() / g.norm() < 0.05);
}

TEST_CASE("coherence energy closed forms") {
  PointCloud one = testutil::random_cloud(1, 3, 13);
  Matrix v(1, 3);
  v << 0.3, -0.2, 0.7;
  const Scalar sigma = 0.4, lambda = 2.5;
  CHECK(coherence_energy(Matrix::Zero(1, 3), one, 2.0, sigma, lambda) == 0.0);
  CHECK(coherence_energy(v, one, 2.0, sigma, lambda) ==
        doctest::Approx(lambda * v.squaredNorm() / (sigma + 1.0)).epsilon(1e-12));
}

TEST_CASE("coherence energy matches an independent dense solve") {
  PointCloud cloud = testutil::random_cloud(40, 3, 15);
  CounterRng rng(16);
  Matrix v = rng.normal_matrix(40, 3);
  const Scalar got = coherence_energy(v, cloud, 2.0, 0.1, 0.01);
  const Scalar want = dense_energy(v, cloud, 2.0, 0.1, 0.01);
  CHECK(std::abs(got - want) / std::abs(want) < 1e-10);
}

TEST_CASE("woodbury gradient equals the dense gradient at full rank") {
  PointCloud cloud = testutil::random_cloud(25, 2, 17);
  CounterRng rng(18);
  Matrix v = rng.normal_matrix(25, 2);
  const Scalar sigma = 0.1, lambda = 0.01, rho = 2.0;
  NystromFactor f = build_nystrom(cloud, rho, 25, 5);
  CHECK(coherence_gradient(Matrix::Zero(25, 2), f, sigma, lambda).cwiseAbs().maxCoeff() ==
        0.0);
  Matrix got = coherence_gradient(v, f, sigma, lambda);
  Matrix g = gaussian_kernel(cloud, rho);
  Matrix m = sigma * Matrix::Identity(25, 25) + g;
  Matrix want = 2 * lambda * m.inverse() * v;
  CHECK((got - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("woodbury gradient matches finite differences of the energy") {
  PointCloud cloud = testutil::random_cloud(20, 2, 19);
  CounterRng rng(20);
  Matrix v = rng.normal_matrix(20, 2);
  const Scalar sigma = 0.15, lambda = 0.02, rho = 2.0;
  NystromFactor f = build_nystrom(cloud, rho, 20, 6);
  Matrix grad = coherence_gradient(v, f, sigma, lambda);
  const Scalar eps = 1e-6;
  Matrix fd(20, 2);
  for (Eigen::Index i = 0; i < 20; ++i) {
    for (Eigen::Index c = 0; c < 2; ++c) {
      Matrix hi = v, lo = v;
      hi(i, c) += eps;
      lo(i, c) -= eps;
      fd(i, c) = (dense_energy(hi, cloud, rho, sigma, lambda) -
                  dense_energy(lo, cloud, rho, sigma, lambda)) /
                 (2 * eps);
    }
  }
  CHECK((grad - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("coherence energy is nonnegative across random draws") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int n = 5 + int(seed % 20);
    const int dim = 1 + int(seed % 3);
    PointCloud cloud = testutil::random_cloud(n, dim, seed + 300);
    CounterRng rng(seed + 600);
    Matrix v = rng.normal_matrix(n, dim) * (0.1 + Scalar(seed % 5));
    const Scalar energy =
        coherence_energy(v, cloud, 0.5 + Scalar(seed % 4), 0.05 + 0.1 * Scalar(seed % 3),
                         0.001 + 0.01 * Scalar(seed % 7));
    CHECK(energy >= 0.0);
  }
}

TEST_CASE("factorization error shrinks with more landmarks on average") {
  PointCloud cloud = testutil::random_cloud(150, 3, 23);
  Matrix g = gaussian_kernel(cloud, 2.0);
  const int ks[] = {5, 15, 40, 150};
  Scalar prev = 1e300;
  for (int k : ks) {
    Scalar mean_err = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      NystromFactor f = build_nystrom(cloud, 2.0, k, seed);
      mean_err += (low_rank(f) - g).norm() / g.norm();
    }
    mean_err /= 5;
    CHECK(mean_err <= prev + 1e-12);
    prev = mean_err;
  }
}

TEST_CASE("coincident landmarks do not blow up the factor") {
  Matrix pts(6, 2);
  pts << 0, 0, 0, 0, 1, 1, 1, 1, 2, 0, 2, 0;  // three doubled locations
  PointCloud cloud{std::move(pts)};
  NystromFactor f = build_nystrom(cloud, 2.0, 6, 2);
  CHECK(f.Q.allFinite());
  CHECK(f.lambda.allFinite());
  CounterRng rng(77);
  Matrix v = rng.normal_matrix(6, 2);
  CHECK(coherence_gradient(v, f, 0.1, 0.01).allFinite());
}

TEST_CASE("factor round-trips through json") {
  PointCloud cloud = testutil::random_cloud(12, 2, 29);
  NystromFactor f = build_nystrom(cloud, 2.0, 7, 8);
  const std::string text = nystrom_to_json(f);
  NystromFactor back = nystrom_from_json(text);
  CHECK(back.Q == f.Q);
  CHECK(back.lambda == f.lambda);
  CHECK(back.rho == f.rho);
  CHECK(back.landmark_indices == f.landmark_indices);
  CHECK(nystrom_to_json(back) == text);
}
