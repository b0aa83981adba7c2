#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pwreg/discrepancy.hpp"
#include "support/checks.hpp"
#include "support/random_measures.hpp"

using namespace pwreg;
using testutil::contains;
using testutil::thrown_message;

namespace {

// Straight-line re-transcription of the two density discrepancies, kept
// deliberately naive (per-pair loops) as a second implementation.
Scalar phi(const RowVector& diff, Scalar variance) {
  const Scalar d = Scalar(diff.size());
  return std::pow(2 * std::numbers::pi * variance, -d / 2) *
         std::exp(-diff.squaredNorm() / (2 * variance));
}

Scalar kl_reference(const PointCloud& x, const PointCloud& y, Scalar sigma, Scalar omega) {
  const Scalar q = Scalar(x.size()), r = Scalar(y.size());
  Scalar acc = 0;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    Scalar mix = omega / q;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      mix += (1 - omega) * phi(y.pts.row(j) - x.pts.row(i), sigma) / r;
    acc += std::log(mix);
  }
  return -acc / q;
}

Scalar l2_reference(const PointCloud& x, const PointCloud& y, Scalar sigma) {
  const Scalar q = Scalar(x.size()), r = Scalar(y.size());
  Scalar xx = 0, yy = 0, xy = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = 0; j < x.size(); ++j)
      xx += phi(x.pts.row(i) - x.pts.row(j), 2 * sigma);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    for (Eigen::Index j = 0; j < y.size(); ++j)
      yy += phi(y.pts.row(i) - y.pts.row(j), 2 * sigma);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = 0; j < y.size(); ++j)
      xy += phi(x.pts.row(i) - y.pts.row(j), 2 * sigma);
  return xx / (q * q) + yy / (r * r) - 2 * xy / (q * r);
}

PointCloud translated(const PointCloud& y, Scalar t) {
  PointCloud out = y;
  out.pts.array() += t;
  return out;
}

}  // namespace

TEST_CASE("single coincident pair closed form") {
  PointCloud p;
  p.pts = Matrix::Zero(1, 1);
  const Scalar omega = 0.2;
  const Scalar expected =
      -std::log(omega + (1 - omega) / std::sqrt(2 * std::numbers::pi));
  CHECK(kl_divergence(p, p, 1.0, omega) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("kl saturates monotonically as the sets separate") {
  ToyPair toy = make_toy_pair(0);  // ten shared data points, no outliers
  const Scalar limit = -std::log(0.2 / 10.0);
  Scalar prev = -1e300;
  // Shifts small enough that the nearest cross pair still contributes above
  // the floating-point floor set by the omega/q mixture term.
  for (Scalar t : {4.0, 5.5, 7.0, 8.5, 10.0}) {
    const Scalar v = kl_divergence(toy.x, translated(toy.y, t));
    CHECK(v > prev);
    CHECK(v < limit);
    prev = v;
  }
  CHECK(kl_divergence(toy.x, translated(toy.y, 40.0)) ==
        doctest::Approx(limit).epsilon(1e-9));
}

TEST_CASE("density discrepancies bias toward the outlier clump") {
  ToyPair toy = make_toy_pair(1000);
  CHECK(kl_divergence(toy.x, translated(toy.y, 6.5)) <
        kl_divergence(toy.x, translated(toy.y, 0.0)));
  CHECK(l2_distance(toy.x, translated(toy.y, 6.5)) <
        l2_distance(toy.x, translated(toy.y, 0.0)));
}

TEST_CASE("l2 vanishes on identical sets and is symmetric") {
  PointCloud x = testutil::random_cloud(12, 2, 1);
  CHECK(std::abs(l2_distance(x, x)) < 1e-15);
  PointCloud y = testutil::random_cloud(9, 2, 2);
  CHECK(l2_distance(x, y) == doctest::Approx(l2_distance(y, x)).epsilon(1e-12));
}

TEST_CASE("both discrepancies match an independent re-transcription") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int dim = 1 + int(seed % 3);
    PointCloud x = testutil::random_cloud(3 + Eigen::Index(seed % 9), dim, seed * 7 + 1, 2.0);
    PointCloud y = testutil::random_cloud(4 + Eigen::Index(seed % 7), dim, seed * 11 + 2, 2.0);
    const Scalar sigma = 0.5 + 0.9 * Scalar(seed % 3);
    const Scalar omega = 0.35 * Scalar(seed % 3);
    const Scalar kl = kl_divergence(x, y, sigma, omega);
    const Scalar kl_ref = kl_reference(x, y, sigma, omega);
    CHECK(std::abs(kl - kl_ref) <= 1e-12 * (1 + std::abs(kl_ref)));
    const Scalar l2 = l2_distance(x, y, sigma);
    const Scalar l2_ref = l2_reference(x, y, sigma);
    CHECK(std::abs(l2 - l2_ref) <= 1e-12 * (1 + std::abs(l2_ref)));
  }
}

TEST_CASE("toy pair layout") {
  ToyPair toy = make_toy_pair(1);
  REQUIRE(toy.y.size() == 10);
  REQUIRE(toy.x.size() == 11);
  CHECK(toy.y.pts(0, 0) == 0.0);
  CHECK(toy.y.pts(9, 0) == 3.0);
  CHECK(toy.x.pts.topRows(10) == toy.y.pts);
  CHECK(toy.x.pts(10, 0) == 8.0);

  ToyPair many = make_toy_pair(3);
  CHECK(many.x.pts(10, 0) == doctest::Approx(7.8).epsilon(1e-15));
  CHECK(many.x.pts(12, 0) == doctest::Approx(8.2).epsilon(1e-15));
}

TEST_CASE("transport landscapes ignore the outlier count at zero shift") {
  Vector grid(2);
  grid << 0.0, 6.5;
  for (DiscrepancyKind kind : {DiscrepancyKind::pw_mass, DiscrepancyKind::pw_distance}) {
    DiscrepancySpec spec;
    spec.kind = kind;
    spec.threshold = kind == DiscrepancyKind::pw_mass ? 10.0 : 2.0;
    Scalar at_zero[3], at_bias[3];
    int c = 0;
    for (Eigen::Index n : {1, 10, 1000}) {
      ToyPair toy = make_toy_pair(n);
      LandscapeCurve curve = landscape_sweep(toy.x, toy.y, spec, grid);
      at_zero[c] = curve.values[0];
      at_bias[c] = curve.values[1];
      ++c;
    }
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(at_zero[i] - at_zero[0]) < 1e-9);
      CHECK(at_zero[i] < at_bias[i]);
    }
    if (kind == DiscrepancyKind::pw_mass) {
      CHECK(std::abs(at_zero[0]) < 1e-9);  // zero-cost matching of all 10 points
    } else {
      // every point pays 0 - h with h = 2
      CHECK(at_zero[0] == doctest::Approx(-20.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero shift is a strict local minimum of the bounded-distance sweep") {
  Vector grid(3);
  grid << -0.05, 0.0, 0.05;
  DiscrepancySpec spec;
  spec.kind = DiscrepancyKind::pw_distance;
  spec.threshold = 2.0;
  for (Eigen::Index n : {1, 10, 1000}) {
    ToyPair toy = make_toy_pair(n);
    LandscapeCurve curve = landscape_sweep(toy.x, toy.y, spec, grid);
    CHECK(curve.values[1] < curve.values[0]);
    CHECK(curve.values[1] < curve.values[2]);
  }
}

TEST_CASE("mass-type landscape keeps the correct minimum deep at full outlier load") {
  Vector grid(2);
  grid << 0.0, 6.5;
  DiscrepancySpec spec;
  spec.kind = DiscrepancyKind::pw_mass;
  spec.threshold = 10.0;
  ToyPair toy = make_toy_pair(1000);
  LandscapeCurve curve = landscape_sweep(toy.x, toy.y, spec, grid);
  CHECK(curve.values[0] < curve.values[1]);
}

TEST_CASE("default grid covers minus one to eight in 0.05 steps") {
  Vector grid = default_t_grid();
  REQUIRE(grid.size() == 181);
  CHECK(std::abs(grid[0] + 1.0) < 1e-12);
  CHECK(std::abs(grid[180] - 8.0) < 1e-12);
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    CHECK(grid[i] - grid[i - 1] == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("sweep input validation") {
  DiscrepancySpec spec;
  spec.kind = DiscrepancyKind::kl;
  PointCloud flat = testutil::random_cloud(5, 2, 3);
  PointCloud line = testutil::random_cloud(5, 1, 4);
  Vector grid(2);
  grid << 0.0, 1.0;
  CHECK(contains(thrown_message([&] { landscape_sweep(flat, flat, spec, grid); }), "1-D"));
  Vector bad(2);
  bad << 1.0, 0.0;
  CHECK(!thrown_message([&] { landscape_sweep(line, line, spec, bad); }).empty());
  CHECK(contains(thrown_message([&] { kl_divergence(line, line, 0.0); }), "sigma"));
  CHECK(contains(thrown_message([&] { kl_divergence(line, line, 1.0, 1.0); }), "omega"));
  CHECK(contains(thrown_message([&] { l2_distance(line, line, -1.0); }), "sigma"));
}

TEST_CASE("curve naming and csv export") {
  DiscrepancySpec spec;
  spec.kind = DiscrepancyKind::pw_mass;
  spec.threshold = 10.0;
  CHECK(discrepancy_name(spec) == "pw_mass(10)");
  spec.kind = DiscrepancyKind::pw_distance;
  spec.threshold = 2.0;
  CHECK(discrepancy_name(spec) == "pw_distance(2)");
  spec.kind = DiscrepancyKind::kl;
  CHECK(discrepancy_name(spec) == "kl");
  spec.kind = DiscrepancyKind::l2;
  CHECK(discrepancy_name(spec) == "l2");

  ToyPair toy = make_toy_pair(1);
  Vector grid(3);
  grid << 0.0, 0.5, 1.0;
  LandscapeCurve curve = landscape_sweep(toy.x, toy.y, spec, grid);
  testutil::TempDir dir("sweep_csv");
  save_curve_csv(curve, dir.file("curve.csv"));
  const std::string text = testutil::read_file(dir.file("curve.csv"));
  CHECK(contains(text, "t,l2"));
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);  // header + 3 rows
}
