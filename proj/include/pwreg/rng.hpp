#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "pwreg/types.hpp"

namespace pwreg {

/// Counter-based deterministic generator: draw i of stream `seed` is the
/// SplitMix64 mix of seed + (i+1)*golden, a pure function of (seed, i).
/// Identical sequences on every platform; no hidden distribution state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  Scalar next_unit() { return Scalar(next_u64() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * next_unit(); }

  /// Standard normal via Box-Muller (two uniforms per draw, cosine branch).
  Scalar next_normal() {
    Scalar u1 = Scalar((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    Scalar u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    std::size_t i = std::size_t(next_unit() * Scalar(n));
    return i < n ? i : n - 1;
  }

  /// k distinct indices from [0, n), ascending order.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
      std::size_t j = i + index(std::size_t(n - i));
      std::swap(pool[std::size_t(i)], pool[j]);
    }
    pool.resize(std::size_t(k));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = next_normal();
    return m;
  }

  Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, Scalar lo, Scalar hi) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
    return m;
  }

  /// Uniform direction on the unit sphere in R^d.
  RowVector unit_direction(Eigen::Index d) {
    RowVector v(d);
    do {
      for (Eigen::Index i = 0; i < d; ++i) v(i) = next_normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace pwreg
