#pragma once

#include <cstdint>
#include <vector>

#include "pwreg/types.hpp"

namespace pwreg {

/// Low-rank kernel factorization G ~= Q diag(lambda) Q^T.
struct NystromFactor {
  Matrix Q;                         // r x k'
  Vector lambda;                    // k' (k' <= requested k after eigen floor)
  Scalar rho = 0;                   // kernel bandwidth the factor was built with
  std::vector<int> landmark_indices;
};

/// Dense Gaussian kernel G(i,j) = exp(-||y_i - y_j||^2 / rho).
/// Symmetric with unit diagonal. Dense materialization capped at 4000 points.
Matrix gaussian_kernel(const PointCloud& y, Scalar rho);

/// Nystrom factorization from k landmarks drawn uniformly without
/// replacement: with C = G(:,S) and G(S,S) = U diag(w) U^T, returns
/// Q = C U and lambda = 1/w, dropping eigenvalues below 1e-10 * max.
NystromFactor build_nystrom(const PointCloud& y, Scalar rho, int k, std::uint64_t seed);

/// Smoothness energy lambda * Tr(V^T (sigma I + G)^{-1} V), computed on the
/// dense kernel. Reference path for tests; capped at 4000 points.
Scalar coherence_energy(const Matrix& offsets, const PointCloud& y, Scalar rho,
                        Scalar sigma, Scalar lambda);

/// Woodbury gradient of the energy:
///   2*lambda * (sigma^{-1} V - sigma^{-2} Q (diag(1/lambda) + sigma^{-1} Q^T Q)^{-1} Q^T V).
/// Cost linear in the point count for fixed factor rank.
Matrix coherence_gradient(const Matrix& offsets, const NystromFactor& factor,
                          Scalar sigma, Scalar lambda);

}  // namespace pwreg
