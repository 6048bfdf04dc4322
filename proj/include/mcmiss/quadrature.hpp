#pragma once

// Gauss-Hermite quadrature normalized to the standard-normal weight:
//   sum_i w_i g(x_i)  ~=  integral g(x) phi(x) dx,
// exact for polynomials of degree <= 2n-1. Nodes are symmetric about 0 and
// the weights sum to 1.

#include <vector>

namespace mcmiss {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr int kDefaultQuadratureOrder = 40;

// Nodes/weights computed by Newton iteration on the orthonormal Hermite
// recurrence; throws std::invalid_argument unless 1 <= n <= 200.
QuadratureRule gauss_hermite(int n);

}  // namespace mcmiss
