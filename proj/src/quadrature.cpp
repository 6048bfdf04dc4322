#include "mcmiss/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mcmiss {

namespace {

// Orthonormal Hermite polynomials for the N(0,1) weight:
//   p_0 = 1,  p_1 = x,  p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k+1).
// Returns p_n(x) and p_{n-1}(x); the derivative is p_n'(x) = sqrt(n) p_{n-1}.
struct HermitePair {
  double pn, pnm1;
};

HermitePair hermite_orthonormal(int n, double x) {
  double pkm1 = 0.0;
  double pk = 1.0;
  for (int k = 0; k < n; ++k) {
    const double pkp1 =
        (x * pk - std::sqrt(static_cast<double>(k)) * pkm1) /
        std::sqrt(static_cast<double>(k + 1));
    pkm1 = pk;
    pk = pkp1;
  }
  return {pk, pkm1};
}

// Christoffel weight: w_i = 1 / sum_{k=0}^{n-1} p_k(x_i)^2.
double christoffel_weight(int n, double x) {
  double pkm1 = 0.0;
  double pk = 1.0;
  double sum = pk * pk;
  for (int k = 0; k + 1 < n; ++k) {
    const double pkp1 =
        (x * pk - std::sqrt(static_cast<double>(k)) * pkm1) /
        std::sqrt(static_cast<double>(k + 1));
    pkm1 = pk;
    pk = pkp1;
    sum += pk * pk;
  }
  return 1.0 / sum;
}

}  // namespace

QuadratureRule gauss_hermite(int n) {
  if (n < 1 || n > 200)
    throw std::invalid_argument("gauss_hermite: order must lie in 1..200");

  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));

  // Positive roots: bracket sign changes of p_n on a grid finer than the
  // minimal root spacing (~pi/sqrt(n) near the origin), then polish each
  // bracket with a bisection-safeguarded Newton iteration. For odd n the
  // origin is a root by symmetry.
  const int half = n / 2;
  std::vector<double> roots;
  roots.reserve(static_cast<std::size_t>(half));
  const double bound = std::sqrt(2.0 * (2.0 * n + 1.0)) + 1.0;
  const double step0 = 3.141592653589793 /
                       (4.0 * std::sqrt(static_cast<double>(n) + 1.0));
  double scan_step = step0;
  for (int attempt = 0; attempt < 6 && static_cast<int>(roots.size()) != half;
       ++attempt, scan_step *= 0.5) {
    roots.clear();
    // Start just off the origin so the odd-n root at 0 is not re-counted.
    double lo = scan_step * 0.25;
    double flo = hermite_orthonormal(n, lo).pn;
    for (double hi = lo + scan_step; lo < bound; lo = hi, hi += scan_step) {
      const double fhi = hermite_orthonormal(n, hi).pn;
      if ((flo < 0.0) != (fhi < 0.0)) {
        double a = lo, b = hi, fa = flo;
        double z = 0.5 * (a + b);
        for (int it = 0; it < 200; ++it) {
          const HermitePair hp = hermite_orthonormal(n, z);
          const double deriv = std::sqrt(static_cast<double>(n)) * hp.pnm1;
          if ((hp.pn < 0.0) == (fa < 0.0))
            a = z;
          else
            b = z;
          double znew = z - hp.pn / deriv;
          if (!(znew > a && znew < b)) znew = 0.5 * (a + b);
          if (std::abs(znew - z) <= 1e-15 * (1.0 + std::abs(z))) {
            z = znew;
            break;
          }
          z = znew;
        }
        // Unguarded Newton polish to machine precision.
        for (int it = 0; it < 3; ++it) {
          const HermitePair hp = hermite_orthonormal(n, z);
          z -= hp.pn / (std::sqrt(static_cast<double>(n)) * hp.pnm1);
        }
        roots.push_back(z);
      }
      flo = fhi;
    }
  }
  if (static_cast<int>(roots.size()) != half)
    throw std::runtime_error("gauss_hermite: root bracketing failed");

  // Mirror to the full symmetric set, ascending order.
  std::size_t idx = 0;
  for (int i = half - 1; i >= 0; --i)
    rule.nodes[idx++] = -roots[static_cast<std::size_t>(i)];
  if (n % 2 == 1) rule.nodes[idx++] = 0.0;
  for (int i = 0; i < half; ++i)
    rule.nodes[idx++] = roots[static_cast<std::size_t>(i)];

  double wsum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = christoffel_weight(n, rule.nodes[static_cast<std::size_t>(i)]);
    rule.weights[static_cast<std::size_t>(i)] = w;
    wsum += w;
  }
  // Normalize away the last floating-point crumbs so the weights sum to 1.
  for (double& w : rule.weights) w /= wsum;

  // Enforce exact symmetry of mirrored weights.
  for (int i = 0; i < n / 2; ++i) {
    const double w = 0.5 * (rule.weights[static_cast<std::size_t>(i)] +
                            rule.weights[static_cast<std::size_t>(n - 1 - i)]);
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return rule;
}

}  // namespace mcmiss
