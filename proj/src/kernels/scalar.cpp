#include <cmath>
#include <cstddef>

#include "mcmiss/kernels.hpp"

// Scalar reference kernels. These define the semantics the vector backends
// are equivalence-tested against.

namespace mcmiss::kernels::detail {
namespace {

inline double exp_sat(double t) {
  if (t >= kExpOverflow) return HUGE_VAL;
  if (t <= kExpUnderflow) return 0.0;
  return std::exp(t);
}

void exp_batch_scalar(const double* x, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = exp_sat(x[i]);
}

void log_batch_scalar(const double* x, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}

void logistic_affine_scalar(double a, double b, const double* x, std::size_t n,
                            double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double e = exp_sat(a * x[i] + b);
    out[i] = 1.0 / (1.0 + e);
  }
}

double weighted_logistic_sum_scalar(double a, double b, const double* x,
                                    const double* w, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = exp_sat(a * x[i] + b);
    acc += w[i] / (1.0 + e);
  }
  return acc;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

}  // namespace

const Ops scalar_ops = {
    exp_batch_scalar,
    log_batch_scalar,
    logistic_affine_scalar,
    weighted_logistic_sum_scalar,
    dot_scalar,
};

}  // namespace mcmiss::kernels::detail
