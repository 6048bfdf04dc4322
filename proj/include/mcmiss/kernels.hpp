#pragma once

// Batched arithmetic kernels behind the likelihood hot loops.
//
// Every operation has a scalar reference implementation and, on x86-64
// hosts with AVX2, a 4-wide vector implementation. The backend is chosen
// once at runtime (CPU detection, overridable via the MCMISS_KERNELS
// environment variable or set_backend()); both backends satisfy the same
// saturation contract so results are reproducible for a fixed backend.
//
// Saturation contract for exp-based kernels:
//   t >= kExpOverflow  -> exp(t) = +inf  (logistic -> 0)
//   t <= kExpUnderflow -> exp(t) = 0     (logistic -> 1)
// log_batch is defined for positive normal doubles only; callers clamp.

#include <cstddef>
#include <span>
#include <string>

namespace mcmiss::kernels {

inline constexpr double kExpOverflow = 709.0;
inline constexpr double kExpUnderflow = -708.0;

enum class Backend { scalar, avx2 };

// Backend currently used by the free functions below.
Backend active_backend();

// Force a backend. Returns false (and leaves the backend unchanged) if the
// requested backend is not supported on this CPU.
bool set_backend(Backend b);

bool avx2_supported();

std::string backend_name(Backend b);

// out[i] = exp(x[i]) under the saturation contract.
void exp_batch(std::span<const double> x, std::span<double> out);

// out[i] = log(x[i]); x[i] must be a positive normal double.
void log_batch(std::span<const double> x, std::span<double> out);

// out[i] = 1 / (1 + exp(a*x[i] + b)).
void logistic_affine_batch(double a, double b, std::span<const double> x,
                           std::span<double> out);

// sum_i w[i] / (1 + exp(a*x[i] + b)); the quadrature inner loop.
double weighted_logistic_sum(double a, double b, std::span<const double> x,
                             std::span<const double> w);

// sum_i x[i] * y[i].
double dot(std::span<const double> x, std::span<const double> y);

namespace detail {

struct Ops {
  void (*exp_batch)(const double*, std::size_t, double*);
  void (*log_batch)(const double*, std::size_t, double*);
  void (*logistic_affine_batch)(double, double, const double*, std::size_t,
                                double*);
  double (*weighted_logistic_sum)(double, double, const double*, const double*,
                                  std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
};

extern const Ops scalar_ops;
#if defined(__x86_64__) || defined(__i386__)
extern const Ops avx2_ops;
#endif

}  // namespace detail

}  // namespace mcmiss::kernels
