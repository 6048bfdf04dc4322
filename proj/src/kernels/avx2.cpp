#include "mcmiss/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>
#include <cstddef>
#include <cstdint>

// AVX2 (4-wide double) kernels. exp and log use Cephes-style rational
// approximations (~1-2 ulp over the reduced range); tails fall back to the
// scalar path so the saturation contract matches the reference exactly.

namespace mcmiss::kernels::detail {
namespace {

// ---- vector exp -----------------------------------------------------------
// exp(x) = 2^n * expm(r), r = x - n*ln2 with n = floor(x*log2e + 1/2).
// expm(r) = 1 + 2*r*P(r^2) / (Q(r^2) - r*P(r^2)) on |r| <= ln2/2.

constexpr double kLog2E = 1.4426950408889634073599;
constexpr double kC1 = 6.93145751953125e-1;          // ln2 high part
constexpr double kC2 = 1.42860682030941723212e-6;    // ln2 low part

constexpr double kExpP0 = 1.26177193074810590878e-4;
constexpr double kExpP1 = 3.02994407707441961300e-2;
constexpr double kExpP2 = 9.99999999999999999910e-1;
constexpr double kExpQ0 = 3.00198505138664455042e-6;
constexpr double kExpQ1 = 2.52448340349684104192e-3;
constexpr double kExpQ2 = 2.27265548208155028766e-1;
constexpr double kExpQ3 = 2.00000000000000000005e0;

inline __m256d exp4(__m256d x) {
  const __m256d hi_mask = _mm256_cmp_pd(x, _mm256_set1_pd(kExpOverflow), _CMP_GE_OQ);
  const __m256d lo_mask = _mm256_cmp_pd(x, _mm256_set1_pd(kExpUnderflow), _CMP_LE_OQ);
  // Clamp so the exponent arithmetic below stays in range; masked lanes are
  // overwritten at the end.
  x = _mm256_max_pd(_mm256_min_pd(x, _mm256_set1_pd(kExpOverflow)),
                    _mm256_set1_pd(kExpUnderflow));

  __m256d n = _mm256_floor_pd(
      _mm256_fmadd_pd(x, _mm256_set1_pd(kLog2E), _mm256_set1_pd(0.5)));
  x = _mm256_fnmadd_pd(n, _mm256_set1_pd(kC1), x);
  x = _mm256_fnmadd_pd(n, _mm256_set1_pd(kC2), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(kExpP0);
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(kExpP1));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(kExpP2));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(kExpQ0);
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(kExpQ1));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(kExpQ2));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(kExpQ3));

  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  // Scale by 2^n via direct exponent construction; n is in [-1022, 1024)
  // after the clamp, so the biased exponent is always a normal one.
  const __m128i n32 = _mm256_cvtpd_epi32(n);
  const __m256i n64 = _mm256_cvtepi32_epi64(n32);
  const __m256i bias = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(bias, 52));
  e = _mm256_mul_pd(e, scale);

  e = _mm256_blendv_pd(e, _mm256_set1_pd(HUGE_VAL), hi_mask);
  e = _mm256_blendv_pd(e, _mm256_setzero_pd(), lo_mask);
  return e;
}

// ---- vector log -----------------------------------------------------------
// x = m * 2^e with m in [sqrt(1/2), sqrt(2)); log(x) = polynomial(m-1) + e*ln2.

constexpr double kSqrtHalf = 0.70710678118654752440;

constexpr double kLogP0 = 1.01875663804580931796e-4;
constexpr double kLogP1 = 4.97494994976747001425e-1;
constexpr double kLogP2 = 4.70579119878881725854e0;
constexpr double kLogP3 = 1.44989225341610930846e1;
constexpr double kLogP4 = 1.79368678507819816313e1;
constexpr double kLogP5 = 7.70838733755885391666e0;
constexpr double kLogQ0 = 1.12873587189167450590e1;
constexpr double kLogQ1 = 4.52279145837532221105e1;
constexpr double kLogQ2 = 8.29875266912776603211e1;
constexpr double kLogQ3 = 7.11544750618563894466e1;
constexpr double kLogQ4 = 2.31251620126765340583e1;

inline __m256d log4(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
  __m256i e64 = _mm256_sub_epi64(
      _mm256_and_si256(exp_bits, _mm256_set1_epi64x(0x7FF)),
      _mm256_set1_epi64x(1022));

  // Mantissa in [0.5, 1): clear the exponent field, install 2^-1.
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i half_exp = _mm256_set1_epi64x(0x3FE0000000000000LL);
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mant_mask), half_exp));

  // If m < sqrt(1/2), use 2m and decrement the exponent.
  const __m256d low = _mm256_cmp_pd(m, _mm256_set1_pd(kSqrtHalf), _CMP_LT_OQ);
  m = _mm256_blendv_pd(m, _mm256_add_pd(m, m), low);
  // The comparison mask is all-ones (-1) per true lane; adding it decrements.
  e64 = _mm256_add_epi64(e64, _mm256_castpd_si256(low));
  // Convert the packed 64-bit exponents to doubles lane by lane.
  alignas(32) std::int64_t etmp[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(etmp), e64);
  const __m256d e = _mm256_set_pd(static_cast<double>(etmp[3]),
                                  static_cast<double>(etmp[2]),
                                  static_cast<double>(etmp[1]),
                                  static_cast<double>(etmp[0]));

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d xm = _mm256_sub_pd(m, one);
  const __m256d z = _mm256_mul_pd(xm, xm);

  __m256d p = _mm256_set1_pd(kLogP0);
  p = _mm256_fmadd_pd(p, xm, _mm256_set1_pd(kLogP1));
  p = _mm256_fmadd_pd(p, xm, _mm256_set1_pd(kLogP2));
  p = _mm256_fmadd_pd(p, xm, _mm256_set1_pd(kLogP3));
  p = _mm256_fmadd_pd(p, xm, _mm256_set1_pd(kLogP4));
  p = _mm256_fmadd_pd(p, xm, _mm256_set1_pd(kLogP5));
  __m256d q = _mm256_add_pd(xm, _mm256_set1_pd(kLogQ0));
  q = _mm256_fmadd_pd(q, xm, _mm256_set1_pd(kLogQ1));
  q = _mm256_fmadd_pd(q, xm, _mm256_set1_pd(kLogQ2));
  q = _mm256_fmadd_pd(q, xm, _mm256_set1_pd(kLogQ3));
  q = _mm256_fmadd_pd(q, xm, _mm256_set1_pd(kLogQ4));

  __m256d y = _mm256_mul_pd(_mm256_mul_pd(xm, z), _mm256_div_pd(p, q));
  y = _mm256_fnmadd_pd(e, _mm256_set1_pd(2.121944400546905827679e-4), y);
  y = _mm256_fnmadd_pd(_mm256_set1_pd(0.5), z, y);
  __m256d r = _mm256_add_pd(y, xm);
  r = _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), r);
  return r;
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double exp_sat(double t) {
  if (t >= kExpOverflow) return HUGE_VAL;
  if (t <= kExpUnderflow) return 0.0;
  return std::exp(t);
}

void exp_batch_avx2(const double* x, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = exp_sat(x[i]);
}

void log_batch_avx2(const double* x, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, log4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = std::log(x[i]);
}

void logistic_affine_avx2(double a, double b, const double* x, std::size_t n,
                          double* out) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vb);
    const __m256d e = exp4(t);
    _mm256_storeu_pd(out + i, _mm256_div_pd(one, _mm256_add_pd(one, e)));
  }
  for (; i < n; ++i) out[i] = 1.0 / (1.0 + exp_sat(a * x[i] + b));
}

double weighted_logistic_sum_avx2(double a, double b, const double* x,
                                  const double* w, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vb);
    const __m256d e = exp4(t);
    const __m256d s = _mm256_div_pd(_mm256_loadu_pd(w + i),
                                    _mm256_add_pd(one, e));
    acc = _mm256_add_pd(acc, s);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += w[i] / (1.0 + exp_sat(a * x[i] + b));
  return hsum(acc) + tail;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return hsum(acc) + tail;
}

}  // namespace

const Ops avx2_ops = {
    exp_batch_avx2,
    log_batch_avx2,
    logistic_affine_avx2,
    weighted_logistic_sum_avx2,
    dot_avx2,
};

}  // namespace mcmiss::kernels::detail

#endif  // x86
