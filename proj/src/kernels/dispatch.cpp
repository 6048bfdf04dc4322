#include <atomic>
#include <cstdlib>
#include <cstring>
#include <span>
#include <string>

#include "mcmiss/kernels.hpp"

namespace mcmiss::kernels {
namespace {

using detail::Ops;

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const Ops* ops_for(Backend b) {
#if defined(__x86_64__) || defined(__i386__)
  if (b == Backend::avx2) return &detail::avx2_ops;
#endif
  (void)b;
  return &detail::scalar_ops;
}

Backend detect_backend() {
  if (const char* env = std::getenv("MCMISS_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::avx2;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

struct State {
  std::atomic<const Ops*> ops;
  std::atomic<Backend> backend;
  State() {
    const Backend b = detect_backend();
    backend.store(b, std::memory_order_relaxed);
    ops.store(ops_for(b), std::memory_order_relaxed);
  }
};

State& state() {
  static State s;
  return s;
}

inline const Ops& ops() { return *state().ops.load(std::memory_order_relaxed); }

}  // namespace

Backend active_backend() {
  return state().backend.load(std::memory_order_relaxed);
}

bool avx2_supported() { return cpu_has_avx2(); }

bool set_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2()) return false;
  state().backend.store(b, std::memory_order_relaxed);
  state().ops.store(ops_for(b), std::memory_order_relaxed);
  return true;
}

std::string backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

void exp_batch(std::span<const double> x, std::span<double> out) {
  ops().exp_batch(x.data(), x.size(), out.data());
}

void log_batch(std::span<const double> x, std::span<double> out) {
  ops().log_batch(x.data(), x.size(), out.data());
}

void logistic_affine_batch(double a, double b, std::span<const double> x,
                           std::span<double> out) {
  ops().logistic_affine_batch(a, b, x.data(), x.size(), out.data());
}

double weighted_logistic_sum(double a, double b, std::span<const double> x,
                             std::span<const double> w) {
  return ops().weighted_logistic_sum(a, b, x.data(), w.data(), x.size());
}

double dot(std::span<const double> x, std::span<const double> y) {
  return ops().dot(x.data(), y.data(), x.size());
}

}  // namespace mcmiss::kernels
