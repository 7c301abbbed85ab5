#include <atomic>
#include <cassert>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "gibbsbound/kernels.hpp"

namespace gibbs::kernels {
namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*relu)(const double*, double*, std::size_t);
  void (*relu_mask)(const double*, double*, std::size_t);
  void (*langevin_update)(double*, const double*, const double*, std::size_t,
                          double, double, double);
  double (*max_abs)(const double*, std::size_t);
  Backend backend;
};

constexpr Table kScalar{scalar::dot,       scalar::axpy,
                        scalar::relu,      scalar::relu_mask,
                        scalar::langevin_update, scalar::max_abs,
                        Backend::Scalar};

#if defined(GIBBSBOUND_HAVE_AVX2)
constexpr Table kAvx2{avx2::dot,       avx2::axpy,
                      avx2::relu,      avx2::relu_mask,
                      avx2::langevin_update, avx2::max_abs,
                      Backend::Avx2};
#endif

bool cpu_has_avx2() {
#if defined(GIBBSBOUND_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* initial_table() {
  const char* env = std::getenv("GIBBSBOUND_KERNELS");
  const std::string choice = env ? env : "auto";
  if (choice == "scalar") return &kScalar;
#if defined(GIBBSBOUND_HAVE_AVX2)
  if (cpu_has_avx2()) return &kAvx2;
#endif
  return &kScalar;
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> table{initial_table()};
  return table;
}

const Table& table() { return *current().load(std::memory_order_relaxed); }

}  // namespace

bool avx2_available() { return cpu_has_avx2(); }

Backend active_backend() { return table().backend; }

void set_backend(Backend backend) {
  if (backend == Backend::Scalar) {
    current().store(&kScalar);
    return;
  }
#if defined(GIBBSBOUND_HAVE_AVX2)
  if (cpu_has_avx2()) {
    current().store(&kAvx2);
    return;
  }
#endif
  throw std::runtime_error("AVX2 kernels are not available on this CPU/build");
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::Avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return table().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  table().axpy(alpha, x.data(), y.data(), x.size());
}

void relu(std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  table().relu(x.data(), y.data(), x.size());
}

void relu_mask(std::span<const double> pre, std::span<double> delta) {
  assert(pre.size() == delta.size());
  table().relu_mask(pre.data(), delta.data(), pre.size());
}

void langevin_update(std::span<double> h, std::span<const double> grad,
                     std::span<const double> noise, double step, double shrink,
                     double noise_scale) {
  assert(h.size() == grad.size() && h.size() == noise.size());
  table().langevin_update(h.data(), grad.data(), noise.data(), h.size(), step,
                          shrink, noise_scale);
}

double max_abs(std::span<const double> x) {
  return table().max_abs(x.data(), x.size());
}

}  // namespace gibbs::kernels
