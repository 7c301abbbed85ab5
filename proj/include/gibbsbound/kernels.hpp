#pragma once

// Dense inner loops shared by the network and the Langevin update.
//
// Each kernel has a portable scalar reference and, on x86-64, an AVX2
// variant. The active backend is picked once at startup from the CPU
// features (override with GIBBSBOUND_KERNELS=scalar|avx2) and can be
// switched with set_backend(). Elementwise kernels are bit-identical across
// backends; reductions agree up to summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace gibbs::kernels {

enum class Backend { Scalar, Avx2 };

bool avx2_available();
Backend active_backend();
/// Throws std::runtime_error if the backend is not supported on this CPU.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

/// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// y[i] = max(x[i], 0)
void relu(std::span<const double> x, std::span<double> y);

/// delta[i] = 0 wherever pre[i] <= 0
void relu_mask(std::span<const double> pre, std::span<double> delta);

/// h[i] = h[i] - step * grad[i] - shrink * h[i] + noise_scale * noise[i]
void langevin_update(std::span<double> h, std::span<const double> grad,
                     std::span<const double> noise, double step, double shrink,
                     double noise_scale);

/// max_i |x[i]|, or +inf if any entry is not finite.
double max_abs(std::span<const double> x);

// Direct entry points, used by the equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_mask(const double* pre, double* delta, std::size_t n);
void langevin_update(double* h, const double* grad, const double* noise,
                     std::size_t n, double step, double shrink,
                     double noise_scale);
double max_abs(const double* x, std::size_t n);
}  // namespace scalar

#if defined(GIBBSBOUND_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
void relu_mask(const double* pre, double* delta, std::size_t n);
void langevin_update(double* h, const double* grad, const double* noise,
                     std::size_t n, double step, double shrink,
                     double noise_scale);
double max_abs(const double* x, std::size_t n);
}  // namespace avx2
#endif

}  // namespace gibbs::kernels
