#include <cmath>
#include <limits>

#include "gibbsbound/kernels.hpp"

namespace gibbs::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask(const double* pre, double* delta, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!(pre[i] > 0.0)) delta[i] = 0.0;
}

void langevin_update(double* h, const double* grad, const double* noise,
                     std::size_t n, double step, double shrink,
                     double noise_scale) {
  for (std::size_t i = 0; i < n; ++i) {
    double v = h[i] - step * grad[i];
    v = v - shrink * h[i];
    h[i] = v + noise_scale * noise[i];
  }
}

double max_abs(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::fabs(x[i]);
    if (!(a <= std::numeric_limits<double>::max()))
      return std::numeric_limits<double>::infinity();
    if (a > m) m = a;
  }
  return m;
}

}  // namespace gibbs::kernels::scalar
