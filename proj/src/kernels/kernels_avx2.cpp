// Compiled with -mavx2 -mfma -ffp-contract=off. Only reached after the
// dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "gibbsbound/kernels.hpp"

namespace gibbs::kernels::avx2 {

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  acc0 = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc0);
  const __m128d hi = _mm256_extractf128_pd(acc0, 1);
  __m128d s = _mm_add_pd(lo, hi);
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  double total = _mm_cvtsd_f64(s);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    // Keep v where v > 0 so that NaN and -0.0 map to +0.0 like the scalar path.
    const __m256d keep = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(y + i, _mm256_and_pd(keep, v));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask(const double* pre, double* delta, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d keep =
        _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(delta + i, _mm256_and_pd(keep, _mm256_loadu_pd(delta + i)));
  }
  for (; i < n; ++i)
    if (!(pre[i] > 0.0)) delta[i] = 0.0;
}

void langevin_update(double* h, const double* grad, const double* noise,
                     std::size_t n, double step, double shrink,
                     double noise_scale) {
  const __m256d vstep = _mm256_set1_pd(step);
  const __m256d vshrink = _mm256_set1_pd(shrink);
  const __m256d vnoise = _mm256_set1_pd(noise_scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d hv = _mm256_loadu_pd(h + i);
    __m256d v = _mm256_sub_pd(hv, _mm256_mul_pd(vstep, _mm256_loadu_pd(grad + i)));
    v = _mm256_sub_pd(v, _mm256_mul_pd(vshrink, hv));
    v = _mm256_add_pd(v, _mm256_mul_pd(vnoise, _mm256_loadu_pd(noise + i)));
    _mm256_storeu_pd(h + i, v);
  }
  for (; i < n; ++i) {
    double v = h[i] - step * grad[i];
    v = v - shrink * h[i];
    h[i] = v + noise_scale * noise[i];
  }
}

double max_abs(const double* x, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d limit = _mm256_set1_pd(std::numeric_limits<double>::max());
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_andnot_pd(sign, _mm256_loadu_pd(x + i));
    // Not (a <= max) catches both inf and NaN.
    if (_mm256_movemask_pd(_mm256_cmp_pd(a, limit, _CMP_NLE_UQ)) != 0)
      return std::numeric_limits<double>::infinity();
    m = _mm256_max_pd(m, a);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  double result = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  for (; i < n; ++i) {
    const double a = std::fabs(x[i]);
    if (!(a <= std::numeric_limits<double>::max()))
      return std::numeric_limits<double>::infinity();
    if (a > result) result = a;
  }
  return result;
}

}  // namespace gibbs::kernels::avx2
