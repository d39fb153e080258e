// Compiled with -mavx2 -mfma. Nothing in this file may run unless
// avx2_kernels() confirmed CPU support.

#include "bphila/simd/kernels.hpp"

#if defined(BPHILA_HAVE_AVX2)

#include <immintrin.h>

namespace bphila::simd {
namespace {

double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = horizontal_sum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double s = horizontal_sum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] *= a;
}

// Two complex values per register, stored (re, im, re, im).
void complex_multiply_avx2(const std::complex<double>* s, std::complex<double>* y,
                           std::size_t n, bool conjugate) {
  auto* ys = reinterpret_cast<double*>(y);
  const auto* ss = reinterpret_cast<const double*>(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d yv = _mm256_loadu_pd(ys + 2 * i);
    const __m256d sv = _mm256_loadu_pd(ss + 2 * i);
    const __m256d s_re = _mm256_movedup_pd(sv);
    const __m256d s_im = _mm256_permute_pd(sv, 0xF);
    const __m256d y_swap = _mm256_permute_pd(yv, 0x5);
    const __m256d cross = _mm256_mul_pd(y_swap, s_im);
    const __m256d r = conjugate ? _mm256_fmsubadd_pd(yv, s_re, cross)
                                : _mm256_fmaddsub_pd(yv, s_re, cross);
    _mm256_storeu_pd(ys + 2 * i, r);
  }
  for (; i < n; ++i) y[i] *= conjugate ? std::conj(s[i]) : s[i];
}

void complex_scale_avx2(const double* r, std::complex<double>* y, std::size_t n) {
  auto* ys = reinterpret_cast<double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m128d rr = _mm_loadu_pd(r + i);
    const __m256d r4 = _mm256_permute4x64_pd(_mm256_castpd128_pd256(rr), 0x50);
    _mm256_storeu_pd(ys + 2 * i, _mm256_mul_pd(r4, _mm256_loadu_pd(ys + 2 * i)));
  }
  for (; i < n; ++i) y[i] *= r[i];
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable table{Isa::avx2,
                                 "avx2",
                                 dot_avx2,
                                 squared_distance_avx2,
                                 axpy_avx2,
                                 scale_avx2,
                                 complex_multiply_avx2,
                                 complex_scale_avx2};
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

}  // namespace bphila::simd

#else

namespace bphila::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace bphila::simd

#endif
