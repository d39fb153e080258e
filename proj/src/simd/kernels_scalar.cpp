#include "bphila/simd/kernels.hpp"

namespace bphila::simd {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double squared_distance_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

void complex_multiply_scalar(const std::complex<double>* s, std::complex<double>* y,
                             std::size_t n, bool conjugate) {
  if (conjugate) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= std::conj(s[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] *= s[i];
  }
}

void complex_scale_scalar(const double* r, std::complex<double>* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= r[i];
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar,
                                 "scalar",
                                 dot_scalar,
                                 squared_distance_scalar,
                                 axpy_scalar,
                                 scale_scalar,
                                 complex_multiply_scalar,
                                 complex_scale_scalar};
  return table;
}

}  // namespace bphila::simd
