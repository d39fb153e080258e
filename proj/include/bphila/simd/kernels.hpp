#pragma once

// Data-parallel inner loops shared by the whole library. Every kernel has a
// scalar reference implementation; faster instruction-set variants are chosen
// once at runtime and must agree with the reference (see tests/test_simd.cpp).

#include <complex>
#include <cstddef>
#include <string_view>

namespace bphila::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum_i (x[i] - y[i])^2
  double (*squared_distance)(const double* x, const double* y, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y[i] *= a
  void (*scale)(double a, double* y, std::size_t n);
  // y[i] *= s[i]  (or conj(s[i]) when conjugate is set)
  void (*complex_multiply)(const std::complex<double>* s, std::complex<double>* y,
                           std::size_t n, bool conjugate);
  // y[i] *= r[i] for a real-valued multiplier
  void (*complex_scale)(const double* r, std::complex<double>* y, std::size_t n);
};

const KernelTable& scalar_kernels();

// Null when the binary was built without AVX2 support or the CPU lacks
// AVX2+FMA.
const KernelTable* avx2_kernels();

// Kernel table in use. Picked on first call: the best supported ISA, unless
// the environment variable BLOCKPHILA_SIMD=scalar forces the reference path.
const KernelTable& active();

// Overrides the active table (tests and benchmarks). Returns false and leaves
// the selection unchanged when the ISA is unavailable.
bool select(Isa isa);

}  // namespace bphila::simd
