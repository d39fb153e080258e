#pragma once

// 2-D complex DFT on row-major grids, backed by FFTW.
//
// forward() is the plain DFT; inverse() includes the 1/(h*w) factor so that
// inverse(forward(x)) == x. With this pairing a circulant operator is
// inverse(diag(Λ) forward(x)) where Λ is the DFT of its first column, i.e. the
// same operator as F* Λ F written with the unitary transform F.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace bphila::fft {

using Complex = std::complex<double>;

void forward(std::span<Complex> data, std::size_t h, std::size_t w);
void inverse(std::span<Complex> data, std::size_t h, std::size_t w);

std::vector<Complex> forward_real(std::span<const double> data, std::size_t h, std::size_t w);
// Real part of the inverse transform.
std::vector<double> inverse_real(std::vector<Complex> data, std::size_t h, std::size_t w);

}  // namespace bphila::fft
