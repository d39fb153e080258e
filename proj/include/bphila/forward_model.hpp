#pragma once

// Measurement operators: identity, circular blur H, s-fold downsampling S and
// the composite SH. All operators act on each channel independently.

#include <complex>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "bphila/tensor.hpp"

namespace bphila {

using Complex = std::complex<double>;

struct BlurKernel {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::vector<double> taps{1.0};  // row-major
  std::size_t anchor_y = 0;
  std::size_t anchor_x = 0;

  double operator()(std::size_t r, std::size_t c) const { return taps[r * cols + c]; }
  double sum() const;
};

// Normalized sampled Gaussian of odd size, anchored at the center tap.
BlurKernel gaussian_kernel(std::size_t size, double std_dev);
// Single unit tap at (dy, dx) relative to the center of a (2r+1)^2 kernel.
BlurKernel shifted_delta(std::size_t radius, int dy, int dx);
// Whitespace-separated rows of numbers; all rows must have equal length.
// The anchor is the center tap (rows/cols must be odd).
BlurKernel load_kernel(const std::filesystem::path& path);

struct Spectrum {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Complex> values;  // row-major, DFT of the embedded kernel
};

// s x s paving of an H x W frequency grid: block j = (a, b) collects the
// frequencies (p + a H/s, q + b W/s) for p < H/s, q < W/s, listed in coarse
// row-major order.
struct FourierPaving {
  std::size_t factor = 1;
  std::size_t coarse_height = 0;
  std::size_t coarse_width = 0;
  std::vector<std::vector<std::size_t>> blocks;  // fine-grid linear indices
  std::vector<std::vector<Complex>> block_values;  // Λ_j, same order
};

struct Diagonalization {
  Spectrum spectrum;
  std::optional<FourierPaving> paving;  // present for blur-then-downsample
};

enum class ModelKind { identity, blur, downsample, blur_downsample };

class ForwardModel {
 public:
  static ForwardModel identity(std::size_t height, std::size_t width);
  static ForwardModel blur(std::size_t height, std::size_t width, const BlurKernel& kernel);
  static ForwardModel downsample(std::size_t height, std::size_t width, std::size_t factor);
  static ForwardModel blur_downsample(std::size_t height, std::size_t width,
                                      const BlurKernel& kernel, std::size_t factor);

  ModelKind kind() const noexcept { return kind_; }
  std::size_t factor() const noexcept { return factor_; }
  std::size_t input_height() const noexcept { return height_; }
  std::size_t input_width() const noexcept { return width_; }
  std::size_t output_height() const noexcept { return height_ / factor_; }
  std::size_t output_width() const noexcept { return width_ / factor_; }
  bool has_blur() const noexcept {
    return kind_ == ModelKind::blur || kind_ == ModelKind::blur_downsample;
  }

  ImageTensor apply(const ImageTensor& x) const;
  ImageTensor apply_adjoint(const ImageTensor& y) const;

  // (I + alpha A A^T)^{-1} y on the measurement grid, in closed form.
  ImageTensor gram_inverse(double alpha, const ImageTensor& y) const;

  // Kernel eigenvalues on the input grid; null without a blur component.
  const Spectrum* spectrum() const noexcept { return spectrum_.get(); }
  // Eigenvalues of A A^T on the measurement grid (real, nonnegative).
  const std::vector<double>& gram_eigenvalues() const noexcept { return *gram_eigen_; }

 private:
  ForwardModel() = default;
  void check_input(const ImageTensor& x, const char* where) const;
  void check_output(const ImageTensor& y, const char* where) const;

  ModelKind kind_ = ModelKind::identity;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t factor_ = 1;
  std::shared_ptr<const Spectrum> spectrum_;
  std::shared_ptr<const std::vector<double>> gram_eigen_;
};

Spectrum kernel_spectrum(const BlurKernel& kernel, std::size_t height, std::size_t width);
FourierPaving make_paving(const Spectrum& spectrum, std::size_t factor);
Diagonalization diagonalize(const ForwardModel& model);

// Per-channel helpers shared with the prox module.
ImageTensor multiply_spectrum(const ImageTensor& x, const Spectrum& s, bool conjugate);

}  // namespace bphila
