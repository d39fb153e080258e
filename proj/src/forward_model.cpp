#include "bphila/forward_model.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "bphila/fft.hpp"
#include "bphila/simd/kernels.hpp"

namespace bphila {

double BlurKernel::sum() const { return std::accumulate(taps.begin(), taps.end(), 0.0); }

BlurKernel gaussian_kernel(std::size_t size, double std_dev) {
  if (size % 2 == 0) throw std::invalid_argument("gaussian_kernel: size must be odd");
  if (!(std_dev > 0.0)) throw std::invalid_argument("gaussian_kernel: std must be positive");
  BlurKernel k;
  k.rows = k.cols = size;
  k.anchor_y = k.anchor_x = size / 2;
  k.taps.assign(size * size, 0.0);
  const double c = static_cast<double>(size / 2);
  double total = 0.0;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t q = 0; q < size; ++q) {
      const double dy = static_cast<double>(r) - c;
      const double dx = static_cast<double>(q) - c;
      const double v = std::exp(-(dy * dy + dx * dx) / (2.0 * std_dev * std_dev));
      k.taps[r * size + q] = v;
      total += v;
    }
  }
  for (double& v : k.taps) v /= total;
  return k;
}

BlurKernel shifted_delta(std::size_t radius, int dy, int dx) {
  const auto r = static_cast<int>(radius);
  if (std::abs(dy) > r || std::abs(dx) > r) throw std::invalid_argument("shifted_delta: shift exceeds radius");
  BlurKernel k;
  k.rows = k.cols = 2 * radius + 1;
  k.anchor_y = k.anchor_x = radius;
  k.taps.assign(k.rows * k.cols, 0.0);
  k.taps[static_cast<std::size_t>(r + dy) * k.cols + static_cast<std::size_t>(r + dx)] = 1.0;
  return k;
}

BlurKernel load_kernel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open kernel file '" + path.string() + "'");
  BlurKernel k;
  k.taps.clear();
  k.rows = 0;
  k.cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw std::runtime_error("kernel file '" + path.string() + "': bad number");
    if (row.empty()) continue;
    if (k.cols == 0) k.cols = row.size();
    if (row.size() != k.cols) {
      throw std::runtime_error("kernel file '" + path.string() + "': ragged rows");
    }
    k.taps.insert(k.taps.end(), row.begin(), row.end());
    ++k.rows;
  }
  if (k.rows == 0) throw std::runtime_error("kernel file '" + path.string() + "' is empty");
  if (k.rows % 2 == 0 || k.cols % 2 == 0) {
    throw std::runtime_error("kernel file '" + path.string() + "': dimensions must be odd");
  }
  for (double t : k.taps) {
    if (!std::isfinite(t)) throw std::runtime_error("kernel file '" + path.string() + "': non-finite tap");
  }
  k.anchor_y = k.rows / 2;
  k.anchor_x = k.cols / 2;
  return k;
}

Spectrum kernel_spectrum(const BlurKernel& kernel, std::size_t height, std::size_t width) {
  std::vector<double> embedded(height * width, 0.0);
  for (std::size_t r = 0; r < kernel.rows; ++r) {
    for (std::size_t c = 0; c < kernel.cols; ++c) {
      // Tap offset (r - anchor_y, c - anchor_x), wrapped onto the grid.
      const auto oy = static_cast<long>(r) - static_cast<long>(kernel.anchor_y);
      const auto ox = static_cast<long>(c) - static_cast<long>(kernel.anchor_x);
      const auto H = static_cast<long>(height);
      const auto W = static_cast<long>(width);
      const auto y = static_cast<std::size_t>(((oy % H) + H) % H);
      const auto x = static_cast<std::size_t>(((ox % W) + W) % W);
      embedded[y * width + x] += kernel(r, c);
    }
  }
  return Spectrum{height, width, fft::forward_real(embedded, height, width)};
}

FourierPaving make_paving(const Spectrum& spectrum, std::size_t factor) {
  if (factor == 0 || spectrum.height % factor != 0 || spectrum.width % factor != 0) {
    throw std::invalid_argument("make_paving: grid not divisible by the scale factor");
  }
  FourierPaving p;
  p.factor = factor;
  p.coarse_height = spectrum.height / factor;
  p.coarse_width = spectrum.width / factor;
  for (std::size_t a = 0; a < factor; ++a) {
    for (std::size_t b = 0; b < factor; ++b) {
      std::vector<std::size_t> idx;
      std::vector<Complex> vals;
      idx.reserve(p.coarse_height * p.coarse_width);
      for (std::size_t u = 0; u < p.coarse_height; ++u) {
        for (std::size_t v = 0; v < p.coarse_width; ++v) {
          const std::size_t fy = u + a * p.coarse_height;
          const std::size_t fx = v + b * p.coarse_width;
          idx.push_back(fy * spectrum.width + fx);
          vals.push_back(spectrum.values[fy * spectrum.width + fx]);
        }
      }
      p.blocks.push_back(std::move(idx));
      p.block_values.push_back(std::move(vals));
    }
  }
  return p;
}

ImageTensor multiply_spectrum(const ImageTensor& x, const Spectrum& s, bool conjugate) {
  if (x.height() != s.height || x.width() != s.width) {
    throw std::invalid_argument("multiply_spectrum: grid mismatch");
  }
  ImageTensor out(x.height(), x.width(), x.channels());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    auto freq = fft::forward_real(x.plane(c), x.height(), x.width());
    simd::active().complex_multiply(s.values.data(), freq.data(), freq.size(), conjugate);
    const auto back = fft::inverse_real(std::move(freq), x.height(), x.width());
    std::copy(back.begin(), back.end(), out.plane(c).begin());
  }
  return out;
}

namespace {

std::vector<double> blur_gram(const Spectrum& s) {
  std::vector<double> g(s.values.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::norm(s.values[i]);
  return g;
}

// Eigenvalues of S H H^T S^T on the coarse grid: the alias-averaged |Λ|^2.
std::vector<double> blur_downsample_gram(const Spectrum& s, std::size_t factor) {
  const FourierPaving paving = make_paving(s, factor);
  std::vector<double> g(paving.coarse_height * paving.coarse_width, 0.0);
  for (const auto& vals : paving.block_values) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += std::norm(vals[i]);
  }
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (double& v : g) v *= inv;
  return g;
}

ImageTensor subsample(const ImageTensor& x, std::size_t s) {
  ImageTensor out(x.height() / s, x.width() / s, x.channels());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      for (std::size_t q = 0; q < out.width(); ++q) out(c, y, q) = x(c, y * s, q * s);
    }
  }
  return out;
}

ImageTensor zero_fill(const ImageTensor& y, std::size_t s) {
  ImageTensor out(y.height() * s, y.width() * s, y.channels());
  for (std::size_t c = 0; c < y.channels(); ++c) {
    for (std::size_t r = 0; r < y.height(); ++r) {
      for (std::size_t q = 0; q < y.width(); ++q) out(c, r * s, q * s) = y(c, r, q);
    }
  }
  return out;
}

}  // namespace

ForwardModel ForwardModel::identity(std::size_t height, std::size_t width) {
  ForwardModel m;
  m.kind_ = ModelKind::identity;
  m.height_ = height;
  m.width_ = width;
  m.gram_eigen_ = std::make_shared<const std::vector<double>>(height * width, 1.0);
  return m;
}

ForwardModel ForwardModel::blur(std::size_t height, std::size_t width, const BlurKernel& kernel) {
  ForwardModel m;
  m.kind_ = ModelKind::blur;
  m.height_ = height;
  m.width_ = width;
  auto s = std::make_shared<const Spectrum>(kernel_spectrum(kernel, height, width));
  m.gram_eigen_ = std::make_shared<const std::vector<double>>(blur_gram(*s));
  m.spectrum_ = std::move(s);
  return m;
}

ForwardModel ForwardModel::downsample(std::size_t height, std::size_t width, std::size_t factor) {
  if (factor == 0 || height % factor != 0 || width % factor != 0) {
    throw std::invalid_argument("downsample: grid not divisible by the scale factor");
  }
  ForwardModel m;
  m.kind_ = ModelKind::downsample;
  m.height_ = height;
  m.width_ = width;
  m.factor_ = factor;
  m.gram_eigen_ =
      std::make_shared<const std::vector<double>>((height / factor) * (width / factor), 1.0);
  return m;
}

ForwardModel ForwardModel::blur_downsample(std::size_t height, std::size_t width,
                                           const BlurKernel& kernel, std::size_t factor) {
  if (factor == 0 || height % factor != 0 || width % factor != 0) {
    throw std::invalid_argument("blur_downsample: grid not divisible by the scale factor");
  }
  ForwardModel m;
  m.kind_ = ModelKind::blur_downsample;
  m.height_ = height;
  m.width_ = width;
  m.factor_ = factor;
  auto s = std::make_shared<const Spectrum>(kernel_spectrum(kernel, height, width));
  m.gram_eigen_ = std::make_shared<const std::vector<double>>(blur_downsample_gram(*s, factor));
  m.spectrum_ = std::move(s);
  return m;
}

void ForwardModel::check_input(const ImageTensor& x, const char* where) const {
  if (x.height() != height_ || x.width() != width_) {
    throw std::invalid_argument(std::string(where) + ": input " + shape_string(x) +
                                " does not match model grid " + std::to_string(height_) + "x" +
                                std::to_string(width_));
  }
}

void ForwardModel::check_output(const ImageTensor& y, const char* where) const {
  if (y.height() != output_height() || y.width() != output_width()) {
    throw std::invalid_argument(std::string(where) + ": measurement " + shape_string(y) +
                                " does not match " + std::to_string(output_height()) + "x" +
                                std::to_string(output_width()));
  }
}

ImageTensor ForwardModel::apply(const ImageTensor& x) const {
  check_input(x, "ForwardModel::apply");
  switch (kind_) {
    case ModelKind::identity: return x;
    case ModelKind::blur: return multiply_spectrum(x, *spectrum_, false);
    case ModelKind::downsample: return subsample(x, factor_);
    case ModelKind::blur_downsample:
      return subsample(multiply_spectrum(x, *spectrum_, false), factor_);
  }
  return x;
}

ImageTensor ForwardModel::apply_adjoint(const ImageTensor& y) const {
  check_output(y, "ForwardModel::apply_adjoint");
  switch (kind_) {
    case ModelKind::identity: return y;
    case ModelKind::blur: return multiply_spectrum(y, *spectrum_, true);
    case ModelKind::downsample: return zero_fill(y, factor_);
    case ModelKind::blur_downsample:
      return multiply_spectrum(zero_fill(y, factor_), *spectrum_, true);
  }
  return y;
}

ImageTensor ForwardModel::gram_inverse(double alpha, const ImageTensor& y) const {
  check_output(y, "ForwardModel::gram_inverse");
  if (kind_ == ModelKind::identity || kind_ == ModelKind::downsample) {
    return (1.0 / (1.0 + alpha)) * y;
  }
  const std::size_t h = output_height();
  const std::size_t w = output_width();
  std::vector<double> inv(gram_eigen_->size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / (1.0 + alpha * (*gram_eigen_)[i]);
  ImageTensor out(h, w, y.channels());
  for (std::size_t c = 0; c < y.channels(); ++c) {
    auto freq = fft::forward_real(y.plane(c), h, w);
    simd::active().complex_scale(inv.data(), freq.data(), freq.size());
    const auto back = fft::inverse_real(std::move(freq), h, w);
    std::copy(back.begin(), back.end(), out.plane(c).begin());
  }
  return out;
}

Diagonalization diagonalize(const ForwardModel& model) {
  if (!model.has_blur()) {
    throw std::invalid_argument("diagonalize: model has no convolution component");
  }
  Diagonalization d{*model.spectrum(), std::nullopt};
  if (model.kind() == ModelKind::blur_downsample) d.paving = make_paving(d.spectrum, model.factor());
  return d;
}

}  // namespace bphila
