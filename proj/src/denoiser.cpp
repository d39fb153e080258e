#include "bphila/denoiser.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bphila {
namespace {

// Maps padded coordinate v - r onto [0, n), or returns false when it falls
// outside a zero-boundary axis.
inline bool map_index(std::ptrdiff_t v, std::size_t n, Edge e, std::size_t& out) {
  const auto sn = static_cast<std::ptrdiff_t>(n);
  if (e == Edge::periodic) {
    out = static_cast<std::size_t>(((v % sn) + sn) % sn);
    return true;
  }
  if (v < 0 || v >= sn) return false;
  out = static_cast<std::size_t>(v);
  return true;
}

void check_layer(const ConvLayer& l) {
  if (l.kernel_size % 2 == 0) throw std::invalid_argument("conv layer: kernel size must be odd");
  if (l.in_channels == 0 || l.out_channels == 0) {
    throw std::invalid_argument("conv layer: zero channels");
  }
  const std::size_t expected = l.out_channels * l.in_channels * l.kernel_size * l.kernel_size;
  if (l.weights.size() != expected || l.bias.size() != l.out_channels) {
    throw std::invalid_argument("conv layer: weight/bias size does not match its shape");
  }
}

}  // namespace

ImageTensor conv_forward(const ConvLayer& layer, const ImageTensor& in, Boundary b) {
  if (in.channels() != layer.in_channels) {
    throw std::invalid_argument("conv_forward: expected " + std::to_string(layer.in_channels) +
                                " input channels, got " + shape_string(in));
  }
  const std::size_t h = in.height();
  const std::size_t w = in.width();
  const std::size_t r = layer.radius();
  const std::size_t k = layer.kernel_size;
  const std::size_t pw = w + 2 * r;
  ImageTensor out(h, w, layer.out_channels);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    auto plane = out.plane(o);
    std::fill(plane.begin(), plane.end(), layer.bias[o]);
  }
  std::vector<double> padded((h + 2 * r) * pw);
  for (std::size_t c = 0; c < layer.in_channels; ++c) {
    for (std::size_t yy = 0; yy < h + 2 * r; ++yy) {
      std::size_t sy = 0;
      const bool row_ok = map_index(static_cast<std::ptrdiff_t>(yy) - static_cast<std::ptrdiff_t>(r),
                                    h, b.y, sy);
      for (std::size_t xx = 0; xx < pw; ++xx) {
        std::size_t sx = 0;
        const bool ok = row_ok && map_index(static_cast<std::ptrdiff_t>(xx) -
                                                static_cast<std::ptrdiff_t>(r),
                                            w, b.x, sx);
        padded[yy * pw + xx] = ok ? in(c, sy, sx) : 0.0;
      }
    }
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wt = layer.w(o, c, ky, kx);
          if (wt == 0.0) continue;
          for (std::size_t y = 0; y < h; ++y) {
            axpy(wt, std::span<const double>(&padded[(y + ky) * pw + kx], w),
                 std::span<double>(&out(o, y, 0), w));
          }
        }
      }
    }
  }
  return out;
}

ImageTensor conv_backward(const ConvLayer& layer, const ImageTensor& grad_out, Boundary b) {
  if (grad_out.channels() != layer.out_channels) {
    throw std::invalid_argument("conv_backward: expected " + std::to_string(layer.out_channels) +
                                " channels, got " + shape_string(grad_out));
  }
  const std::size_t h = grad_out.height();
  const std::size_t w = grad_out.width();
  const std::size_t r = layer.radius();
  const std::size_t k = layer.kernel_size;
  const std::size_t pw = w + 2 * r;
  ImageTensor grad_in(h, w, layer.in_channels);
  std::vector<double> acc((h + 2 * r) * pw);
  for (std::size_t c = 0; c < layer.in_channels; ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t o = 0; o < layer.out_channels; ++o) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wt = layer.w(o, c, ky, kx);
          if (wt == 0.0) continue;
          for (std::size_t y = 0; y < h; ++y) {
            axpy(wt, std::span<const double>(&grad_out(o, y, 0), w),
                 std::span<double>(&acc[(y + ky) * pw + kx], w));
          }
        }
      }
    }
    // Fold the padded accumulator back: wrap along periodic axes, drop the
    // contributions that landed outside a zero-boundary axis.
    for (std::size_t yy = 0; yy < h + 2 * r; ++yy) {
      std::size_t sy = 0;
      if (!map_index(static_cast<std::ptrdiff_t>(yy) - static_cast<std::ptrdiff_t>(r), h, b.y, sy)) {
        continue;
      }
      for (std::size_t xx = 0; xx < pw; ++xx) {
        std::size_t sx = 0;
        if (!map_index(static_cast<std::ptrdiff_t>(xx) - static_cast<std::ptrdiff_t>(r), w, b.x,
                       sx)) {
          continue;
        }
        grad_in(c, sy, sx) += acc[yy * pw + xx];
      }
    }
  }
  return grad_in;
}

double elu(double z) noexcept { return z > 0.0 ? z : std::expm1(z); }
double elu_derivative(double z) noexcept { return z > 0.0 ? 1.0 : std::exp(z); }

// ---------------------------------------------------------------------------
// LinearConvDenoiser

LinearConvDenoiser::LinearConvDenoiser(BlurKernel kernel, double noise_level)
    : kernel_(std::move(kernel)), noise_level_(noise_level) {
  if (kernel_.rows != kernel_.cols || kernel_.rows % 2 == 0 ||
      kernel_.anchor_y != kernel_.rows / 2 || kernel_.anchor_x != kernel_.cols / 2) {
    throw std::invalid_argument("LinearConvDenoiser: kernel must be square, odd and centered");
  }
  if (noise_level < 0.0) throw std::invalid_argument("LinearConvDenoiser: negative noise level");
  const std::size_t k = kernel_.rows;
  layer_.in_channels = 1;
  layer_.out_channels = 1;
  layer_.kernel_size = k;
  layer_.bias = {0.0};
  layer_.weights.resize(k * k);
  for (std::size_t ky = 0; ky < k; ++ky) {
    for (std::size_t kx = 0; kx < k; ++kx) {
      layer_.weights[ky * k + kx] = kernel_(k - 1 - ky, k - 1 - kx);
    }
  }
}

ImageTensor LinearConvDenoiser::per_channel(const ImageTensor& x, Boundary b, bool adjoint) const {
  ImageTensor out(x.height(), x.width(), x.channels());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    ImageTensor one(x.height(), x.width(), 1,
                    std::vector<double>(x.plane(c).begin(), x.plane(c).end()));
    ImageTensor res = adjoint ? conv_backward(layer_, one, b) : conv_forward(layer_, one, b);
    std::copy(res.data().begin(), res.data().end(), out.plane(c).begin());
  }
  return out;
}

ImageTensor LinearConvDenoiser::denoise(const ImageTensor& x, Boundary b) const {
  if (x.empty()) throw std::invalid_argument("denoise: empty image");
  return per_channel(x, b, false);
}

ImageTensor LinearConvDenoiser::vjp(const ImageTensor& x, const ImageTensor& u, Boundary b) const {
  require_same_shape(x, u, "LinearConvDenoiser::vjp");
  return per_channel(u, b, true);
}

// ---------------------------------------------------------------------------
// TinyConvNet

TinyConvNet::TinyConvNet(std::size_t image_channels, double noise_level,
                         std::vector<ConvLayer> layers)
    : image_channels_(image_channels), noise_level_(noise_level), layers_(std::move(layers)) {
  if (image_channels_ == 0) throw std::invalid_argument("TinyConvNet: zero image channels");
  if (noise_level_ < 0.0) throw std::invalid_argument("TinyConvNet: negative noise level");
  if (layers_.empty()) throw std::invalid_argument("TinyConvNet: no layers");
  for (const auto& l : layers_) check_layer(l);
  if (layers_.front().in_channels != image_channels_ + 1) {
    throw std::invalid_argument("TinyConvNet: first layer must read image channels + noise map");
  }
  if (layers_.back().out_channels != image_channels_) {
    throw std::invalid_argument("TinyConvNet: last layer must produce the image channels");
  }
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    if (layers_[l].in_channels != layers_[l - 1].out_channels) {
      throw std::invalid_argument("TinyConvNet: channel mismatch between layers " +
                                  std::to_string(l - 1) + " and " + std::to_string(l));
    }
  }
}

TinyConvNet TinyConvNet::random(const Options& opt) {
  if (opt.layers == 0) throw std::invalid_argument("TinyConvNet::random: zero layers");
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ConvLayer> layers;
  for (std::size_t l = 0; l < opt.layers; ++l) {
    ConvLayer layer;
    layer.in_channels = l == 0 ? opt.image_channels + 1 : opt.hidden_channels;
    layer.out_channels = l + 1 == opt.layers ? opt.image_channels : opt.hidden_channels;
    layer.kernel_size = opt.kernel_size;
    const double fan_in =
        static_cast<double>(layer.in_channels * opt.kernel_size * opt.kernel_size);
    const double scale = 1.0 / std::sqrt(fan_in);
    layer.weights.resize(layer.out_channels * layer.in_channels * opt.kernel_size *
                         opt.kernel_size);
    for (double& v : layer.weights) v = scale * normal(rng);
    layer.bias.assign(layer.out_channels, 0.0);
    layers.push_back(std::move(layer));
  }
  return TinyConvNet(opt.image_channels, opt.noise_level, std::move(layers));
}

std::size_t TinyConvNet::receptive_radius() const {
  std::size_t r = 0;
  for (const auto& l : layers_) r += l.radius();
  return r;
}

void TinyConvNet::check_input(const ImageTensor& x) const {
  if (x.empty() || x.channels() != image_channels_) {
    throw std::invalid_argument("TinyConvNet: expected " + std::to_string(image_channels_) +
                                " channels, got " + shape_string(x));
  }
}

ImageTensor TinyConvNet::network_input(const ImageTensor& x) const {
  ImageTensor in(x.height(), x.width(), image_channels_ + 1, noise_level_);
  std::copy(x.data().begin(), x.data().end(), in.data().begin());
  return in;
}

ImageTensor TinyConvNet::denoise(const ImageTensor& x, Boundary b) const {
  check_input(x);
  ImageTensor a = network_input(x);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    a = conv_forward(layers_[l], a, b);
    if (l + 1 < layers_.size()) {
      for (double& v : a.data()) v = elu(v);
    }
  }
  return x - a;
}

ImageTensor TinyConvNet::vjp(const ImageTensor& x, const ImageTensor& u, Boundary b) const {
  check_input(x);
  require_same_shape(x, u, "TinyConvNet::vjp");
  // Forward pass keeping the pre-activations of the hidden layers.
  std::vector<ImageTensor> pre;
  pre.reserve(layers_.size() - 1);
  ImageTensor a = network_input(x);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    pre.push_back(conv_forward(layers_[l], a, b));
    a = pre.back();
    for (double& v : a.data()) v = elu(v);
  }
  a = ImageTensor();
  // J_N^T u = u - J_R^T u
  ImageTensor delta = u;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    ImageTensor g = conv_backward(layers_[l], delta, b);
    if (l > 0) {
      const auto z = pre[l - 1].data();
      auto gd = g.data();
      for (std::size_t j = 0; j < gd.size(); ++j) gd[j] *= elu_derivative(z[j]);
      pre.pop_back();
    }
    delta = std::move(g);
  }
  ImageTensor out = u;
  auto od = out.data();
  const auto dd = delta.data();
  for (std::size_t j = 0; j < od.size(); ++j) od[j] -= dd[j];  // drops the noise-map channel
  return out;
}

// Layout:
//   bphila-tinyconvnet 1
//   channels <C> noise <σ> layers <L>
//   then per layer: "layer <in> <out> <k>", the weights in [out][in][ky][kx]
//   order, then the biases. Numbers are decimal text with 17 significant digits.
void TinyConvNet::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("TinyConvNet::save: cannot open " + path.string());
  f << std::setprecision(17);
  f << "bphila-tinyconvnet 1\n";
  f << "channels " << image_channels_ << " noise " << noise_level_ << " layers " << layers_.size()
    << "\n";
  for (const auto& l : layers_) {
    f << "layer " << l.in_channels << ' ' << l.out_channels << ' ' << l.kernel_size << "\n";
    for (std::size_t j = 0; j < l.weights.size(); ++j) {
      f << l.weights[j] << ((j + 1) % l.kernel_size == 0 ? '\n' : ' ');
    }
    for (std::size_t j = 0; j < l.bias.size(); ++j) {
      f << l.bias[j] << (j + 1 == l.bias.size() ? '\n' : ' ');
    }
  }
  if (!f) throw std::runtime_error("TinyConvNet::save: write failed for " + path.string());
}

TinyConvNet TinyConvNet::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("TinyConvNet::load: cannot open " + path.string());
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(f >> got) || got != word) {
      throw std::runtime_error("TinyConvNet::load: expected '" + word + "' in " + path.string());
    }
  };
  expect("bphila-tinyconvnet");
  int version = 0;
  if (!(f >> version) || version != 1) {
    throw std::runtime_error("TinyConvNet::load: unsupported version in " + path.string());
  }
  std::size_t channels = 0;
  std::size_t count = 0;
  double noise = 0.0;
  expect("channels");
  f >> channels;
  expect("noise");
  f >> noise;
  expect("layers");
  f >> count;
  if (!f) throw std::runtime_error("TinyConvNet::load: malformed header in " + path.string());
  std::vector<ConvLayer> layers(count);
  for (auto& l : layers) {
    expect("layer");
    f >> l.in_channels >> l.out_channels >> l.kernel_size;
    if (!f) throw std::runtime_error("TinyConvNet::load: malformed layer header");
    l.weights.resize(l.out_channels * l.in_channels * l.kernel_size * l.kernel_size);
    l.bias.resize(l.out_channels);
    for (double& v : l.weights) f >> v;
    for (double& v : l.bias) f >> v;
    if (!f) throw std::runtime_error("TinyConvNet::load: truncated weights in " + path.string());
  }
  return TinyConvNet(channels, noise, std::move(layers));
}

// ---------------------------------------------------------------------------
// Regularizer

namespace {
const GsDenoiser& denoiser_of(const Regularizer& r) {
  if (!r.denoiser) throw std::invalid_argument("regularizer has no denoiser");
  return *r.denoiser;
}
}  // namespace

double g_value(const Regularizer& r, const ImageTensor& x) {
  const ImageTensor res = x - denoiser_of(r).denoise(x);
  return 0.5 * r.weight * squared_norm(res);
}

ImageTensor g_grad(const Regularizer& r, const ImageTensor& x) {
  const GsDenoiser& d = denoiser_of(r);
  ImageTensor u = x - d.denoise(x);
  const ImageTensor v = d.vjp(x, u);
  axpy(-1.0, v.data(), u.data());
  scale(r.weight, u.data());
  return u;
}

BlockVector g_grad_block(const Regularizer& r, const ImageTensor& x, const BlockPartition& p,
                         std::size_t i, std::size_t pad) {
  const GsDenoiser& d = denoiser_of(r);
  if (pad < d.gradient_radius()) {
    throw std::invalid_argument("g_grad_block: pad " + std::to_string(pad) +
                                " is below the gradient radius " +
                                std::to_string(d.gradient_radius()) +
                                " (2 x receptive radius); the block gradient would be inexact");
  }
  auto [geom, patch] = extract_padded(x, p, i, pad);
  const Boundary b{geom.periodic_y ? Edge::periodic : Edge::zero,
                   geom.periodic_x ? Edge::periodic : Edge::zero};
  ImageTensor u = patch - d.denoise(patch, b);
  const ImageTensor v = d.vjp(patch, u, b);
  axpy(-1.0, v.data(), u.data());
  scale(r.weight, u.data());
  return patch_interior(u, geom);
}

std::size_t default_block_pad(const GsDenoiser& d, const BlockPartition& p) {
  const std::size_t need = d.gradient_radius();
  const std::size_t cap = max_admissible_pad(p);
  if (need > cap) {
    throw std::invalid_argument("default_block_pad: gradient radius " + std::to_string(need) +
                                " exceeds the largest admissible pad " + std::to_string(cap) +
                                " for this partition");
  }
  return std::max(need, std::min<std::size_t>(16, cap));
}

}  // namespace bphila
