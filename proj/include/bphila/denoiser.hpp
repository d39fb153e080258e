#pragma once

// Gradient-Step denoisers. A denoiser provides the network N_σ, its
// vector-Jacobian product u -> J_{N_σ}(x)^T u, and its receptive radius; the
// regularizer g_σ(x) = ½‖x − N_σ(x)‖² and its gradient are built on top.
//
// Every computation can run either on the full image (periodic boundary) or on
// a padded patch whose non-periodic edges are zero-filled. The latter is the
// restricted network used for block gradients.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "bphila/forward_model.hpp"
#include "bphila/tensor.hpp"

namespace bphila {

enum class Edge { periodic, zero };

struct Boundary {
  Edge y = Edge::periodic;
  Edge x = Edge::periodic;
};

// Multi-channel 2-D correlation layer with odd square taps:
//   out[o](p) = bias[o] + Σ_c Σ_t w[o][c][t] in[c](p + t − r).
struct ConvLayer {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 1;
  std::vector<double> weights;  // [out][in][ky][kx]
  std::vector<double> bias;     // [out]

  std::size_t radius() const noexcept { return kernel_size / 2; }
  double w(std::size_t o, std::size_t c, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_channels + c) * kernel_size + ky) * kernel_size + kx];
  }
};

ImageTensor conv_forward(const ConvLayer& layer, const ImageTensor& in, Boundary b);
// Adjoint of conv_forward (without bias) with respect to its input.
ImageTensor conv_backward(const ConvLayer& layer, const ImageTensor& grad_out, Boundary b);

class GsDenoiser {
 public:
  virtual ~GsDenoiser() = default;

  virtual ImageTensor denoise(const ImageTensor& x, Boundary b = {}) const = 0;
  // J_{N_σ}(x)^T u
  virtual ImageTensor vjp(const ImageTensor& x, const ImageTensor& u, Boundary b = {}) const = 0;
  // Exact influence radius of N_σ: output pixel p depends only on inputs q
  // with max(|p_y − q_y|, |p_x − q_x|) <= radius.
  virtual std::size_t receptive_radius() const = 0;
  virtual double noise_level() const noexcept = 0;

  // Influence radius of ∇g_σ, twice that of N_σ: the residual x − N_σ(x) is
  // read over the receptive field of each block pixel. This is the smallest
  // pad for which the restricted block gradient is exact.
  std::size_t gradient_radius() const { return 2 * receptive_radius(); }
};

// N_σ(x) = k * x, a fixed smoothing kernel applied per channel.
class LinearConvDenoiser final : public GsDenoiser {
 public:
  explicit LinearConvDenoiser(BlurKernel kernel, double noise_level = 0.0);

  ImageTensor denoise(const ImageTensor& x, Boundary b = {}) const override;
  ImageTensor vjp(const ImageTensor& x, const ImageTensor& u, Boundary b = {}) const override;
  std::size_t receptive_radius() const override { return layer_.radius(); }
  double noise_level() const noexcept override { return noise_level_; }

  const BlurKernel& kernel() const noexcept { return kernel_; }

 private:
  ImageTensor per_channel(const ImageTensor& x, Boundary b, bool adjoint) const;

  BlurKernel kernel_;
  ConvLayer layer_;  // single-channel correlation with the flipped kernel
  double noise_level_;
};

// Small residual conv net: N_σ(x) = x − R(x), with R a stack of correlation
// layers and eLU activations between them. R reads the image channels plus a
// constant noise-level map σ.
class TinyConvNet final : public GsDenoiser {
 public:
  struct Options {
    std::size_t image_channels = 1;
    std::size_t hidden_channels = 8;
    std::size_t layers = 2;
    std::size_t kernel_size = 3;
    double noise_level = 0.0;
    std::uint64_t seed = 1234;
  };

  TinyConvNet(std::size_t image_channels, double noise_level, std::vector<ConvLayer> layers);
  // Gaussian weights scaled by 1/sqrt(fan_in), zero biases.
  static TinyConvNet random(const Options& options);

  ImageTensor denoise(const ImageTensor& x, Boundary b = {}) const override;
  ImageTensor vjp(const ImageTensor& x, const ImageTensor& u, Boundary b = {}) const override;
  std::size_t receptive_radius() const override;
  double noise_level() const noexcept override { return noise_level_; }

  std::size_t image_channels() const noexcept { return image_channels_; }
  const std::vector<ConvLayer>& layers() const noexcept { return layers_; }

  // Plain-text weight file, see README for the layout.
  void save(const std::filesystem::path& path) const;
  static TinyConvNet load(const std::filesystem::path& path);

 private:
  ImageTensor network_input(const ImageTensor& x) const;
  void check_input(const ImageTensor& x) const;

  std::size_t image_channels_;
  double noise_level_;
  std::vector<ConvLayer> layers_;
};

double elu(double z) noexcept;
double elu_derivative(double z) noexcept;

struct Regularizer {
  std::shared_ptr<const GsDenoiser> denoiser;
  double weight = 1.0;  // λ
};

// (λ/2)‖x − N_σ(x)‖²
double g_value(const Regularizer& r, const ImageTensor& x);
// λ[(x − N_σ(x)) − J_{N_σ}(x)^T (x − N_σ(x))]
ImageTensor g_grad(const Regularizer& r, const ImageTensor& x);
// U_i^T ∇(λ g_σ)(x) computed only from the padded patch around block i.
// Requires pad >= gradient_radius() of the denoiser.
BlockVector g_grad_block(const Regularizer& r, const ImageTensor& x, const BlockPartition& p,
                         std::size_t i, std::size_t pad);

// Default patch padding: 16 pixels clamped to the largest pad the partition
// admits, and never below the denoiser's gradient radius.
std::size_t default_block_pad(const GsDenoiser& d, const BlockPartition& p);

}  // namespace bphila
