#pragma once

// Experiment fixtures: the PnP objective
//   F(x) = ½‖Ax − b‖² + (λ/2)‖x − N_σ(x)‖²,
// synthetic degraded data, default parameters and initial points.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "bphila/denoiser.hpp"
#include "bphila/forward_model.hpp"
#include "bphila/tensor.hpp"

namespace bphila {

class Objective {
 public:
  Objective(ForwardModel model, ImageTensor b, Regularizer regularizer);

  const ForwardModel& model() const noexcept { return model_; }
  const ImageTensor& data() const noexcept { return b_; }
  const Regularizer& regularizer() const noexcept { return reg_; }
  double lambda() const noexcept { return reg_.weight; }

  // ½‖Ax − b‖²
  double fidelity(const ImageTensor& x) const;
  // λ g_σ(x)
  double regularization(const ImageTensor& x) const;
  double value(const ImageTensor& x) const { return fidelity(x) + regularization(x); }

  // A^T (Ax − b)
  ImageTensor fidelity_gradient(const ImageTensor& x) const;
  // ∇F(x)
  ImageTensor gradient(const ImageTensor& x) const;

 private:
  ForwardModel model_;
  ImageTensor b_;
  Regularizer reg_;
};

enum class Task { deblur, super_resolution };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

enum class DenoiserKind { linear, tiny_convnet };

std::string to_string(DenoiserKind d);
DenoiserKind denoiser_kind_from_string(const std::string& s);

struct DenoiserSpec {
  DenoiserKind kind = DenoiserKind::linear;
  // LinearConvDenoiser: Gaussian smoothing kernel.
  std::size_t kernel_size = 5;
  double kernel_std = 1.0;
  // TinyConvNet.
  std::size_t layers = 2;
  std::size_t hidden_channels = 8;
  std::size_t conv_size = 3;
  std::uint64_t seed = 1234;
  std::string weights_path;  // loads a weight file instead of seeding

  friend bool operator==(const DenoiserSpec&, const DenoiserSpec&) = default;
};

struct ProblemSpec {
  Task task = Task::deblur;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 1;
  std::string image = "blobs";  // procedural name or a PNG/PGM/PPM path
  std::size_t kernel_size = 25;
  double kernel_std = 1.6;
  std::string kernel_path;  // optional text kernel, overrides the Gaussian
  std::size_t scale = 2;    // super-resolution factor
  double noise = 0.03;      // ν
  std::optional<double> lambda;   // defaults from default_params
  std::optional<double> sigma;    // denoiser noise level, defaults from default_params
  std::uint64_t seed = 0;

  friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

struct DefaultParams {
  double sigma;
  double lambda;
};

// Deblurring: σ = 1.8ν, λ = 0.075. Super-resolution: σ = 2ν, λ = 0.065.
DefaultParams default_params(Task task, double noise);

// Procedural ground truths in [0, 1]: "checkerboard", "blobs", "texture".
ImageTensor procedural_image(const std::string& name, std::size_t height, std::size_t width,
                             std::size_t channels, std::uint64_t seed);
bool is_procedural(const std::string& name);

ForwardModel make_forward_model(const ProblemSpec& spec);
std::shared_ptr<const GsDenoiser> make_denoiser(const DenoiserSpec& spec, std::size_t channels,
                                                double sigma);

// b = A x_true + ν ξ with ξ standard Gaussian from a seeded mt19937_64.
ImageTensor degrade(const ForwardModel& model, const ImageTensor& x_true, double noise,
                    std::uint64_t seed);

// Catmull-Rom (a = −0.5) upsampling by an integer factor with circular
// boundary. Fine pixel X reads the coarse grid at X / s, i.e. the pixel-center
// convention shifted by s/2 − 0.5 so that sample 0 of each cell (the phase
// kept by the downsampler) lands on the coarse pixel.
ImageTensor bicubic_upsample(const ImageTensor& coarse, std::size_t factor);

// Deblurring: x₀ = b. Super-resolution: bicubic upsampling of b.
ImageTensor initial_point(const ProblemSpec& spec, const ImageTensor& b);

struct Problem {
  ProblemSpec spec;
  ImageTensor ground_truth;
  ImageTensor data;
  ImageTensor x0;
  Objective objective;
  std::string id;
};

// Assembles ground truth, data, denoiser and objective from a spec.
Problem build_problem(const ProblemSpec& spec, const DenoiserSpec& denoiser);

}  // namespace bphila
