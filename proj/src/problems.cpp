#include "bphila/problems.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "bphila/image_io.hpp"

namespace bphila {

Objective::Objective(ForwardModel model, ImageTensor b, Regularizer regularizer)
    : model_(std::move(model)), b_(std::move(b)), reg_(std::move(regularizer)) {
  if (b_.height() != model_.output_height() || b_.width() != model_.output_width()) {
    throw std::invalid_argument("Objective: data " + shape_string(b_) +
                                " does not match the forward model output grid");
  }
  if (!reg_.denoiser) throw std::invalid_argument("Objective: missing denoiser");
  if (!(reg_.weight >= 0.0)) throw std::invalid_argument("Objective: lambda must be >= 0");
}

double Objective::fidelity(const ImageTensor& x) const {
  return 0.5 * squared_distance(model_.apply(x).data(), b_.data());
}

double Objective::regularization(const ImageTensor& x) const {
  if (reg_.weight == 0.0) return 0.0;
  return g_value(reg_, x);
}

ImageTensor Objective::fidelity_gradient(const ImageTensor& x) const {
  return model_.apply_adjoint(model_.apply(x) - b_);
}

ImageTensor Objective::gradient(const ImageTensor& x) const {
  ImageTensor g = fidelity_gradient(x);
  if (reg_.weight != 0.0) axpy(1.0, g_grad(reg_, x).data(), g.data());
  return g;
}

std::string to_string(Task t) { return t == Task::deblur ? "deblur" : "sr"; }

Task task_from_string(const std::string& s) {
  if (s == "deblur") return Task::deblur;
  if (s == "sr" || s == "super-resolution") return Task::super_resolution;
  throw std::invalid_argument("unknown task '" + s + "' (expected deblur or sr)");
}

std::string to_string(DenoiserKind d) { return d == DenoiserKind::linear ? "linear" : "tinynet"; }

DenoiserKind denoiser_kind_from_string(const std::string& s) {
  if (s == "linear") return DenoiserKind::linear;
  if (s == "tinynet") return DenoiserKind::tiny_convnet;
  throw std::invalid_argument("unknown denoiser '" + s + "' (expected linear or tinynet)");
}

DefaultParams default_params(Task task, double noise) {
  if (!(noise >= 0.0)) throw std::invalid_argument("default_params: negative noise level");
  if (task == Task::deblur) return {1.8 * noise, 0.075};
  return {2.0 * noise, 0.065};
}

// ---------------------------------------------------------------------------
// Procedural images

bool is_procedural(const std::string& name) {
  return name == "checkerboard" || name == "blobs" || name == "texture";
}

namespace {

ImageTensor checkerboard(std::size_t h, std::size_t w, std::size_t ch) {
  const std::size_t cell = std::max<std::size_t>(1, std::min(h, w) / 8);
  ImageTensor x(h, w, ch);
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t q = 0; q < w; ++q) {
        const bool on = ((y / cell) + (q / cell) + c) % 2 == 0;
        x(c, y, q) = on ? 0.8 : 0.2;
      }
    }
  }
  return x;
}

ImageTensor blobs(std::size_t h, std::size_t w, std::size_t ch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageTensor x(h, w, ch, 0.1);
  const double scale = static_cast<double>(std::min(h, w));
  for (int j = 0; j < 6; ++j) {
    const double cy = u(rng) * h;
    const double cx = u(rng) * w;
    const double s = (0.06 + 0.12 * u(rng)) * scale;
    std::vector<double> amp(ch);
    for (double& a : amp) a = 0.3 + 0.5 * u(rng);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t q = 0; q < w; ++q) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(q) - cx;
        const double e = std::exp(-(dy * dy + dx * dx) / (2 * s * s));
        for (std::size_t c = 0; c < ch; ++c) x(c, y, q) += amp[c] * e;
      }
    }
  }
  for (double& v : x.data()) v = std::clamp(v, 0.0, 1.0);
  return x;
}

ImageTensor texture(std::size_t h, std::size_t w, std::size_t ch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageTensor noise(h, w, ch);
  for (double& v : noise.data()) v = u(rng);
  const std::size_t ks = std::min<std::size_t>(7, 2 * (std::min(h, w) / 2) - 1);
  ImageTensor x = ForwardModel::blur(h, w, gaussian_kernel(std::max<std::size_t>(1, ks), 1.2))
                      .apply(noise);
  const auto [lo, hi] = std::minmax_element(x.data().begin(), x.data().end());
  const double a = *lo;
  const double span = std::max(*hi - a, 1e-12);
  for (double& v : x.data()) v = 0.1 + 0.8 * (v - a) / span;
  return x;
}

}  // namespace

ImageTensor procedural_image(const std::string& name, std::size_t h, std::size_t w,
                             std::size_t ch, std::uint64_t seed) {
  if (h == 0 || w == 0 || (ch != 1 && ch != 3)) {
    throw std::invalid_argument("procedural_image: need a nonempty grid with 1 or 3 channels");
  }
  if (name == "checkerboard") return checkerboard(h, w, ch);
  if (name == "blobs") return blobs(h, w, ch, seed);
  if (name == "texture") return texture(h, w, ch, seed);
  throw std::invalid_argument("unknown procedural image '" + name + "'");
}

// ---------------------------------------------------------------------------

ForwardModel make_forward_model(const ProblemSpec& spec) {
  const BlurKernel k = spec.kernel_path.empty() ? gaussian_kernel(spec.kernel_size, spec.kernel_std)
                                                : load_kernel(spec.kernel_path);
  if (spec.task == Task::deblur) return ForwardModel::blur(spec.height, spec.width, k);
  return ForwardModel::blur_downsample(spec.height, spec.width, k, spec.scale);
}

std::shared_ptr<const GsDenoiser> make_denoiser(const DenoiserSpec& spec, std::size_t channels,
                                                double sigma) {
  if (spec.kind == DenoiserKind::linear) {
    return std::make_shared<LinearConvDenoiser>(gaussian_kernel(spec.kernel_size, spec.kernel_std),
                                                sigma);
  }
  if (!spec.weights_path.empty()) {
    auto net = TinyConvNet::load(spec.weights_path);
    if (net.image_channels() != channels) {
      throw std::invalid_argument("denoiser weights expect " +
                                  std::to_string(net.image_channels()) + " channels");
    }
    return std::make_shared<TinyConvNet>(std::move(net));
  }
  TinyConvNet::Options o;
  o.image_channels = channels;
  o.hidden_channels = spec.hidden_channels;
  o.layers = spec.layers;
  o.kernel_size = spec.conv_size;
  o.noise_level = sigma;
  o.seed = spec.seed;
  return std::make_shared<TinyConvNet>(TinyConvNet::random(o));
}

ImageTensor degrade(const ForwardModel& model, const ImageTensor& x_true, double noise,
                    std::uint64_t seed) {
  if (!(noise >= 0.0)) throw std::invalid_argument("degrade: negative noise level");
  ImageTensor b = model.apply(x_true);
  if (noise == 0.0) return b;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> xi(0.0, 1.0);
  for (double& v : b.data()) v += noise * xi(rng);
  return b;
}

namespace {

double catmull_rom(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

// Upsamples one axis of a row-major plane (rows x cols) along columns.
std::vector<double> upsample_rows(const std::vector<double>& in, std::size_t rows,
                                  std::size_t cols, std::size_t s) {
  std::vector<double> out(rows * cols * s);
  const auto n = static_cast<long>(cols);
  for (std::size_t X = 0; X < cols * s; ++X) {
    const double u = static_cast<double>(X) / static_cast<double>(s);
    const double base = std::floor(u);
    const double t = u - base;
    const long i0 = static_cast<long>(base);
    const double wts[4] = {catmull_rom(t + 1.0), catmull_rom(t), catmull_rom(1.0 - t),
                           catmull_rom(2.0 - t)};
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (long j = 0; j < 4; ++j) {
        const long idx = ((i0 - 1 + j) % n + n) % n;
        acc += wts[j] * in[r * cols + static_cast<std::size_t>(idx)];
      }
      out[r * cols * s + X] = acc;
    }
  }
  return out;
}

std::vector<double> transpose(const std::vector<double>& in, std::size_t rows, std::size_t cols) {
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
  }
  return out;
}

}  // namespace

ImageTensor bicubic_upsample(const ImageTensor& coarse, std::size_t s) {
  if (s == 0) throw std::invalid_argument("bicubic_upsample: zero factor");
  const std::size_t h = coarse.height();
  const std::size_t w = coarse.width();
  ImageTensor out(h * s, w * s, coarse.channels());
  for (std::size_t c = 0; c < coarse.channels(); ++c) {
    std::vector<double> plane(coarse.plane(c).begin(), coarse.plane(c).end());
    auto wide = upsample_rows(plane, h, w, s);                  // h x ws
    auto tall = upsample_rows(transpose(wide, h, w * s), w * s, h, s);  // ws x hs
    const auto fine = transpose(tall, w * s, h * s);            // hs x ws
    std::copy(fine.begin(), fine.end(), out.plane(c).begin());
  }
  return out;
}

ImageTensor initial_point(const ProblemSpec& spec, const ImageTensor& b) {
  if (spec.task == Task::deblur) return b;
  return bicubic_upsample(b, spec.scale);
}

Problem build_problem(const ProblemSpec& in, const DenoiserSpec& dspec) {
  ProblemSpec spec = in;
  ImageTensor truth;
  if (is_procedural(spec.image)) {
    truth = procedural_image(spec.image, spec.height, spec.width, spec.channels,
                             spec.seed ^ 0x9e3779b97f4a7c15ULL);
  } else {
    truth = io::read_image(spec.image);
    spec.height = truth.height();
    spec.width = truth.width();
    spec.channels = truth.channels();
  }
  if (!(spec.noise >= 0.0)) throw std::invalid_argument("problem: noise must be >= 0");
  if (spec.task == Task::super_resolution &&
      (spec.scale == 0 || spec.height % spec.scale != 0 || spec.width % spec.scale != 0)) {
    throw std::invalid_argument("problem: image dimensions must be divisible by the scale factor");
  }
  const DefaultParams dp = default_params(spec.task, spec.noise);
  if (!spec.lambda) spec.lambda = dp.lambda;
  if (!spec.sigma) spec.sigma = dp.sigma;
  if (!(*spec.lambda >= 0.0)) throw std::invalid_argument("problem: lambda must be >= 0");
  if (!(*spec.sigma >= 0.0)) throw std::invalid_argument("problem: sigma must be >= 0");

  ForwardModel model = make_forward_model(spec);
  ImageTensor b = degrade(model, truth, spec.noise, spec.seed);
  ImageTensor x0 = initial_point(spec, b);
  Regularizer reg{make_denoiser(dspec, spec.channels, *spec.sigma), *spec.lambda};
  std::string id = to_string(spec.task) + "_" +
                   (is_procedural(spec.image) ? spec.image
                                              : std::filesystem::path(spec.image).stem().string()) +
                   "_" + std::to_string(spec.height) + "x" + std::to_string(spec.width) + "_s" +
                   std::to_string(spec.seed);
  Objective objective(std::move(model), b, std::move(reg));
  return Problem{spec, std::move(truth), std::move(b), std::move(x0), std::move(objective),
                 std::move(id)};
}

}  // namespace bphila
