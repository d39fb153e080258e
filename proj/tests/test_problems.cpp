#include "doctest.h"

#include <cmath>

#include "bphila/problems.hpp"
#include "support.hpp"

using namespace bphila;

TEST_CASE("default_params") {
  const auto d = default_params(Task::deblur, 0.03);
  CHECK(d.sigma == doctest::Approx(0.054).epsilon(1e-14));
  CHECK(d.lambda == 0.075);
  const auto s = default_params(Task::super_resolution, 0.03);
  CHECK(s.sigma == doctest::Approx(0.06).epsilon(1e-14));
  CHECK(s.lambda == 0.065);
  CHECK(default_params(Task::deblur, 0.0).sigma == 0.0);
  CHECK(default_params(Task::super_resolution, 0.0).sigma == 0.0);
  CHECK_THROWS_AS(default_params(Task::deblur, -1.0), std::invalid_argument);
}

TEST_CASE("degrade") {
  const auto x = testing::random_image(16, 16, 1, 3);
  const auto id = ForwardModel::identity(16, 16);
  CHECK(degrade(id, x, 0.0, 7) == x);
  const auto blur = ForwardModel::blur(16, 16, gaussian_kernel(5, 1.0));
  CHECK(degrade(blur, x, 0.0, 7) == blur.apply(x));

  const auto b1 = degrade(blur, x, 0.03, 11);
  const auto b2 = degrade(blur, x, 0.03, 11);
  CHECK(b1 == b2);
  CHECK_FALSE(degrade(blur, x, 0.03, 12) == b1);
  // Sample noise level of the residual.
  const auto r = b1 - blur.apply(x);
  const double sd = std::sqrt(squared_norm(r) / static_cast<double>(r.size()));
  CHECK(sd == doctest::Approx(0.03).epsilon(0.2));
}

TEST_CASE("bicubic_upsample") {
  SUBCASE("constants") {
    const ImageTensor c(8, 6, 1, 0.37);
    for (std::size_t s : {2u, 3u}) {
      const auto f = bicubic_upsample(c, s);
      CHECK(f.height() == 8 * s);
      CHECK(f.width() == 6 * s);
      for (double v : f.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
    }
  }
  SUBCASE("bilinear ramp away from the seams") {
    const std::size_t h = 12, w = 12, s = 2;
    ImageTensor c(h, w, 1);
    auto ramp = [](double y, double x) { return 0.1 + 0.03 * y + 0.02 * x + 0.004 * x * y; };
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) c(0, y, x) = ramp(y, x);
    const auto f = bicubic_upsample(c, s);
    double worst = 0.0;
    for (std::size_t Y = 2 * s; Y < (h - 3) * s; ++Y) {
      for (std::size_t X = 2 * s; X < (w - 3) * s; ++X) {
        const double e = ramp(static_cast<double>(Y) / s, static_cast<double>(X) / s);
        worst = std::max(worst, std::abs(f(0, Y, X) - e));
      }
    }
    CHECK(worst <= 1e-6);
  }
  SUBCASE("sample phase matches the downsampler") {
    const auto c = testing::random_image(6, 6, 1, 5);
    const auto f = bicubic_upsample(c, 2);
    const auto back = ForwardModel::downsample(12, 12, 2).apply(f);
    CHECK(testing::max_abs_diff(back.data(), c.data()) <= 1e-14);
  }
  CHECK_THROWS_AS(bicubic_upsample(ImageTensor(4, 4), 0), std::invalid_argument);
}

TEST_CASE("initial_point") {
  ProblemSpec spec;
  const auto b = testing::random_image(8, 8, 1, 9);
  CHECK(initial_point(spec, b) == b);
  spec.task = Task::super_resolution;
  spec.scale = 2;
  CHECK(initial_point(spec, b).height() == 16);
}

TEST_CASE("procedural images") {
  for (const char* name : {"checkerboard", "blobs", "texture"}) {
    CHECK(is_procedural(name));
    const auto x = procedural_image(name, 16, 20, 3, 4);
    CHECK(x.height() == 16);
    CHECK(x.width() == 20);
    for (double v : x.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(procedural_image(name, 16, 20, 3, 4) == x);
  }
  CHECK_FALSE(is_procedural("lena.png"));
  CHECK_THROWS_AS(procedural_image("nope", 8, 8, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(procedural_image("blobs", 8, 8, 2, 0), std::invalid_argument);
}

TEST_CASE("Objective consistency") {
  for (DenoiserKind kind : {DenoiserKind::linear, DenoiserKind::tiny_convnet}) {
    for (Task task : {Task::deblur, Task::super_resolution}) {
      ProblemSpec spec;
      spec.task = task;
      spec.height = 16;
      spec.width = 16;
      spec.kernel_size = 7;
      spec.seed = 21;
      DenoiserSpec ds;
      ds.kind = kind;
      const Problem pb = build_problem(spec, ds);
      const auto& obj = pb.objective;
      const auto x = testing::random_image(16, 16, 1, 22);
      // Recompute through independent module calls.
      const ForwardModel A = make_forward_model(pb.spec);
      const auto r = A.apply(x) - pb.data;
      const auto den = obj.regularizer().denoiser;
      const auto u = x - den->denoise(x);
      const double expect = 0.5 * squared_norm(r) + 0.5 * obj.lambda() * squared_norm(u);
      CHECK(obj.value(x) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(obj.value(x) >= 0.0);
      CHECK(obj.fidelity(x) + obj.regularization(x) == obj.value(x));
    }
  }
}

TEST_CASE("all-smooth gradient matches finite differences") {
  for (DenoiserKind kind : {DenoiserKind::linear, DenoiserKind::tiny_convnet}) {
    ProblemSpec spec;
    spec.height = 8;
    spec.width = 8;
    spec.kernel_size = 5;
    spec.seed = 3;
    DenoiserSpec ds;
    ds.kind = kind;
    const Problem pb = build_problem(spec, ds);
    const auto x = testing::random_image(8, 8, 1, 4);
    const auto g = pb.objective.gradient(x);
    const auto dir = testing::random_vector(x.size(), 5);
    const double eps = 1e-5;
    ImageTensor xp = x, xm = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
      xp.data()[j] += eps * dir[j];
      xm.data()[j] -= eps * dir[j];
    }
    const double fd = (pb.objective.value(xp) - pb.objective.value(xm)) / (2 * eps);
    double an = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) an += g.data()[j] * dir[j];
    CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
  }
}

TEST_CASE("build_problem") {
  ProblemSpec spec;
  spec.task = Task::super_resolution;
  spec.height = 16;
  spec.width = 16;
  const Problem pb = build_problem(spec, {});
  CHECK(pb.data.height() == 8);
  CHECK(pb.x0.height() == 16);
  CHECK(pb.objective.lambda() == 0.065);
  CHECK(pb.objective.regularizer().denoiser->noise_level() ==
        doctest::Approx(0.06).epsilon(1e-14));
  CHECK(pb.id == "sr_blobs_16x16_s0");

  spec.width = 15;
  CHECK_THROWS_AS(build_problem(spec, {}), std::invalid_argument);
  spec.width = 16;
  spec.noise = -0.1;
  CHECK_THROWS_AS(build_problem(spec, {}), std::invalid_argument);
}
