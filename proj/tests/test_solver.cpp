#include "doctest.h"

#include <cmath>
#include <deque>

#include "bphila/diagnostics.hpp"
#include "bphila/solver.hpp"
#include "support.hpp"

using namespace bphila;

namespace {

// 16×16 deblur with the linear denoiser.
Problem small_deblur(std::uint64_t seed = 0, std::size_t size = 16) {
  ProblemSpec spec;
  spec.height = size;
  spec.width = size;
  spec.kernel_size = 9;
  spec.kernel_std = 1.6;
  spec.seed = seed;
  return build_problem(spec, {});
}

PartitionScheme scheme_for(std::size_t N) {
  if (N == 1) return PartitionScheme::full();
  if (N == 2) return PartitionScheme::halves();
  return PartitionScheme::quadrants();
}

// Dense straight-line reference of the whole iteration: every operator is an
// explicit matrix and the block prox replays the same dual recursion.
struct DenseOracle {
  Eigen::MatrixXd A, G;  // G = λ (I − B)^T (I − B)
  Eigen::VectorXd b;
  double lambda = 0.0;
  std::vector<std::vector<Eigen::Index>> blocks;

  double F(const Eigen::VectorXd& x) const {
    return 0.5 * (A * x - b).squaredNorm() + 0.5 * x.dot(G * x);
  }

  struct Rec {
    double alpha, beta, h, F, psi;
    std::size_t m, dual;
    Step6Branch branch;
  };

  std::vector<Rec> run(Eigen::VectorXd x0, const SolverConfig& c, std::size_t iters,
                       Eigen::VectorXd& x_out) const {
    const std::size_t N = blocks.size();
    const double gamma = c.effective_gamma();
    const VariantTraits vt = traits(c.variant);
    std::deque<Eigen::VectorXd> win(N + 1, x0);
    std::vector<Eigen::VectorXd> prev(N);
    double Fx = F(x0);
    std::vector<Rec> out;
    const Eigen::Index n = x0.size();
    for (std::size_t k = 0; k < iters; ++k) {
      const std::size_t i = k % N;
      const auto& idx = blocks[i];
      const Eigen::Index nb = static_cast<Eigen::Index>(idx.size());
      const Eigen::VectorXd& x = win.front();
      const Eigen::VectorXd& xo = win.back();
      const Eigen::VectorXd gfull = G * x;
      Eigen::VectorXd g(nb), xi(nb), xoi(nb);
      for (Eigen::Index j = 0; j < nb; ++j) {
        g[j] = gfull[idx[j]];
        xi[j] = x[idx[j]];
        xoi[j] = xo[idx[j]];
      }
      Rec r{};
      if (vt.barzilai_borwein && k >= N) {
        const double ny = (g - prev[i]).norm();
        r.alpha = ny < 1e-30 ? c.alpha_max
                             : std::clamp((xi - xoi).norm() / ny, c.alpha_min, c.alpha_max);
      } else if (vt.barzilai_borwein) {
        r.alpha = c.alpha_max;
      } else {
        r.alpha = std::clamp(1.0 / lambda, c.alpha_min, c.alpha_max);
      }
      const double q0 = static_cast<double>(k / N);
      r.beta = vt.inertia ? std::clamp((q0 - 1) / (q0 + 2), 0.0, c.beta_max) : 0.0;
      const double a = r.alpha;
      const Eigen::VectorXd q = g - (r.beta / a) * (xi - xoi);
      const Eigen::VectorXd xbar = xi - a * q;

      Eigen::MatrixXd M(A.rows(), nb);
      Eigen::VectorXd outside = x;
      Eigen::VectorXd mask = Eigen::VectorXd::Ones(n);
      for (Eigen::Index j = 0; j < nb; ++j) {
        M.col(j) = A.col(idx[j]);
        outside[idx[j]] = 0.0;
        mask[idx[j]] = 0.0;
      }
      const Eigen::VectorXd bi = b - A * outside;
      const Eigen::VectorXd cvec = M * xbar - bi;
      const double phi_x = 0.5 * (M * xi - bi).squaredNorm();
      const Eigen::MatrixXd K =
          Eigen::MatrixXd::Identity(A.rows(), A.rows()) + a * A * A.transpose();
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
      const Eigen::MatrixXd APA = A * mask.asDiagonal() * A.transpose();
      Eigen::VectorXd v = Eigen::VectorXd::Zero(A.rows());
      Eigen::VectorXd y;
      const double factor = 2.0 / (2.0 + c.tau);
      for (std::size_t l = 0;; ++l) {
        if (l >= 1) {
          const Eigen::VectorXd mtv = M.transpose() * v;
          const Eigen::VectorXd yl = xbar - a * mtv;
          const double h = q.dot(yl - xi) + (yl - xi).squaredNorm() / (2 * a) +
                           0.5 * (M * yl - bi).squaredNorm() - phi_x;
          double psi = -0.5 * v.squaredNorm() + v.dot(cvec) - 0.5 * a * mtv.squaredNorm() -
                       0.5 * a * q.squaredNorm() - phi_x;
          if (!(h <= factor * psi)) {
            const Eigen::VectorXd res = cvec - v - a * M * mtv;
            const double rr = res.squaredNorm();
            if (rr > 0.0) {
              psi = std::max(psi, psi + 0.5 * rr * rr /
                                            (rr + a * (M.transpose() * res).squaredNorm()));
            }
          }
          if (h <= factor * psi) {
            y = yl;
            r.h = h;
            r.dual = l;
            break;
          }
          const double level = std::max(
              1e-12, 64 * std::numeric_limits<double>::epsilon() * (phi_x + 0.5 * a * q.squaredNorm()));
          if (std::abs(h) <= level && std::abs(psi) <= level) {
            y = xi;
            r.h = 0.0;
            r.dual = l;
            break;
          }
        }
        REQUIRE(l < c.dual.max_iterations);
        v = lu.solve(cvec + a * APA * v);
      }
      const Eigen::VectorXd d = y - xi;
      const double inertia = (xi - xoi).squaredNorm();
      auto at = [&](double lam) {
        Eigen::VectorXd z = x;
        for (Eigen::Index j = 0; j < nb; ++j) z[idx[j]] += lam * d[j];
        return z;
      };
      double lam = 1.0;
      std::size_t m = 0;
      double Ffull = F(at(1.0)), Flam = Ffull;
      while (Flam + 0.5 * gamma * lam * lam * d.squaredNorm() >
             Fx + 0.5 * gamma * inertia + c.armijo_sigma * lam * r.h) {
        ++m;
        REQUIRE(m <= c.max_backtracks);
        lam *= c.delta;
        Flam = F(at(lam));
      }
      Eigen::VectorXd next;
      if (Ffull + 0.5 * gamma * d.squaredNorm() <
          Flam + 0.5 * gamma * lam * lam * d.squaredNorm()) {
        next = at(1.0);
        r.branch = Step6Branch::full;
      } else {
        next = at(lam);
        r.branch = Step6Branch::damped;
      }
      r.m = m;
      prev[i] = g;
      win.push_front(next);
      win.pop_back();
      Fx = F(win.front());
      r.F = Fx;
      double gaps = 0.0;
      for (std::size_t j = 0; j + 1 < win.size(); ++j) gaps += (win[j] - win[j + 1]).squaredNorm();
      r.psi = Fx + 0.5 * gamma * gaps;
      out.push_back(r);
    }
    x_out = win.front();
    return out;
  }
};

DenseOracle make_oracle(const Problem& pb, const BlockPartition& part) {
  DenseOracle o;
  const std::size_t h = pb.spec.height, w = pb.spec.width;
  const auto& obj = pb.objective;
  o.A = testing::materialize([&](const ImageTensor& v) { return obj.model().apply(v); }, h, w);
  const Eigen::MatrixXd B = testing::materialize(
      [&](const ImageTensor& v) { return obj.regularizer().denoiser->denoise(v); }, h, w);
  const Eigen::MatrixXd IB = Eigen::MatrixXd::Identity(B.rows(), B.cols()) - B;
  o.lambda = obj.lambda();
  o.G = o.lambda * IB.transpose() * IB;
  o.b = testing::to_eigen(pb.data);
  for (std::size_t i = 0; i < part.block_count(); ++i) {
    const Rect& r = part.block(i);
    std::vector<Eigen::Index> idx;
    for (std::size_t y = r.y0; y < r.y0 + r.h; ++y)
      for (std::size_t x = r.x0; x < r.x0 + r.w; ++x)
        idx.push_back(static_cast<Eigen::Index>(y * w + x));
    o.blocks.push_back(idx);
  }
  return o;
}

}  // namespace

TEST_CASE("variant table") {
  CHECK(traits(Variant::v1).barzilai_borwein);
  CHECK(traits(Variant::v1).inertia);
  CHECK(traits(Variant::v2).barzilai_borwein);
  CHECK_FALSE(traits(Variant::v2).inertia);
  CHECK_FALSE(traits(Variant::v3).barzilai_borwein);
  CHECK(traits(Variant::v3).inertia);
  CHECK_FALSE(traits(Variant::v4).barzilai_borwein);
  CHECK_FALSE(traits(Variant::v4).inertia);
  for (int v = 0; v < 8; ++v) {
    const auto t = traits(static_cast<Variant>(v));
    const auto u = traits(static_cast<Variant>(v % 4));
    CHECK(t.splitting == (v < 4 ? Splitting::prox_fidelity : Splitting::all_smooth));
    CHECK(t.barzilai_borwein == u.barzilai_borwein);
    CHECK(t.inertia == u.inertia);
    CHECK(variant_from_string(to_string(static_cast<Variant>(v))) == static_cast<Variant>(v));
  }
  CHECK_THROWS_AS(variant_from_string("v9"), std::invalid_argument);
  SolverConfig c;
  c.variant = Variant::v2;
  CHECK(c.effective_gamma() == 0.0);
  c.variant = Variant::v3;
  CHECK(c.effective_gamma() == 1e-4);
}

TEST_CASE("SolverConfig::validate") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto edit) {
    SolverConfig c;
    edit(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  bad([](SolverConfig& c) { c.alpha_min = 0.0; });
  bad([](SolverConfig& c) { c.alpha_max = 1e-3; });
  bad([](SolverConfig& c) { c.delta = 1.0; });
  bad([](SolverConfig& c) { c.armijo_sigma = 0.0; });
  bad([](SolverConfig& c) { c.gamma = -1.0; });
  bad([](SolverConfig& c) { c.tau = -1.0; });
  bad([](SolverConfig& c) { c.mu = 0.5; });
}

TEST_CASE("bb_steplength") {
  const std::vector<double> zero(4, 0.0);
  CHECK(bb_steplength(zero, zero, 1e-2, 1e3) == 1e3);
  const std::vector<double> s{1e5, 0.0}, y{1.0, 0.0};
  CHECK(bb_steplength(s, y, 1e-2, 1e3) == 1e3);
  CHECK(bb_steplength(y, s, 1e-2, 1e3) == 1e-2);
  // Block Hessian c I on a 2-pixel block: y = c s.
  const double c = 3.7;
  const std::vector<double> s2{0.3, -1.1}, y2{c * 0.3, c * -1.1};
  CHECK(bb_steplength(s2, y2, 1e-3, 1e3) == doctest::Approx(1.0 / c).epsilon(1e-15));
}

TEST_CASE("fista_beta") {
  const std::size_t N = 4;
  for (std::size_t k = 0; k < N; ++k) CHECK(fista_beta(k, N, 1.0) == 0.0);
  CHECK(fista_beta(N, N, 1.0) == 0.0);
  CHECK(fista_beta(3 * N, N, 1.0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(fista_beta(3 * N + 3, N, 1.0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(fista_beta(1000 * N, N, 0.5) == 0.5);
}

TEST_CASE("merit_value") {
  std::deque<ImageTensor> w;
  for (int j = 0; j < 5; ++j) w.push_back(testing::random_image(6, 5, 1, 40 + j));
  CHECK(merit_value(w, 0.0, 2.5).psi == 2.5);
  const std::deque<ImageTensor> same(5, w.front());
  CHECK(merit_value(same, 1.0, 2.5).psi == 2.5);
  double gaps = 0.0;
  for (std::size_t j = 0; j + 1 < w.size(); ++j) {
    for (std::size_t e = 0; e < w[j].size(); ++e) {
      const double d = w[j].data()[e] - w[j + 1].data()[e];
      gaps += d * d;
    }
  }
  const auto m = merit_value(w, 0.3, 1.25);
  CHECK(std::abs(m.gaps - gaps) <= 1e-12);
  CHECK(std::abs(m.psi - (1.25 + 0.15 * gaps)) <= 1e-12);
}

TEST_CASE("line_search") {
  SUBCASE("zero direction") {
    auto F = [](double) { return 1.0; };
    const auto r = line_search(F, 1.0, 0.0, 0.0, 0.0, 1e-4, 1e-4, 0.5, 60);
    CHECK(r.m == 0);
    CHECK(r.lambda == 1.0);
  }
  SUBCASE("scalar quadratic against enumeration") {
    // F(x) = x²/2 at x = 1, exact prox of the zero function: ỹ = 1 − α.
    for (double alpha : {0.1, 0.5, 1.9, 2.5, 7.0, 40.0, 900.0}) {
      const double x = 1.0, d = -alpha;
      const double h = -0.5 * alpha;
      const double sigma = 1e-4, delta = 0.5;
      auto F = [&](double lam) { return 0.5 * (x + lam * d) * (x + lam * d); };
      std::size_t m_ref = 0;
      double lam = 1.0;
      while (!(F(lam) <= 0.5 + sigma * lam * h)) {
        lam *= delta;
        ++m_ref;
      }
      const auto r = line_search(F, 0.5, 0.0, d * d, h, 0.0, sigma, delta, 60);
      CHECK(r.m == m_ref);
      CHECK(r.lambda == lam);
      if (alpha < 1.9) CHECK(r.m == 0);
      if (alpha > 2.0) CHECK(r.m > 0);
    }
  }
  SUBCASE("inertial slack") {
    auto F = [](double lam) { return 1.0 + 0.1 * lam; };
    // Without slack no step is admissible; the inertial term pays for it.
    CHECK_THROWS_AS(line_search(F, 1.0, 0.0, 1.0, -1.0, 0.0, 1e-4, 0.5, 10),
                    LineSearchFailure);
    const auto r = line_search(F, 1.0, 2.0, 1.0, -1.0, 0.1, 1e-4, 0.5, 10);
    CHECK(r.m == 1);
  }
  SUBCASE("failure carries both sides") {
    auto F = [](double lam) { return 1.0 + lam; };
    try {
      line_search(F, 1.0, 0.0, 1.0, -1.0, 0.0, 1e-4, 0.5, 5, 17);
      FAIL("expected LineSearchFailure");
    } catch (const LineSearchFailure& e) {
      CHECK(e.lhs() == doctest::Approx(1.0 + 1.0 / 32));
      CHECK(e.rhs() == doctest::Approx(1.0 - 1e-4 / 32));
      CHECK(std::string(e.what()).find("k = 17") != std::string::npos);
    }
  }
  SUBCASE("roundoff regime keeps the iterate") {
    auto F = [](double) { return 1.0 + 1e-15; };
    const auto r = line_search(F, 1.0, 0.0, 1.0, -1e-14, 0.0, 1e-4, 0.5, 5);
    CHECK(r.stalled);
  }
}

TEST_CASE("step: stationary start") {
  // Identity forward model: the minimizer solves (I + G) x = b in closed form.
  const std::size_t n = 8;
  const auto b = testing::random_image(n, n, 1, 77);
  auto den = std::make_shared<LinearConvDenoiser>(gaussian_kernel(3, 0.8), 0.05);
  Objective obj(ForwardModel::identity(n, n), b, Regularizer{den, 0.5});
  const Eigen::MatrixXd B =
      testing::materialize([&](const ImageTensor& v) { return den->denoise(v); }, n, n);
  const Eigen::MatrixXd IB = Eigen::MatrixXd::Identity(n * n, n * n) - B;
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n * n, n * n) + 0.5 * IB.transpose() * IB;
  const ImageTensor xs = testing::from_eigen(H.ldlt().solve(testing::to_eigen(b)), n, n);
  CHECK(std::sqrt(squared_norm(obj.gradient(xs))) <= 1e-12);
  for (int v = 0; v < 8; ++v) {
    SolverConfig c;
    c.variant = static_cast<Variant>(v);
    // The residual gradient at x* is roundoff; steps move by about α times it.
    c.alpha_max = 10.0;
    const auto part = make_partition(n, n, PartitionScheme::quadrants());
    const auto p = make_solver_problem(obj, part, c);
    SolverState st = init_state(p, xs, c);
    for (int k = 0; k < 8; ++k) step(st, p, c);
    CHECK(testing::max_abs_diff(st.x().data(), xs.data()) <= 1e-10);
  }
}

TEST_CASE("step: single-block mutation and branch choice") {
  const Problem pb = small_deblur(3);
  SolverConfig c;
  const auto part = make_partition(16, 16, PartitionScheme::quadrants());
  const auto p = make_solver_problem(pb.objective, part, c);
  SolverState st = init_state(p, pb.x0, c);
  for (int k = 0; k < 24; ++k) {
    const ImageTensor before = st.x();
    const auto& r = step(st, p, c);
    CHECK(r.block == static_cast<std::size_t>(k) % 4);
    CHECK(r.outside_change == 0.0);
    const Rect& R = part.block(r.block);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x)
        if (!R.contains(y, x)) CHECK(st.x()(0, y, x) == before(0, y, x));
    // Ties go to the damped branch, which is the same point when λ = 1.
    if (r.lambda == 1.0) CHECK(r.branch == Step6Branch::damped);
    CHECK(r.h <= 1e-12);
    CHECK(st.window.size() == 5);
  }
}

TEST_CASE("step matches the dense straight-line oracle") {
  const Problem pb = small_deblur(5);
  const auto part = make_partition(16, 16, PartitionScheme::quadrants());
  const DenseOracle oracle = make_oracle(pb, part);
  for (Variant v : {Variant::v1, Variant::v4}) {
    SolverConfig c;
    c.variant = v;
    c.max_iters = 200;
    c.epsilon = 0.0;
    const auto p = make_solver_problem(pb.objective, part, c);
    SolverState st = init_state(p, pb.x0, c);
    Eigen::VectorXd x_ref;
    const auto ref = oracle.run(testing::to_eigen(pb.x0), c, 200, x_ref);
    CHECK(std::abs(st.F - oracle.F(testing::to_eigen(pb.x0))) <= 1e-12);
    double psi_prev = merit_value(st.window, c.effective_gamma(), st.F).psi;
    const double g0 = std::sqrt(squared_norm(pb.objective.gradient(pb.x0)));
    std::size_t mismatched = 0;
    for (std::size_t k = 0; k < 200; ++k) {
      const auto& r = step(st, p, c);
      const auto& e = ref[k];
      const bool same = r.m == e.m && r.branch == e.branch && r.dual_iters == e.dual &&
                        std::abs(r.alpha - e.alpha) <= 1e-8 * e.alpha &&
                        std::abs(r.beta - e.beta) <= 1e-12 &&
                        std::abs(r.F - e.F) <= 1e-10 * e.F &&
                        std::abs(r.psi - e.psi) <= 1e-10 * e.psi;
      if (!same) ++mismatched;
      CHECK(r.psi <= psi_prev + 1e-9);
      psi_prev = r.psi;
    }
    CHECK(mismatched == 0);
    CHECK(testing::max_abs_diff(st.x().data(), testing::from_eigen(x_ref, 16, 16).data()) <=
          1e-8);
    CHECK(std::sqrt(squared_norm(pb.objective.gradient(st.x()))) < g0);
  }
}

TEST_CASE("v4 with one block is classical forward-backward") {
  const Problem pb = small_deblur(8);
  const auto part = make_partition(16, 16, PartitionScheme::full());
  SolverConfig c;
  c.variant = Variant::v4;
  // With a single block the first dual step is already the exact prox, so the
  // default τ reproduces the exact backward step.
  c.max_iters = 50;
  c.epsilon = 0.0;
  const auto p = make_solver_problem(pb.objective, part, c);
  const DenseOracle o = make_oracle(pb, part);
  const double alpha = 1.0 / pb.objective.lambda();
  const Eigen::MatrixXd lhs =
      Eigen::MatrixXd::Identity(256, 256) + alpha * o.A.transpose() * o.A;
  const Eigen::LLT<Eigen::MatrixXd> llt(lhs);
  Eigen::VectorXd x = testing::to_eigen(pb.x0);
  SolverState st = init_state(p, pb.x0, c);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    x = llt.solve(x - alpha * o.G * x + alpha * o.A.transpose() * o.b);
    const auto& r = step(st, p, c);
    CHECK(r.m == 0);
    worst = std::max(worst, (testing::to_eigen(st.x()) - x).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("run") {
  SUBCASE("huge epsilon stops after one sweep") {
    const Problem pb = small_deblur(1);
    SolverConfig c;
    c.epsilon = 1e9;
    const auto part = make_partition(16, 16, PartitionScheme::quadrants());
    const auto r = run(make_solver_problem(pb.objective, part, c), pb.x0, c);
    CHECK(r.trace.records.size() == 4);
    CHECK(r.trace.converged);
    CHECK(r.trace.sweeps() == 1);
  }
  SUBCASE("no regularization, identity model converges to b") {
    const auto b = testing::random_image(16, 16, 1, 61);
    auto den = std::make_shared<LinearConvDenoiser>(gaussian_kernel(5, 1.0), 0.05);
    Objective obj(ForwardModel::identity(16, 16), b, Regularizer{den, 0.0});
    for (Variant v : {Variant::v1, Variant::v2, Variant::v5}) {
      SolverConfig c;
      c.variant = v;
      c.epsilon = 0.0;
      c.max_iters = 400;
      const auto part = make_partition(16, 16, PartitionScheme::quadrants());
      const auto r = run(make_solver_problem(obj, part, c), ImageTensor(16, 16, 1, 0.5), c);
      CHECK(std::sqrt(squared_distance(r.x.data(), b.data())) <= 1e-6);
    }
  }
  SUBCASE("BB needs no more iterations than the fixed steplength") {
    const Problem pb = small_deblur(2);
    std::size_t iters[2];
    int j = 0;
    for (Variant v : {Variant::v2, Variant::v4}) {
      SolverConfig c;
      c.variant = v;
      c.max_iters = 4000;
      const auto part = make_partition(16, 16, PartitionScheme::full());
      const auto r = run(make_solver_problem(pb.objective, part, c), pb.x0, c);
      CHECK(r.trace.converged);
      iters[j++] = r.trace.records.size();
    }
    CHECK(iters[0] <= iters[1]);
  }
  SUBCASE("trace bookkeeping") {
    const Problem pb = small_deblur(4);
    SolverConfig c;
    c.max_iters = 40;
    c.epsilon = 0.0;
    c.log_grad_norms = true;
    const auto part = make_partition(16, 16, PartitionScheme::halves());
    const auto r = run(make_solver_problem(pb.objective, part, c, &pb.ground_truth), pb.x0, c);
    CHECK(r.trace.variant == "v1");
    CHECK(r.trace.blocks == 2);
    for (std::size_t k = 0; k < r.trace.records.size(); ++k) {
      CHECK(r.trace.records[k].k == k);
      CHECK(std::isfinite(r.trace.records[k].grad_norm));
      CHECK(std::isfinite(r.trace.records[k].psnr));
    }
    CHECK(r.trace.sweep_F.size() == r.trace.records.size() / 2 + 1);
    CHECK(r.trace.F0 == pb.objective.value(pb.x0));
    CHECK(r.trace.records.back().F == doctest::Approx(pb.objective.value(r.x)).epsilon(1e-14));
  }
  SUBCASE("divergence guard") {
    const Problem pb = small_deblur(4);
    SolverConfig c;
    c.divergence_threshold = 1e-3;
    const auto part = make_partition(16, 16, PartitionScheme::full());
    CHECK_THROWS_AS(run(make_solver_problem(pb.objective, part, c), pb.x0, c), Divergence);
  }
}

TEST_CASE("make_solver_problem") {
  const Problem pb = small_deblur(0);
  SolverConfig c;
  const auto part = make_partition(16, 16, PartitionScheme::quadrants());
  CHECK(make_solver_problem(pb.objective, part, c).pad == 4);
  c.pad = 5;
  CHECK_THROWS_AS(make_solver_problem(pb.objective, part, c), std::invalid_argument);
  c.pad = 4;
  CHECK_THROWS_AS(make_solver_problem(pb.objective, make_partition(8, 8, PartitionScheme::full()),
                                      c),
                  std::invalid_argument);
}
