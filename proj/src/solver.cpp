#include "bphila/solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "bphila/diagnostics.hpp"

namespace bphila {

std::string to_string(Variant v) { return "v" + std::to_string(static_cast<int>(v) + 1); }

Variant variant_from_string(const std::string& s) {
  if (s.size() == 2 && (s[0] == 'v' || s[0] == 'V') && s[1] >= '1' && s[1] <= '8') {
    return static_cast<Variant>(s[1] - '1');
  }
  throw std::invalid_argument("unknown variant '" + s + "' (expected v1..v8)");
}

std::string to_string(Splitting s) {
  return s == Splitting::prox_fidelity ? "prox-fidelity" : "all-smooth";
}

VariantTraits traits(Variant v) {
  const int n = static_cast<int>(v);
  VariantTraits t;
  t.splitting = n < 4 ? Splitting::prox_fidelity : Splitting::all_smooth;
  const int r = n % 4;
  t.barzilai_borwein = r < 2;
  t.inertia = r % 2 == 0;
  return t;
}

void SolverConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& what) {
    throw std::invalid_argument("solver." + field + ": " + what);
  };
  if (!(alpha_min > 0.0)) fail("alpha_min", "must be > 0");
  if (!(alpha_max >= alpha_min) || !std::isfinite(alpha_max)) {
    fail("alpha_max", "must be finite and >= alpha_min");
  }
  if (!(beta_max >= 0.0)) fail("beta_max", "must be >= 0");
  if (!(gamma >= 0.0)) fail("gamma", "must be >= 0");
  if (!(armijo_sigma > 0.0 && armijo_sigma < 1.0)) fail("armijo_sigma", "must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta", "must lie in (0, 1)");
  if (!(tau >= 0.0)) fail("tau", "must be >= 0");
  if (!(mu >= 1.0)) fail("mu", "must be >= 1");
  if (max_backtracks == 0) fail("max_backtracks", "must be >= 1");
  if (max_iters == 0) fail("max_iters", "must be >= 1");
  if (!(epsilon >= 0.0)) fail("epsilon", "must be >= 0");
  if (dual.max_iterations == 0) fail("dual_max_iterations", "must be >= 1");
  if (dual.stride == 0) fail("dual_stride", "must be >= 1");
  if (!(divergence_threshold > 0.0)) fail("divergence_threshold", "must be > 0");
}

namespace {

std::string format_failure(std::size_t k, double lhs, double rhs) {
  std::ostringstream os;
  os.precision(17);
  os << "line search: no admissible step at k = " << k << " (last trial lhs = " << lhs
     << ", rhs = " << rhs << ")";
  return os.str();
}

}  // namespace

LineSearchFailure::LineSearchFailure(std::size_t k, double lhs, double rhs)
    : std::runtime_error(format_failure(k, lhs, rhs)), lhs_(lhs), rhs_(rhs) {}

std::string to_string(Step6Branch b) {
  switch (b) {
    case Step6Branch::full: return "full";
    case Step6Branch::damped: return "damped";
    case Step6Branch::skip: return "skip";
  }
  return "?";
}

MeritSnapshot merit_value(const std::deque<ImageTensor>& window, double gamma, double F) {
  MeritSnapshot s;
  s.F = F;
  for (std::size_t j = 0; j + 1 < window.size(); ++j) {
    s.gaps += squared_distance(window[j].data(), window[j + 1].data());
  }
  s.psi = F + 0.5 * gamma * s.gaps;
  return s;
}

double bb_steplength(std::span<const double> s, std::span<const double> y, double alpha_min,
                     double alpha_max) {
  const double ny = std::sqrt(squared_norm(y));
  if (ny < 1e-30) return alpha_max;
  return std::clamp(std::sqrt(squared_norm(s)) / ny, alpha_min, alpha_max);
}

double fista_beta(std::size_t k, std::size_t N, double beta_max) {
  const double q = static_cast<double>(k / N);
  return std::min(beta_max, std::max(0.0, (q - 1.0) / (q + 2.0)));
}

LineSearchResult line_search(const std::function<double(double)>& F_at, double F0,
                             double inertia_sq, double d_sq, double h, double gamma,
                             double sigma, double delta, std::size_t max_backtracks,
                             std::size_t k) {
  LineSearchResult r;
  const double slack = F0 + 0.5 * gamma * inertia_sq;
  double lambda = 1.0;
  for (std::size_t m = 0; m <= max_backtracks; ++m) {
    const double Fl = F_at(lambda);
    if (m == 0) r.F_full = Fl;
    r.lhs = Fl + 0.5 * gamma * lambda * lambda * d_sq;
    r.rhs = slack + sigma * lambda * h;
    r.lambda = lambda;
    r.m = m;
    r.F_trial = Fl;
    if (r.lhs <= r.rhs) return r;
    lambda *= delta;
  }
  // Sufficient decrease below the resolution of F: the block is numerically
  // stationary and the iteration keeps x_k.
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (sigma * std::abs(h) <= 64.0 * eps * std::max(std::abs(F0), 1e-300)) {
    r.stalled = true;
    return r;
  }
  throw LineSearchFailure(k, r.lhs, r.rhs);
}

SolverProblem make_solver_problem(const Objective& objective, const BlockPartition& partition,
                                  const SolverConfig& config, const ImageTensor* reference) {
  if (partition.height() != objective.model().input_height() ||
      partition.width() != objective.model().input_width()) {
    throw std::invalid_argument("solver: partition grid does not match the image grid");
  }
  SolverProblem p{&objective, partition, 0, reference};
  const GsDenoiser& d = *objective.regularizer().denoiser;
  p.pad = config.pad ? *config.pad : default_block_pad(d, partition);
  if (p.pad > max_admissible_pad(partition)) {
    throw std::invalid_argument("solver: pad " + std::to_string(p.pad) +
                                " exceeds the largest admissible pad " +
                                std::to_string(max_admissible_pad(partition)));
  }
  return p;
}

BlockVector smooth_block_gradient(const SolverProblem& p, Splitting s, const ImageTensor& x,
                                  std::size_t i) {
  const Objective& obj = *p.objective;
  BlockVector g;
  if (obj.lambda() != 0.0) {
    g = g_grad_block(obj.regularizer(), x, p.partition, i, p.pad);
  } else {
    g.assign(p.partition.block(i).area() * x.channels(), 0.0);
  }
  if (s == Splitting::all_smooth) {
    const BlockVector gf = extract_block(obj.fidelity_gradient(x), p.partition, i);
    axpy(1.0, gf, g);
  }
  return g;
}

SolverState init_state(const SolverProblem& p, const ImageTensor& x0, const SolverConfig& c) {
  c.validate();
  if (x0.height() != p.partition.height() || x0.width() != p.partition.width()) {
    throw std::invalid_argument("solver: x0 " + shape_string(x0) +
                                " does not match the partition grid");
  }
  const std::size_t N = p.partition.block_count();
  SolverState s;
  s.window.assign(N + 1, x0);
  s.F = p.objective->value(x0);
  if (!std::isfinite(s.F)) throw Divergence("solver: F(x0) is not finite");
  s.previous_grad.resize(N);
  s.has_previous_grad.assign(N, false);
  s.start = std::chrono::steady_clock::now();
  return s;
}

namespace {

double max_outside_change(const ImageTensor& a, const ImageTensor& b, const Rect& r) {
  double worst = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    for (std::size_t y = 0; y < a.height(); ++y) {
      for (std::size_t q = 0; q < a.width(); ++q) {
        if (r.contains(y, q)) continue;
        worst = std::max(worst, std::abs(a(c, y, q) - b(c, y, q)));
      }
    }
  }
  return worst;
}

}  // namespace

const IterationRecord& step(SolverState& st, const SolverProblem& p, const SolverConfig& c) {
  const Objective& obj = *p.objective;
  const VariantTraits vt = traits(c.variant);
  const std::size_t N = p.partition.block_count();
  const std::size_t i = st.k % N;
  const double gamma = c.effective_gamma();
  const ImageTensor& x = st.window.front();
  const ImageTensor& x_old = st.window.back();  // x_{k−N}

  IterationRecord rec;
  rec.k = st.k;
  rec.block = i;

  // Step 1: block gradient of the smooth part.
  BlockVector grad = smooth_block_gradient(p, vt.splitting, x, i);

  // Step 2: parameters.
  const BlockVector xi = extract_block(x, p.partition, i);
  const BlockVector xi_old = extract_block(x_old, p.partition, i);
  if (vt.barzilai_borwein) {
    if (st.k >= N && st.has_previous_grad[i]) {
      BlockVector s(xi.size());
      BlockVector y(xi.size());
      for (std::size_t j = 0; j < xi.size(); ++j) {
        s[j] = xi[j] - xi_old[j];
        y[j] = grad[j] - st.previous_grad[i][j];
      }
      rec.alpha = bb_steplength(s, y, c.alpha_min, c.alpha_max);
    } else {
      rec.alpha = c.alpha_max;
    }
  } else {
    const double lam = obj.lambda();
    rec.alpha = lam > 0.0 ? std::clamp(1.0 / lam, c.alpha_min, c.alpha_max) : c.alpha_max;
  }
  rec.beta = vt.inertia ? fista_beta(st.k, N, c.beta_max) : 0.0;

  // Step 3: τ-approximate block prox.
  const bool fidelity = vt.splitting == Splitting::prox_fidelity;
  ProxSubproblem sub(fidelity ? &obj.model() : nullptr, fidelity ? &obj.data() : nullptr,
                     p.partition, i, x, x_old, rec.alpha, rec.beta);
  BlockProxResult prox = solve_block_prox(sub, grad, c.tau, c.dual);
  rec.h = prox.certificate.h;
  rec.dual_iters = prox.certificate.dual_iterations;
  if (rec.h > 1e-12 || !std::isfinite(rec.h)) {
    std::ostringstream os;
    os.precision(17);
    os << "solver: h_k = " << rec.h << " > 0 at k = " << st.k;
    throw CertificateViolation(os.str());
  }

  // Steps 4-6.
  BlockVector d(xi.size());
  for (std::size_t j = 0; j < xi.size(); ++j) d[j] = prox.y[j] - xi[j];
  const double d_sq = squared_norm(d);
  const double inertia_sq = squared_distance(xi, xi_old);

  ImageTensor next = x;
  double F_next = st.F;
  if (rec.h > 0.0 || (rec.h == 0.0 && d_sq == 0.0)) {
    rec.branch = Step6Branch::skip;
    rec.lambda = 1.0;
    rec.m = 0;
  } else {
    BlockVector trial(xi.size());
    auto F_at = [&](double lambda) {
      for (std::size_t j = 0; j < xi.size(); ++j) trial[j] = xi[j] + lambda * d[j];
      scatter_block_inplace(next, p.partition, i, trial);
      return obj.value(next);
    };
    const LineSearchResult ls = line_search(F_at, st.F, inertia_sq, d_sq, rec.h, gamma,
                                            c.armijo_sigma, c.delta, c.max_backtracks, st.k);
    rec.lambda = ls.lambda;
    rec.m = ls.m;
    rec.armijo_lhs = ls.lhs;
    rec.armijo_rhs = ls.rhs;
    if (ls.stalled) {
      rec.branch = Step6Branch::skip;
      next = x;
    } else if (ls.F_full + 0.5 * gamma * d_sq <
               ls.F_trial + 0.5 * gamma * ls.lambda * ls.lambda * d_sq) {
      rec.branch = Step6Branch::full;
      scatter_block_inplace(next, p.partition, i, prox.y);
      F_next = ls.F_full;
    } else {
      rec.branch = Step6Branch::damped;
      for (std::size_t j = 0; j < xi.size(); ++j) trial[j] = xi[j] + ls.lambda * d[j];
      scatter_block_inplace(next, p.partition, i, trial);
      F_next = ls.F_trial;
    }
    st.lambda_min_observed = std::min(st.lambda_min_observed, rec.lambda);
  }

  if (!std::isfinite(F_next) || F_next > c.divergence_threshold) {
    std::ostringstream os;
    os << "solver: F = " << F_next << " at k = " << st.k << " exceeds the divergence guard";
    throw Divergence(os.str());
  }

  rec.outside_change = max_outside_change(next, x, p.partition.block(i));
  rec.rel_change = st.F != 0.0 ? std::abs(F_next - st.F) / std::abs(st.F) : std::abs(F_next);
  rec.F = F_next;

  st.previous_grad[i] = std::move(grad);
  st.has_previous_grad[i] = true;
  st.sum_neg_h += -std::min(rec.h, 0.0);
  st.window.push_front(std::move(next));
  st.window.pop_back();
  st.F = F_next;
  ++st.k;

  rec.psi = merit_value(st.window, gamma, st.F).psi;
  if (c.log_grad_norms) rec.grad_norm = std::sqrt(squared_norm(obj.gradient(st.window.front())));
  if (p.reference) rec.psnr = psnr(st.window.front(), *p.reference);
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          st.start)
                    .count();
  st.last = rec;
  return st.last;
}

namespace {

RunResult run_impl(const SolverProblem& p, const ImageTensor& x0, const SolverConfig& c,
                   bool capture) {
  SolverState st = init_state(p, x0, c);
  const std::size_t N = p.partition.block_count();
  const double gamma = c.effective_gamma();
  Trace t;
  t.variant = to_string(c.variant);
  t.blocks = N;
  t.armijo_sigma = c.armijo_sigma;
  t.gamma = gamma;
  t.F0 = st.F;
  t.psi0 = merit_value(st.window, gamma, st.F).psi;
  if (c.log_grad_norms) t.grad_norm0 = std::sqrt(squared_norm(p.objective->gradient(x0)));
  if (p.reference) t.psnr0 = psnr(x0, *p.reference);
  t.sweep_F.push_back(st.F);
  t.records.reserve(c.max_iters);
  t.stop_reason = "max_iters";
  std::exception_ptr error;
  try {
    while (st.k < c.max_iters) {
      t.records.push_back(step(st, p, c));
      if (st.k % N == 0) {
        const double F_old = t.sweep_F.back();
        t.sweep_F.push_back(st.F);
        const double change =
            F_old != 0.0 ? std::abs(st.F - F_old) / std::abs(F_old) : std::abs(st.F);
        if (change <= c.epsilon) {
          t.converged = true;
          t.stop_reason = "relative_change";
          break;
        }
      }
    }
  } catch (...) {
    if (!capture) throw;
    error = std::current_exception();
    t.stop_reason = "error";
  }
  return RunResult{st.window.front(), std::move(t), error};
}

}  // namespace

RunResult run(const SolverProblem& p, const ImageTensor& x0, const SolverConfig& c) {
  return run_impl(p, x0, c, false);
}

RunResult run_captured(const SolverProblem& p, const ImageTensor& x0, const SolverConfig& c) {
  return run_impl(p, x0, c, true);
}

}  // namespace bphila
