#include "bphila/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bphila/fft.hpp"
#include "bphila/simd/kernels.hpp"

namespace bphila {
namespace {

void check_alpha(double alpha, const char* where) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument(std::string(where) + ": alpha must be finite and nonnegative");
  }
}

// α A^T b + z
ImageTensor prox_rhs(const ImageTensor& z, double alpha, const ForwardModel& model,
                     const ImageTensor& b, const char* where) {
  if (z.height() != model.input_height() || z.width() != model.input_width()) {
    throw std::invalid_argument(std::string(where) + ": z does not match the model grid");
  }
  if (b.channels() != z.channels()) {
    throw std::invalid_argument(std::string(where) + ": data and z channel counts differ");
  }
  ImageTensor rhs = z;
  if (alpha != 0.0) axpy(alpha, model.apply_adjoint(b).data(), rhs.data());
  return rhs;
}

}  // namespace

ImageTensor prox_ls_deblur(const ImageTensor& z, double alpha, const ForwardModel& model,
                           const ImageTensor& b) {
  check_alpha(alpha, "prox_ls_deblur");
  if (model.kind() != ModelKind::blur && model.kind() != ModelKind::identity) {
    throw std::invalid_argument("prox_ls_deblur: model must be a pure circular blur");
  }
  if (alpha == 0.0) return z;
  ImageTensor rhs = prox_rhs(z, alpha, model, b, "prox_ls_deblur");
  if (model.kind() == ModelKind::identity) {
    scale(1.0 / (1.0 + alpha), rhs.data());
    return rhs;
  }
  const std::size_t h = z.height();
  const std::size_t w = z.width();
  const auto& gram = model.gram_eigenvalues();  // |Λ|²
  std::vector<double> inv(gram.size());
  for (std::size_t j = 0; j < inv.size(); ++j) inv[j] = 1.0 / (1.0 + alpha * gram[j]);
  ImageTensor out(h, w, z.channels());
  for (std::size_t c = 0; c < z.channels(); ++c) {
    auto freq = fft::forward_real(rhs.plane(c), h, w);
    simd::active().complex_scale(inv.data(), freq.data(), freq.size());
    const auto back = fft::inverse_real(std::move(freq), h, w);
    std::copy(back.begin(), back.end(), out.plane(c).begin());
  }
  return out;
}

ImageTensor prox_ls_sr(const ImageTensor& z, double alpha, const ForwardModel& model,
                       const ImageTensor& b) {
  check_alpha(alpha, "prox_ls_sr");
  if (model.kind() != ModelKind::blur_downsample && model.kind() != ModelKind::downsample) {
    throw std::invalid_argument("prox_ls_sr: model must be a (blurred) downsampling");
  }
  const std::size_t s = model.factor();
  if (z.height() % s != 0 || z.width() % s != 0) {
    throw std::invalid_argument("prox_ls_sr: grid not divisible by the scale factor");
  }
  if (alpha == 0.0) return z;
  ImageTensor zhat = prox_rhs(z, alpha, model, b, "prox_ls_sr");
  const double s2 = static_cast<double>(s * s);

  if (model.kind() == ModelKind::downsample) {
    // (I + α S^T S)^{-1} is diagonal: kept pixels are divided by 1 + α.
    const double f = 1.0 / (1.0 + alpha);
    for (std::size_t c = 0; c < zhat.channels(); ++c) {
      for (std::size_t y = 0; y < zhat.height(); y += s) {
        for (std::size_t x = 0; x < zhat.width(); x += s) zhat(c, y, x) *= f;
      }
    }
    return zhat;
  }

  const std::size_t h = z.height();
  const std::size_t w = z.width();
  const FourierPaving paving = make_paving(*model.spectrum(), s);
  const std::size_t m = paving.coarse_height * paving.coarse_width;
  ImageTensor out(h, w, z.channels());
  for (std::size_t c = 0; c < z.channels(); ++c) {
    auto Z = fft::forward_real(zhat.plane(c), h, w);
    for (std::size_t j = 0; j < m; ++j) {
      Complex num(0.0, 0.0);
      double energy = 0.0;
      for (std::size_t l = 0; l < paving.blocks.size(); ++l) {
        const Complex lam = paving.block_values[l][j];
        num += lam * Z[paving.blocks[l][j]];
        energy += std::norm(lam);
      }
      const Complex coef = (alpha / s2) * num / (1.0 + (alpha / s2) * energy);
      for (std::size_t l = 0; l < paving.blocks.size(); ++l) {
        Z[paving.blocks[l][j]] -= std::conj(paving.block_values[l][j]) * coef;
      }
    }
    const auto back = fft::inverse_real(std::move(Z), h, w);
    std::copy(back.begin(), back.end(), out.plane(c).begin());
  }
  return out;
}

ImageTensor prox_ls(const ImageTensor& z, double alpha, const ForwardModel& model,
                    const ImageTensor& b) {
  switch (model.kind()) {
    case ModelKind::identity:
    case ModelKind::blur: return prox_ls_deblur(z, alpha, model, b);
    case ModelKind::downsample:
    case ModelKind::blur_downsample: return prox_ls_sr(z, alpha, model, b);
  }
  throw std::invalid_argument("prox_ls: unknown model kind");
}

// ---------------------------------------------------------------------------
// ProxSubproblem

ProxSubproblem::ProxSubproblem(const ForwardModel* model, const ImageTensor* b,
                               const BlockPartition& partition, std::size_t block,
                               const ImageTensor& x, const ImageTensor& w, double alpha,
                               double beta, BlockVector metric)
    : model_(model),
      b_(b),
      partition_(&partition),
      block_(block),
      channels_(x.channels()),
      x_(x),
      alpha_(alpha),
      beta_(beta),
      metric_(std::move(metric)) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("ProxSubproblem: alpha must be positive and finite");
  }
  if (!(beta >= 0.0)) throw std::invalid_argument("ProxSubproblem: beta must be nonnegative");
  require_same_shape(x, w, "ProxSubproblem");
  x_block_ = extract_block(x, partition, block);
  inertia_ = extract_block(w, partition, block);
  for (std::size_t j = 0; j < inertia_.size(); ++j) inertia_[j] = x_block_[j] - inertia_[j];
  if (metric_.empty()) {
    metric_.assign(x_block_.size(), 1.0);
  } else if (metric_.size() != x_block_.size()) {
    throw std::invalid_argument("ProxSubproblem: metric length does not match the block");
  }
  for (double d : metric_) {
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("ProxSubproblem: metric entries must be positive");
    }
  }
  if (model_ != nullptr) {
    if (b_ == nullptr) throw std::invalid_argument("ProxSubproblem: model given without data");
    if (x.height() != model_->input_height() || x.width() != model_->input_width() ||
        b_->height() != model_->output_height() || b_->width() != model_->output_width() ||
        b_->channels() != x.channels()) {
      throw std::invalid_argument("ProxSubproblem: x or b does not match the forward model");
    }
  }
}

const ImageTensor& ProxSubproblem::effective_data() const {
  if (model_ == nullptr) throw std::logic_error("effective_data: no fidelity term");
  if (!b_eff_) {
    ImageTensor rest = x_;
    scatter_block_inplace(rest, *partition_, block_, BlockVector(x_block_.size(), 0.0));
    b_eff_ = *b_ - model_->apply(rest);
  }
  return *b_eff_;
}

ImageTensor ProxSubproblem::apply_block(std::span<const double> y) const {
  ImageTensor e(x_.height(), x_.width(), channels_);
  scatter_block_inplace(e, *partition_, block_, y);
  return model_->apply(e);
}

BlockVector ProxSubproblem::adjoint_block(const ImageTensor& v) const {
  return extract_block(model_->apply_adjoint(v), *partition_, block_);
}

double ProxSubproblem::phi(std::span<const double> y) const {
  if (model_ == nullptr) return 0.0;
  if (y.size() != x_block_.size()) throw std::invalid_argument("phi: block length mismatch");
  return 0.5 * squared_distance(apply_block(y).data(), effective_data().data());
}

double ProxSubproblem::phi_at_base() const {
  if (!phi_base_) phi_base_ = phi(x_block_);
  return *phi_base_;
}

BlockVector ProxSubproblem::shifted_gradient(std::span<const double> g) const {
  if (g.size() != x_block_.size()) {
    throw std::invalid_argument("block gradient length does not match the block");
  }
  BlockVector q(g.begin(), g.end());
  if (beta_ != 0.0) {
    const double r = beta_ / alpha_;
    for (std::size_t j = 0; j < q.size(); ++j) q[j] -= r * metric_[j] * inertia_[j];
  }
  return q;
}

BlockVector ProxSubproblem::prox_center(std::span<const double> g) const {
  const BlockVector q = shifted_gradient(g);
  BlockVector xbar = x_block_;
  for (std::size_t j = 0; j < xbar.size(); ++j) xbar[j] -= alpha_ * q[j] / metric_[j];
  return xbar;
}

double h_value(const ProxSubproblem& sub, std::span<const double> y,
               std::span<const double> grad_block) {
  const BlockVector q = sub.shifted_gradient(grad_block);
  const BlockVector& x = sub.x_block();
  if (y.size() != x.size()) throw std::invalid_argument("h_value: block length mismatch");
  const BlockVector& d = sub.metric();
  double lin = 0.0;
  double quad = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = y[j] - x[j];
    lin += q[j] * diff;
    quad += d[j] * diff * diff;
  }
  double value = lin + quad / (2.0 * sub.alpha());
  if (sub.has_fidelity()) value += sub.phi(y) - sub.phi_at_base();
  return value;
}

namespace {

// −(α/2) qᵀD⁻¹q − φ(x): the part of ψ that does not depend on v.
double dual_constant(const ProxSubproblem& sub, const BlockVector& q) {
  double s = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * q[j] / sub.metric()[j];
  return -0.5 * sub.alpha() * s - sub.phi_at_base();
}

double weighted_inverse_norm(const BlockVector& u, const BlockVector& d) {
  double s = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) s += u[j] * u[j] / d[j];
  return s;
}

double dual_value_from_parts(double alpha, const ImageTensor& v, const ImageTensor& c,
                             const BlockVector& mtv, const BlockVector& d, double constant) {
  return -0.5 * squared_norm(v) + dot(v, c) - 0.5 * alpha * weighted_inverse_norm(mtv, d) +
         constant;
}

BlockVector primal_from_parts(const ProxSubproblem& sub, const BlockVector& xbar,
                              const BlockVector& mtv) {
  BlockVector y = xbar;
  const double a = sub.alpha();
  for (std::size_t j = 0; j < y.size(); ++j) y[j] -= a * mtv[j] / sub.metric()[j];
  return y;
}

// ψ at the exact maximizer along the dual gradient r = c − v − α M D^{-1} M^T v:
//   ψ(v + t r) = ψ(v) + t‖r‖² − (t²/2)(‖r‖² + α‖M^T r‖²_{D^{-1}}).
// Any dual point bounds h(ŷ) from below, so this only sharpens the certificate.
double ascent_bound(const ProxSubproblem& sub, const ImageTensor& v, const ImageTensor& c,
                    const BlockVector& mtv, double psi) {
  const BlockVector& d = sub.metric();
  BlockVector w(mtv.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = mtv[j] / d[j];
  ImageTensor r = c - v;
  axpy(-sub.alpha(), sub.apply_block(w).data(), r.data());
  const double rr = squared_norm(r);
  if (rr == 0.0) return psi;
  const double quad = rr + sub.alpha() * weighted_inverse_norm(sub.adjoint_block(r), d);
  return psi + 0.5 * rr * rr / quad;
}

}  // namespace

double dual_value(const ProxSubproblem& sub, const ImageTensor& v,
                  std::span<const double> grad_block) {
  const BlockVector q = sub.shifted_gradient(grad_block);
  if (!sub.has_fidelity()) return dual_constant(sub, q);
  const BlockVector xbar = sub.prox_center(grad_block);
  const ImageTensor c = sub.apply_block(xbar) - sub.effective_data();
  return dual_value_from_parts(sub.alpha(), v, c, sub.adjoint_block(v), sub.metric(),
                               dual_constant(sub, q));
}

BlockVector primal_from_dual(const ProxSubproblem& sub, const ImageTensor& v,
                             std::span<const double> grad_block) {
  const BlockVector xbar = sub.prox_center(grad_block);
  if (!sub.has_fidelity()) return xbar;
  return primal_from_parts(sub, xbar, sub.adjoint_block(v));
}

BlockProxResult solve_block_prox(const ProxSubproblem& sub, std::span<const double> grad_block,
                                 double tau, const DualOptions& opt) {
  if (!(tau >= 0.0)) throw std::invalid_argument("solve_block_prox: tau must be nonnegative");
  if (opt.stride == 0) throw std::invalid_argument("solve_block_prox: zero certificate stride");
  const double factor = 2.0 / (2.0 + tau);
  const BlockVector q = sub.shifted_gradient(grad_block);
  const BlockVector xbar = sub.prox_center(grad_block);

  BlockProxResult result;
  result.certificate.tau = tau;
  if (!sub.has_fidelity()) {
    // The prox of the zero function is the identity: ỹ = x̄ is exact.
    const double h = h_value(sub, xbar, grad_block);
    result.y = xbar;
    result.certificate.h = h;
    result.certificate.psi = h;
    result.certificate.degenerate = std::abs(h) <= opt.degenerate_level;
    if (opt.record_history) {
      result.certificate.psi_history = {h};
      result.certificate.h_history = {h};
    }
    return result;
  }

  const ForwardModel& A = *sub.model();
  const BlockPartition& p = sub.partition();
  const BlockVector& d = sub.metric();
  const double alpha = sub.alpha();
  const double d_min = *std::min_element(d.begin(), d.end());
  // Splitting M D^{-1} M^T = κ A A^T − A P A^T with P = κ I − U D^{-1} U^T ⪰ 0.
  const double kappa = 1.0 / std::min(1.0, d_min);
  const double constant = dual_constant(sub, q);
  const ImageTensor c = sub.apply_block(xbar) - sub.effective_data();

  // Roundoff level of h and ψ, which both subtract φ(x) and (α/2)‖q‖²_{D^{-1}}.
  const double level = std::max(opt.degenerate_level,
                                64.0 * std::numeric_limits<double>::epsilon() * -constant);

  ImageTensor v(A.output_height(), A.output_width(), sub.channels());
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0;; ++l) {
    ImageTensor atv = A.apply_adjoint(v);
    const BlockVector mtv = extract_block(atv, p, sub.block());
    const bool check = l >= 1 && (l % opt.stride == 0 || l == opt.max_iterations);
    if (check || opt.record_history) {
      const BlockVector y = primal_from_parts(sub, xbar, mtv);
      const double h = h_value(sub, y, grad_block);
      double psi = dual_value_from_parts(alpha, v, c, mtv, d, constant);
      if (opt.record_history) {
        result.certificate.psi_history.push_back(psi);
        result.certificate.h_history.push_back(h);
      }
      if (check) {
        double bound = psi;
        if (!(h <= factor * bound)) bound = std::max(bound, ascent_bound(sub, v, c, mtv, psi));
        best_gap = std::min(best_gap, h - factor * bound);
        if (h <= factor * bound) {
          result.y = y;
          result.certificate.h = h;
          result.certificate.psi = bound;
          result.certificate.dual_iterations = l;
          return result;
        }
        psi = bound;
        if (std::abs(h) <= level && std::abs(psi) <= level) {
          // Both bounds are at roundoff: x_i is optimal to working precision
          // and is returned as is, with h = 0.
          result.y = sub.x_block();
          result.certificate.h = 0.0;
          result.certificate.psi = psi;
          result.certificate.dual_iterations = l;
          result.certificate.degenerate = true;
          return result;
        }
      }
    }
    if (l >= opt.max_iterations) break;
    // v ← (I + ακ A A^T)^{-1} (c + α A P A^T v)
    scale(kappa, atv.data());
    BlockVector inner = mtv;
    for (std::size_t j = 0; j < inner.size(); ++j) inner[j] = (kappa - 1.0 / d[j]) * mtv[j];
    scatter_block_inplace(atv, p, sub.block(), inner);
    ImageTensor rhs = c;
    axpy(alpha, A.apply(atv).data(), rhs.data());
    v = A.gram_inverse(alpha * kappa, rhs);
  }
  throw DualIterationsExhausted(opt.max_iterations, best_gap);
}

}  // namespace bphila
