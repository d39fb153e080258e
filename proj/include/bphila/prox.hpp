#pragma once

// Proximal machinery for the least-squares fidelity φ(x) = ½‖Ax − b‖².
//
// Closed forms for the full-image prox (blur, blur+downsample), and the
// inexact block prox: for block i the restricted fidelity is
//   φ_i^x(y) = ½‖A U_i y − b_i^x‖²,  b_i^x = b − A(x with block i zeroed),
// and the block subproblem minimizes
//   h(y) = ⟨q, y − x_i⟩ + (1/2α)‖y − x_i‖²_D + φ_i^x(y) − φ_i^x(x_i),
//   q = ∇_i f(x) − (β/α) D (x − w)_i.
// It is solved through its Fenchel dual with a proximal-point (Gauss-Seidel
// type) ascent whose iterates give both a primal candidate and a lower bound
// ψ(v) ≤ h(ŷ), which certifies the τ-approximation h(ỹ) ≤ 2/(2+τ) h(ŷ).

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bphila/forward_model.hpp"
#include "bphila/tensor.hpp"

namespace bphila {

// F^{-1} (I + α|Λ|²)^{-1} F (α H^T b + z); identity models are accepted as H = I.
ImageTensor prox_ls_deblur(const ImageTensor& z, double alpha, const ForwardModel& model,
                           const ImageTensor& b);
// (I + α (SH)^T SH)^{-1} (α (SH)^T b + z) via the s×s Fourier paving. Pure
// downsampling is accepted as H = I.
ImageTensor prox_ls_sr(const ImageTensor& z, double alpha, const ForwardModel& model,
                       const ImageTensor& b);
// Dispatches on the model kind.
ImageTensor prox_ls(const ImageTensor& z, double alpha, const ForwardModel& model,
                    const ImageTensor& b);

class ProxSubproblem {
 public:
  // `model` / `b` may be null for a zero fidelity (φ ≡ 0). `metric` holds the
  // diagonal of D over the block; empty means D = I. The referenced model, data
  // and partition must outlive the subproblem.
  ProxSubproblem(const ForwardModel* model, const ImageTensor* b, const BlockPartition& partition,
                 std::size_t block, const ImageTensor& x, const ImageTensor& w, double alpha,
                 double beta, BlockVector metric = {});

  bool has_fidelity() const noexcept { return model_ != nullptr; }
  std::size_t block() const noexcept { return block_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  const BlockPartition& partition() const noexcept { return *partition_; }
  const ForwardModel* model() const noexcept { return model_; }
  const BlockVector& x_block() const noexcept { return x_block_; }
  // (x − w)_i
  const BlockVector& inertia() const noexcept { return inertia_; }
  // Diagonal of D (all ones when identity).
  const BlockVector& metric() const noexcept { return metric_; }
  std::size_t channels() const noexcept { return channels_; }

  // b − A(x with block i zeroed); computed on first use and cached. Not
  // thread-safe: a subproblem belongs to a single solver iteration.
  const ImageTensor& effective_data() const;
  // A U_i y
  ImageTensor apply_block(std::span<const double> y) const;
  // U_i^T A^T v
  BlockVector adjoint_block(const ImageTensor& v) const;
  // φ_i^x(y); zero without fidelity.
  double phi(std::span<const double> y) const;
  // φ_i^x(x_i) = φ(x)
  double phi_at_base() const;

  // q = g − (β/α) D (x − w)_i
  BlockVector shifted_gradient(std::span<const double> grad_block) const;
  // x̄ = x_i − α D^{-1} q = x_i + β (x − w)_i − α D^{-1} g
  BlockVector prox_center(std::span<const double> grad_block) const;

 private:
  const ForwardModel* model_;
  const ImageTensor* b_;
  const BlockPartition* partition_;
  std::size_t block_;
  std::size_t channels_;
  ImageTensor x_;
  BlockVector x_block_;
  BlockVector inertia_;
  double alpha_;
  double beta_;
  BlockVector metric_;
  mutable std::optional<ImageTensor> b_eff_;
  mutable std::optional<double> phi_base_;
};

// ⟨g − (β/α) D (x − w)_i, y − x_i⟩ + (1/2α)‖y − x_i‖²_D + φ_i^x(y) − φ_i^x(x_i)
double h_value(const ProxSubproblem& sub, std::span<const double> y,
               std::span<const double> grad_block);

struct ProxCertificate {
  double h = 0.0;    // h(ỹ)
  // Dual bound at acceptance: the larger of ψ(v_ℓ) and ψ after one exact
  // steepest-ascent step from v_ℓ.
  double psi = 0.0;
  double tau = 0.0;
  std::size_t dual_iterations = 0;
  // Accepted because both h and ψ are at roundoff level; ỹ is then x_i and h
  // is reported as 0.
  bool degenerate = false;
  // ψ(v_ℓ) and h(ỹ_ℓ) for ℓ = 0.. when requested (plain ψ, without the ascent step).
  std::vector<double> psi_history;
  std::vector<double> h_history;

  bool satisfied() const noexcept { return degenerate || h <= (2.0 / (2.0 + tau)) * psi; }
};

struct DualOptions {
  std::size_t max_iterations = 1000;
  // Check the certificate every `stride` iterations.
  std::size_t stride = 1;
  bool record_history = false;
  // Level under which h and ψ are treated as zero; raised to 64 ulp of
  // φ(x) + (α/2)‖q‖²_{D^{-1}} when that is larger.
  double degenerate_level = 1e-12;

  friend bool operator==(const DualOptions&, const DualOptions&) = default;
};

class DualIterationsExhausted : public std::runtime_error {
 public:
  DualIterationsExhausted(std::size_t iterations, double best_gap)
      : std::runtime_error("block prox: no certificate after " + std::to_string(iterations) +
                           " dual iterations (best gap h - 2/(2+tau) psi = " +
                           std::to_string(best_gap) + ")"),
        iterations_(iterations),
        best_gap_(best_gap) {}
  std::size_t iterations() const noexcept { return iterations_; }
  double best_gap() const noexcept { return best_gap_; }

 private:
  std::size_t iterations_;
  double best_gap_;
};

struct BlockProxResult {
  BlockVector y;
  ProxCertificate certificate;
};

// Dual value ψ(v) of the block subproblem; ψ(v) ≤ h(ŷ) for every v.
double dual_value(const ProxSubproblem& sub, const ImageTensor& v,
                  std::span<const double> grad_block);
// Primal point x̄ − α D^{-1} U_i^T A^T v associated with a dual vector.
BlockVector primal_from_dual(const ProxSubproblem& sub, const ImageTensor& v,
                             std::span<const double> grad_block);

BlockProxResult solve_block_prox(const ProxSubproblem& sub, std::span<const double> grad_block,
                                 double tau, const DualOptions& options = {});

}  // namespace bphila
