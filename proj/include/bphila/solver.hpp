#pragma once

// Block-coordinate inexact inertial forward-backward solver with an
// Armijo-type line search on a merit function.
//
// Iteration k updates block i_k = k mod N only:
//   x̄   = U_i^T(x_k + β_k (x_k − x_{k−N})) − α_k D^{-1} U_i^T ∇f(x_k)
//   ỹ_k ≈_τ prox of α_k φ_i^{x_k} at x̄ (metric D = I)
//   d_k = ỹ_k − U_i^T x_k,  λ_k = δ^{m_k} from the line search,
// then the full or the damped step is taken, whichever gives the lower value
// of F + (γ/2)‖step‖².

#include <chrono>
#include <deque>
#include <exception>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bphila/problems.hpp"
#include "bphila/prox.hpp"
#include "bphila/tensor.hpp"

namespace bphila {

enum class Variant { v1, v2, v3, v4, v5, v6, v7, v8 };
enum class Splitting { prox_fidelity, all_smooth };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(Splitting s);

struct VariantTraits {
  bool barzilai_borwein;  // adaptive α, otherwise α = 1/λ
  bool inertia;           // FISTA-like β with γ > 0, otherwise β = γ = 0
  Splitting splitting;
};
VariantTraits traits(Variant v);

struct SolverConfig {
  Variant variant = Variant::v1;
  double alpha_min = 1e-2;
  double alpha_max = 1e3;
  double beta_max = 1.0;
  // Inertial line-search weight used by the inertial variants; the others
  // run with γ = 0.
  double gamma = 1e-4;
  double armijo_sigma = 1e-4;
  double delta = 0.5;
  double tau = 1e6;
  double mu = 1.0;
  std::size_t max_backtracks = 60;
  std::size_t max_iters = 1000;
  double epsilon = 1e-5;
  std::optional<std::size_t> pad;  // default: default_block_pad
  DualOptions dual;
  bool log_grad_norms = false;
  double divergence_threshold = 1e12;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  double effective_gamma() const { return traits(variant).inertia ? gamma : 0.0; }
};

// ---------------------------------------------------------------------------
// Errors

class LineSearchFailure : public std::runtime_error {
 public:
  LineSearchFailure(std::size_t k, double lhs, double rhs);
  double lhs() const noexcept { return lhs_; }
  double rhs() const noexcept { return rhs_; }

 private:
  double lhs_;
  double rhs_;
};

class CertificateViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Divergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Trace

enum class Step6Branch { full, damped, skip };
std::string to_string(Step6Branch b);

struct IterationRecord {
  std::size_t k = 0;
  std::size_t block = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t m = 0;
  double lambda = 1.0;
  double h = 0.0;
  double psi = 0.0;        // Ψ after the step
  double F = 0.0;          // F(x_{k+1})
  double grad_norm = std::numeric_limits<double>::quiet_NaN();  // ‖∇F(x_{k+1})‖
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  std::size_t dual_iters = 0;
  Step6Branch branch = Step6Branch::full;
  double rel_change = 0.0;        // |F_{k+1} − F_k| / |F_k|
  double outside_change = 0.0;    // max |x_{k+1} − x_k| outside block i_k
  double armijo_lhs = 0.0;
  double armijo_rhs = 0.0;
};

struct Trace {
  std::string variant;
  std::size_t blocks = 1;
  std::uint64_t seed = 0;
  std::string problem_id;
  double armijo_sigma = 1e-4;
  double gamma = 0.0;
  double F0 = 0.0;
  double psi0 = 0.0;
  double grad_norm0 = std::numeric_limits<double>::quiet_NaN();
  double psnr0 = std::numeric_limits<double>::quiet_NaN();
  std::vector<IterationRecord> records;
  // F at the end of every completed sweep, starting with F0.
  std::vector<double> sweep_F;
  bool converged = false;
  std::string stop_reason;

  std::size_t sweeps() const noexcept { return sweep_F.empty() ? 0 : sweep_F.size() - 1; }
};

// ---------------------------------------------------------------------------
// Building blocks

struct MeritSnapshot {
  double F = 0.0;
  double gaps = 0.0;  // Σ ‖z_i − z_{i+1}‖²
  double psi = 0.0;
};

// Ψ(z_1, …, z_{N+1}) = F(z_1) + (γ/2) Σ ‖z_i − z_{i+1}‖²; window[0] is z_1.
MeritSnapshot merit_value(const std::deque<ImageTensor>& window, double gamma, double F);

// clamp(‖s‖ / ‖y‖, [α_min, α_max]); α_max when ‖y‖ < 1e-30.
double bb_steplength(std::span<const double> s, std::span<const double> y, double alpha_min,
                     double alpha_max);
// min(β_max, max(0, (div(k,N) − 1)/(div(k,N) + 2)))
double fista_beta(std::size_t k, std::size_t N, double beta_max);

struct LineSearchResult {
  double lambda = 1.0;
  std::size_t m = 0;
  double F_trial = 0.0;   // F(x + λ U d)
  double F_full = 0.0;    // F(x + U d), the m = 0 trial
  double lhs = 0.0;
  double rhs = 0.0;
  bool stalled = false;   // no admissible λ; only returned in the roundoff regime
};

// Smallest m with F(λ) + (γ/2) λ² ‖d‖² ≤ F0 + (γ/2) inertia² + σ λ h, λ = δ^m.
// `F_at(λ)` evaluates F(x_k + λ U_i d).
LineSearchResult line_search(const std::function<double(double)>& F_at, double F0,
                             double inertia_sq, double d_sq, double h, double gamma,
                             double sigma, double delta, std::size_t max_backtracks,
                             std::size_t k = 0);

struct SolverState {
  std::deque<ImageTensor> window;  // x_k, x_{k−1}, …, x_{k−N}
  std::size_t k = 0;
  double F = 0.0;
  std::vector<BlockVector> previous_grad;  // U_i^T ∇f(x_{k−N}) cached per block
  std::vector<bool> has_previous_grad;
  double sum_neg_h = 0.0;
  double lambda_min_observed = 1.0;
  IterationRecord last;
  std::chrono::steady_clock::time_point start;

  const ImageTensor& x() const { return window.front(); }
};

struct SolverProblem {
  const Objective* objective = nullptr;
  BlockPartition partition;
  std::size_t pad = 0;
  const ImageTensor* reference = nullptr;  // for PSNR, optional
};

SolverProblem make_solver_problem(const Objective& objective, const BlockPartition& partition,
                                  const SolverConfig& config,
                                  const ImageTensor* reference = nullptr);

// U_i^T ∇f(x) for the splitting in use.
BlockVector smooth_block_gradient(const SolverProblem& p, Splitting s, const ImageTensor& x,
                                  std::size_t i);

SolverState init_state(const SolverProblem& p, const ImageTensor& x0, const SolverConfig& c);
// One full iteration; returns its record (also stored in state.last).
const IterationRecord& step(SolverState& state, const SolverProblem& p, const SolverConfig& c);

struct RunResult {
  ImageTensor x;
  Trace trace;
  std::exception_ptr error;  // run_captured only
};

RunResult run(const SolverProblem& p, const ImageTensor& x0, const SolverConfig& c);
// Like run, but a solver error ends the run instead of propagating: the trace
// up to the failing iteration is kept, stop_reason is "error" and x is the
// last accepted iterate.
RunResult run_captured(const SolverProblem& p, const ImageTensor& x0, const SolverConfig& c);

}  // namespace bphila
