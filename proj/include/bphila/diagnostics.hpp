#pragma once

// Metrics, trace certificates and empirical rate probes.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "bphila/solver.hpp"
#include "bphila/tensor.hpp"

namespace bphila {

// 10 log10(peak² n / ‖x − ref‖²), capped at 300 dB.
double psnr(const ImageTensor& x, const ImageTensor& ref, double peak = 1.0);

inline constexpr double kPsnrCap = 300.0;

// ---------------------------------------------------------------------------
// min_{i≤K} ‖∇F(x_i)‖² = O(1/K)

struct MinGradRate {
  double C_hat = 0.0;  // max_K (K+1) min_{i≤K} ‖∇F(x_i)‖²
  // Least-squares slope of log((K+1) m_K) against log(K+1) over the second
  // half of the samples; 0 when the tail is identically zero.
  double tail_slope = 0.0;
  bool passed = false;
  std::vector<double> scaled;  // (K+1) m_K for every K
};

// `grad_norms[K]` is ‖∇F(x_K)‖. Passes when tail_slope ≤ max_slope. Once the
// running minimum of ‖∇F‖ is at or below `floor` the remaining samples sit at
// roundoff and are left out of the trend fit. Throws std::invalid_argument with
// fewer than 20 samples.
MinGradRate min_grad_rate_check(const std::vector<double>& grad_norms, double max_slope = 0.05,
                                double floor = 1e-12);
// Gradient norms of a trace: grad_norm0 followed by every record. Throws if
// the trace was recorded without gradient logging.
std::vector<double> trace_grad_norms(const Trace& t);

// First k such that records k .. k+2N−1 are all skips, or records.size(). From
// the second all-skip sweep on every iteration sees the same window, the same
// cached block gradients and hence the same step, so the state is frozen for
// good and a longer run only repeats x_k.
std::size_t frozen_from(const Trace& t);
// trace_grad_norms cut after x_{frozen_from(t)}.
std::vector<double> active_grad_norms(const Trace& t);

// ---------------------------------------------------------------------------
// Function-value rates

enum class RateModel { finite_termination, linear, sublinear };
std::string to_string(RateModel m);

struct RateProbe {
  std::vector<double> delta;   // Δ_k = F(x_{kN}) − F_best
  std::size_t first_index = 0; // k of delta[0]
  double floor = 1e-13;
};

// Δ_k from the per-sweep values of a trace.
RateProbe make_rate_probe(const std::vector<double>& sweep_F, double F_best,
                          std::size_t first_index = 0);

struct RateFit {
  RateModel model = RateModel::finite_termination;
  double omega = 0.0;       // linear: Δ_k ≈ C ω^k
  double exponent = 0.0;    // sublinear: Δ_k ≈ C k^p
  double constant = 0.0;    // C
  double r2 = 0.0;          // of the reported model
  double r2_linear = 0.0;
  double r2_sublinear = 0.0;
  std::size_t samples = 0;  // leading samples above the floor used in the fit
  double min_delta = 0.0;   // for the Δ_k ≥ −1e-12 invariant
};

// Fits log Δ_k against k and against log k on the leading run of samples
// above the floor; needs at least `min_samples` of them, otherwise reports
// finite termination.
RateFit rate_fit(const RateProbe& probe, std::size_t min_samples = 30);

// ---------------------------------------------------------------------------
// Certificates

struct CertificateCheck {
  std::string name;
  bool passed = true;
  // Worst value of the checked quantity; the check is `worst <= limit`.
  double worst = 0.0;
  double limit = 0.0;
  long offending_k = -1;  // first failing iteration, −1 if none
};

struct CertificateReport {
  std::vector<CertificateCheck> checks;  // merit_descent, h_nonpositive, sum_neg_h, single_block
  double sum_neg_h = 0.0;
  double lambda_min = 1.0;
  bool passed() const;
};

struct CertificateTolerances {
  double merit = 1e-9;
  double h = 1e-12;
};

CertificateReport certificate_report(const Trace& t, const CertificateTolerances& tol = {});

// ---------------------------------------------------------------------------
// Writers

struct CsvOptions {
  // Wall-clock times make traces differ between identical runs; when off the
  // wall_ms column is written as 0.
  bool wall_clock = false;
};

// k,i_k,alpha,beta,m,lambda,h,psi,F,grad_norm,psnr,wall_ms,dual_iters,
// step6_branch,rel_change,outside_change
void write_trace_csv(std::ostream& os, const Trace& t, const CsvOptions& o = {});
void write_certificates_text(std::ostream& os, const Trace& t, const CertificateReport& r);
void write_certificates_json(std::ostream& os, const Trace& t, const CertificateReport& r);
void write_rates_text(std::ostream& os, const Trace& t, const RateFit& fit,
                      const MinGradRate* grad_rate);

}  // namespace bphila
