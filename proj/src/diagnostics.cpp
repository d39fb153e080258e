#include "bphila/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace bphila {

double psnr(const ImageTensor& x, const ImageTensor& ref, double peak) {
  require_same_shape(x, ref, "psnr");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
  const double n = static_cast<double>(x.size());
  const double mse = squared_distance(x.data(), ref.data()) / n;
  if (mse < 1e-30) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

namespace {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit least_squares(const std::vector<double>& t, const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    mt += t[j];
    my += y[j];
  }
  mt /= n;
  my /= n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    stt += (t[j] - mt) * (t[j] - mt);
    sty += (t[j] - mt) * (y[j] - my);
    syy += (y[j] - my) * (y[j] - my);
  }
  LineFit f;
  f.slope = stt > 0.0 ? sty / stt : 0.0;
  f.intercept = my - f.slope * mt;
  f.r2 = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
  return f;
}

}  // namespace

MinGradRate min_grad_rate_check(const std::vector<double>& g, double max_slope,
                                double floor) {
  if (g.size() < 20) {
    throw std::invalid_argument("min_grad_rate_check: need at least 20 gradient samples, got " +
                                std::to_string(g.size()));
  }
  MinGradRate r;
  r.scaled.resize(g.size());
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t K = 0; K < g.size(); ++K) {
    if (!std::isfinite(g[K])) throw std::invalid_argument("min_grad_rate_check: non-finite sample");
    m = std::min(m, g[K] * g[K]);
    r.scaled[K] = static_cast<double>(K + 1) * m;
    r.C_hat = std::max(r.C_hat, r.scaled[K]);
  }
  std::vector<double> lt, ly;
  double run_min = std::numeric_limits<double>::infinity();
  for (std::size_t K = 0; K < g.size(); ++K) {
    run_min = std::min(run_min, g[K]);
    if (K < g.size() / 2) continue;
    if (run_min <= floor || r.scaled[K] <= 0.0) break;
    lt.push_back(std::log(static_cast<double>(K + 1)));
    ly.push_back(std::log(r.scaled[K]));
  }
  // A tail that reaches the floor has stopped growing.
  r.tail_slope = lt.size() >= 2 ? least_squares(lt, ly).slope : 0.0;
  r.passed = std::isfinite(r.C_hat) && r.tail_slope <= max_slope;
  return r;
}

std::vector<double> trace_grad_norms(const Trace& t) {
  std::vector<double> g;
  g.reserve(t.records.size() + 1);
  g.push_back(t.grad_norm0);
  for (const auto& r : t.records) g.push_back(r.grad_norm);
  for (double v : g) {
    if (std::isnan(v)) throw std::invalid_argument("trace has no gradient norms (logging was off)");
  }
  return g;
}

std::size_t frozen_from(const Trace& t) {
  const std::size_t run = 2 * std::max<std::size_t>(t.blocks, 1);
  std::size_t skips = 0;
  for (std::size_t k = 0; k < t.records.size(); ++k) {
    skips = t.records[k].branch == Step6Branch::skip ? skips + 1 : 0;
    if (skips == run) return k + 1 - run;
  }
  return t.records.size();
}

std::vector<double> active_grad_norms(const Trace& t) {
  std::vector<double> g = trace_grad_norms(t);
  g.resize(frozen_from(t) + 1);
  return g;
}

std::string to_string(RateModel m) {
  switch (m) {
    case RateModel::finite_termination: return "finite-termination";
    case RateModel::linear: return "linear";
    case RateModel::sublinear: return "sublinear";
  }
  return "?";
}

RateProbe make_rate_probe(const std::vector<double>& sweep_F, double F_best,
                          std::size_t first_index) {
  RateProbe p;
  p.first_index = first_index;
  for (std::size_t k = first_index; k < sweep_F.size(); ++k) p.delta.push_back(sweep_F[k] - F_best);
  return p;
}

RateFit rate_fit(const RateProbe& probe, std::size_t min_samples) {
  RateFit f;
  f.min_delta = probe.delta.empty() ? 0.0
                                    : *std::min_element(probe.delta.begin(), probe.delta.end());
  std::vector<double> k_lin, k_log, y_lin, y_log;
  for (std::size_t j = 0; j < probe.delta.size(); ++j) {
    const double d = probe.delta[j];
    if (!(d > probe.floor)) break;
    const double k = static_cast<double>(probe.first_index + j);
    k_lin.push_back(k);
    y_lin.push_back(std::log(d));
    if (k >= 1.0) {
      k_log.push_back(std::log(k));
      y_log.push_back(std::log(d));
    }
  }
  f.samples = k_lin.size();
  if (f.samples < min_samples) return f;
  const LineFit lin = least_squares(k_lin, y_lin);
  const LineFit sub = k_log.size() >= 2 ? least_squares(k_log, y_log) : LineFit{};
  f.r2_linear = lin.r2;
  f.r2_sublinear = sub.r2;
  if (lin.r2 >= sub.r2) {
    f.model = RateModel::linear;
    f.omega = std::exp(lin.slope);
    f.constant = std::exp(lin.intercept);
    f.r2 = lin.r2;
  } else {
    f.model = RateModel::sublinear;
    f.exponent = sub.slope;
    f.constant = std::exp(sub.intercept);
    f.r2 = sub.r2;
  }
  return f;
}

// ---------------------------------------------------------------------------

bool CertificateReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

CertificateReport certificate_report(const Trace& t, const CertificateTolerances& tol) {
  CertificateReport rep;
  CertificateCheck merit{"merit_descent", true, -std::numeric_limits<double>::infinity(),
                         tol.merit, -1};
  CertificateCheck hpos{"h_nonpositive", true, -std::numeric_limits<double>::infinity(), tol.h,
                        -1};
  CertificateCheck single{"single_block", true, 0.0, 0.0, -1};
  double psi_prev = t.psi0;
  for (const auto& r : t.records) {
    const long k = static_cast<long>(r.k);
    // Ψ_{k+1} − Ψ_k − σ λ_k h_k ≤ tol
    const double h = r.branch == Step6Branch::skip ? 0.0 : std::min(r.h, 0.0);
    const double excess = r.psi - psi_prev - t.armijo_sigma * r.lambda * h;
    if (!(excess <= merit.worst)) merit.worst = excess;
    if (!(excess <= tol.merit) && merit.passed) {
      merit.passed = false;
      merit.offending_k = k;
    }
    if (!(r.h <= hpos.worst)) hpos.worst = r.h;
    if (!(r.h <= tol.h) && hpos.passed) {
      hpos.passed = false;
      hpos.offending_k = k;
    }
    single.worst = std::max(single.worst, r.outside_change);
    if (r.outside_change != 0.0 && single.passed) {
      single.passed = false;
      single.offending_k = k;
    }
    rep.sum_neg_h += -std::min(r.h, 0.0);
    if (r.branch != Step6Branch::skip) rep.lambda_min = std::min(rep.lambda_min, r.lambda);
    psi_prev = r.psi;
  }
  if (t.records.empty()) {
    merit.worst = 0.0;
    hpos.worst = 0.0;
  }
  // Σ(−h_k) ≤ (Ψ_0 − F_low) / (σ λ_min) with F_low = 0.
  CertificateCheck sum{"sum_neg_h", true, rep.sum_neg_h,
                       t.psi0 / (t.armijo_sigma * rep.lambda_min), -1};
  if (!(sum.worst <= sum.limit)) {
    sum.passed = false;
    sum.offending_k = t.records.empty() ? -1 : static_cast<long>(t.records.back().k);
  }
  rep.checks = {merit, hpos, sum, single};
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(std::ostream& os, const Trace& t, const CsvOptions& o) {
  os << "k,i_k,alpha,beta,m,lambda,h,psi,F,grad_norm,psnr,wall_ms,dual_iters,step6_branch,"
        "rel_change,outside_change\n";
  for (const auto& r : t.records) {
    os << r.k << ',' << r.block << ',' << num(r.alpha) << ',' << num(r.beta) << ',' << r.m << ','
       << num(r.lambda) << ',' << num(r.h) << ',' << num(r.psi) << ',' << num(r.F) << ','
       << num(r.grad_norm) << ',' << num(r.psnr) << ',' << num(o.wall_clock ? r.wall_ms : 0.0)
       << ',' << r.dual_iters << ',' << to_string(r.branch) << ',' << num(r.rel_change) << ','
       << num(r.outside_change) << '\n';
  }
}

void write_certificates_text(std::ostream& os, const Trace& t, const CertificateReport& r) {
  os << "variant " << t.variant << "  N " << t.blocks << "  seed " << t.seed << "  problem "
     << t.problem_id << '\n';
  os << "iterations " << t.records.size() << "  sweeps " << t.sweeps() << "  stop "
     << t.stop_reason << '\n';
  for (const auto& c : r.checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << "  worst " << num(c.worst) << "  limit "
       << num(c.limit);
    if (c.offending_k >= 0) os << "  k " << c.offending_k;
    os << '\n';
  }
  os << "sum(-h) " << num(r.sum_neg_h) << "  lambda_min " << num(r.lambda_min) << '\n';
  os << (r.passed() ? "all certificates pass" : "certificate failure") << '\n';
}

void write_certificates_json(std::ostream& os, const Trace& t, const CertificateReport& r) {
  nlohmann::json j;
  j["variant"] = t.variant;
  j["blocks"] = t.blocks;
  j["seed"] = t.seed;
  j["problem"] = t.problem_id;
  j["passed"] = r.passed();
  j["sum_neg_h"] = r.sum_neg_h;
  j["lambda_min"] = r.lambda_min;
  auto& arr = j["certificates"] = nlohmann::json::array();
  for (const auto& c : r.checks) {
    arr.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"worst", c.worst},
                   {"limit", c.limit},
                   {"offending_k", c.offending_k}});
  }
  os << j.dump(2) << '\n';
}

void write_rates_text(std::ostream& os, const Trace& t, const RateFit& fit,
                      const MinGradRate* grad_rate) {
  os << "variant " << t.variant << "  N " << t.blocks << '\n';
  os << "F0 " << num(t.F0) << "  F_final "
     << num(t.sweep_F.empty() ? t.F0 : t.sweep_F.back()) << "  sweeps " << t.sweeps() << '\n';
  os << "function-value rate: " << to_string(fit.model) << "  samples " << fit.samples;
  if (fit.model == RateModel::linear) os << "  omega " << num(fit.omega);
  if (fit.model == RateModel::sublinear) os << "  exponent " << num(fit.exponent);
  os << "  r2 " << num(fit.r2) << "  (linear " << num(fit.r2_linear) << ", sublinear "
     << num(fit.r2_sublinear) << ")\n";
  if (grad_rate) {
    os << "min-gradient rate: C_hat " << num(grad_rate->C_hat) << "  tail slope "
       << num(grad_rate->tail_slope) << (grad_rate->passed ? "  ok" : "  growing") << '\n';
  } else {
    os << "min-gradient rate: not recorded (enable gradient logging)\n";
  }
}

}  // namespace bphila
