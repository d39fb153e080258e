#include "bphila/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "bphila/diagnostics.hpp"
#include "bphila/image_io.hpp"

namespace bphila {

namespace fs = std::filesystem;

int ExperimentResult::exit_status() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.ok(); }) ? 0
                                                                                          : 1;
}

fs::path effective_output_dir(const RunConfig& c) {
  if (const char* e = std::getenv("BLOCKPHILA_OUT"); e && *e) return e;
  return c.output_dir;
}

std::size_t effective_threads(const RunConfig& c) {
  if (const char* e = std::getenv("BLOCKPHILA_THREADS"); e && *e) {
    char* end = nullptr;
    const long v = std::strtol(e, &end, 10);
    if (end == e || *end != '\0' || v < 1) {
      throw ConfigError(std::string("BLOCKPHILA_THREADS: expected a positive integer, got '") + e +
                        "'");
    }
    return static_cast<std::size_t>(v);
  }
  return c.threads;
}

namespace {

struct Job {
  Variant variant;
  std::size_t blocks;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("error writing " + path.string());
}

// D_σ(x) = x − ∇g_σ(x)
ImageTensor gradient_step_denoise(Regularizer r, const ImageTensor& x) {
  r.weight = 1.0;
  return x - g_grad(r, x);
}

RunOutcome run_one(const RunConfig& c, const Problem& pb, const Job& job, const fs::path& root) {
  RunOutcome o;
  o.variant = job.variant;
  o.blocks = job.blocks;
  o.dir = root / (to_string(job.variant) + "_N" + std::to_string(job.blocks));
  try {
    fs::create_directories(o.dir);
    SolverConfig sc = c.solver;
    sc.variant = job.variant;
    const auto part = make_partition(pb.spec.height, pb.spec.width,
                                     partition_scheme_for(c.partition, job.blocks));
    const SolverProblem sp = make_solver_problem(pb.objective, part, sc, &pb.ground_truth);
    RunResult r = run_captured(sp, pb.x0, sc);
    r.trace.seed = pb.spec.seed;
    r.trace.problem_id = pb.id;

    std::ostringstream csv;
    write_trace_csv(csv, r.trace, CsvOptions{c.wall_clock});
    write_file(o.dir / "trace.csv", csv.str());

    const CertificateReport rep = certificate_report(r.trace);
    std::ostringstream txt, js;
    write_certificates_text(txt, r.trace, rep);
    write_certificates_json(js, r.trace, rep);
    write_file(o.dir / "certificates.txt", txt.str());
    write_file(o.dir / "certificates.json", js.str());
    o.certificates_passed = rep.passed();

    double F_best = r.trace.F0;
    for (const auto& rec : r.trace.records) F_best = std::min(F_best, rec.F);
    const RateFit fit = rate_fit(make_rate_probe(r.trace.sweep_F, F_best));
    std::optional<MinGradRate> mg;
    if (sc.log_grad_norms && !r.trace.records.empty()) {
      try {
        mg = min_grad_rate_check(active_grad_norms(r.trace));
      } catch (const std::invalid_argument&) {
        // Too few samples for a trend.
      }
    }
    std::ostringstream rates;
    write_rates_text(rates, r.trace, fit, mg ? &*mg : nullptr);

    o.iterations = r.trace.records.size();
    o.sweeps = r.trace.sweeps();
    o.F = r.trace.records.empty() ? r.trace.F0 : r.trace.records.back().F;
    o.psnr = psnr(r.x, pb.ground_truth);
    rates << "psnr " << o.psnr << '\n';
    if (c.final_denoise) {
      const ImageTensor den = gradient_step_denoise(pb.objective.regularizer(), r.x);
      const double p2 = psnr(den, pb.ground_truth);
      rates << "psnr after final denoise " << p2 << '\n';
      io::write_image(o.dir / "recon_raw.png", r.x);
      io::write_image(o.dir / "recon.png", den);
      o.psnr = p2;
    } else {
      io::write_image(o.dir / "recon.png", r.x);
    }
    write_file(o.dir / "rates.txt", rates.str());

    if (r.error) {
      try {
        std::rethrow_exception(r.error);
      } catch (const std::exception& e) {
        o.error = e.what();
      }
    }
  } catch (const std::exception& e) {
    o.error = e.what();
  }
  if (!o.error.empty()) {
    try {
      write_file(o.dir / "error.txt", o.error + '\n');
    } catch (const std::exception&) {
      // Reported through the outcome.
    }
  }
  return o;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& c, std::ostream& log) {
  validate(c);
  ExperimentResult res;
  res.output_dir = effective_output_dir(c);
  const std::size_t threads = effective_threads(c);
  fs::create_directories(res.output_dir);

  const Problem pb = build_problem(c.problem, c.denoiser);
  write_file(res.output_dir / "config.ini", serialize(c));
  io::write_image(res.output_dir / "ground_truth.png", pb.ground_truth);
  io::write_image(res.output_dir / "data.png", pb.data);
  io::write_image(res.output_dir / "x0.png", pb.x0);

  std::vector<Job> jobs;
  for (std::size_t N : c.partition.blocks) {
    for (Variant v : c.variants) jobs.push_back({v, N});
  }
  res.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      res.runs[j] = run_one(c, pb, jobs[j], res.output_dir);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min(threads, jobs.size());
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream summary;
  summary << "variant,N,iterations,sweeps,F,psnr,certificates,error\n";
  for (const RunOutcome& o : res.runs) {
    const std::string status = !o.error.empty()          ? "ERROR " + o.error
                               : o.certificates_passed ? "ok"
                                                       : "certificate failure";
    log << to_string(o.variant) << " N=" << o.blocks << ": " << status << "  iterations "
        << o.iterations << "  F " << num(o.F) << "  psnr " << num(o.psnr) << '\n';
    std::string err = o.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    summary << to_string(o.variant) << ',' << o.blocks << ',' << o.iterations << ',' << o.sweeps
            << ',' << num(o.F) << ',' << num(o.psnr) << ','
            << (o.certificates_passed ? "pass" : "fail") << ',' << err << '\n';
  }
  write_file(res.output_dir / "summary.csv", summary.str());
  return res;
}

}  // namespace bphila
