#pragma once

// Batch runs of a RunConfig: one solver run per (variant, N), each writing
// <out>/<variant>_N<k>/{recon.png, trace.csv, certificates.txt,
// certificates.json, rates.txt}.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bphila/config.hpp"

namespace bphila {

struct RunOutcome {
  Variant variant = Variant::v1;
  std::size_t blocks = 1;
  std::filesystem::path dir;
  bool certificates_passed = false;
  std::string error;  // solver or I/O error, empty on success
  std::size_t iterations = 0;
  std::size_t sweeps = 0;
  double F = 0.0;
  double psnr = 0.0;

  bool ok() const { return error.empty() && certificates_passed; }
};

struct ExperimentResult {
  std::filesystem::path output_dir;
  std::vector<RunOutcome> runs;  // in (N, variant) config order
  int exit_status() const;       // 0 iff every run is ok
};

// Output directory and thread count after BLOCKPHILA_OUT / BLOCKPHILA_THREADS.
std::filesystem::path effective_output_dir(const RunConfig& c);
std::size_t effective_threads(const RunConfig& c);

// Runs the matrix, writes every per-run directory plus summary.csv,
// config.ini, ground_truth.png, data.png and x0.png at the top level. Runs are
// spread over effective_threads() workers; a failing run keeps whatever it
// wrote and adds error.txt. Progress lines go to `log` in config order.
ExperimentResult run_experiment(const RunConfig& c, std::ostream& log);

}  // namespace bphila
