#pragma once

// Experiment configuration: a sectioned key = value file.
//
//   [problem]    task, height, width, channels, image, kernel_size, kernel_std,
//                kernel, scale, noise, lambda, sigma, seed
//   [denoiser]   kind, kernel_size, kernel_std, layers, hidden_channels,
//                conv_size, seed, weights
//   [solver]     alpha_min, alpha_max, beta_max, gamma, armijo_sigma, delta, tau,
//                mu, max_backtracks, max_iters, epsilon, dual_max_iterations,
//                dual_stride, divergence_threshold, emit_grad_norms
//   [partition]  scheme, blocks, rows, cols, pad
//   [run]        output, variants, threads, final_denoise, wall_clock
//
// Every key is optional. Unknown sections or keys are errors. Relative input
// paths (image, kernel, weights) are resolved against the config file's
// directory; the output directory is taken as given.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bphila/problems.hpp"
#include "bphila/solver.hpp"
#include "bphila/tensor.hpp"

namespace bphila {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PartitionConfig {
  // std::nullopt picks the scheme from N: 1 full, 2 halves, 4 quadrants,
  // other perfect squares an n×n grid.
  std::optional<PartitionKind> scheme;
  std::size_t rows = 1;  // grid only
  std::size_t cols = 1;
  std::vector<std::size_t> blocks{1};
  std::optional<std::size_t> pad;

  friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

struct RunConfig {
  ProblemSpec problem;
  DenoiserSpec denoiser;
  SolverConfig solver;
  PartitionConfig partition;
  std::vector<Variant> variants{Variant::v1};
  std::string output_dir = "results";
  std::size_t threads = 1;
  // Writes D_σ(x) as recon.png (and x as recon_raw.png).
  bool final_denoise = false;
  bool wall_clock = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Sets one field from its text form, as a config line `key = value` in
// [section] would. Does not run validate().
void set_config_value(RunConfig& c, const std::string& section, const std::string& key,
                      const std::string& value, const std::filesystem::path& base_dir = ".");

// Scheme for N blocks under the config; throws ConfigError on a mismatch.
PartitionScheme partition_scheme_for(const PartitionConfig& p, std::size_t N);

// Checks every field; messages name the field as "section.key".
void validate(const RunConfig& c);

RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_string(const std::string& text,
                              const std::filesystem::path& base_dir = ".");
// Writes every field explicitly; parse_config_string(serialize(c)) == c.
std::string serialize(const RunConfig& c);

}  // namespace bphila
