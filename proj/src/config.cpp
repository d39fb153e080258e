#include "bphila/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace bphila {

namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& field, const std::string& v) {
  double d = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    fail(field, "expected a number, got '" + v + "'");
  }
  return d;
}

std::uint64_t to_uint(const std::string& field, const std::string& v) {
  std::uint64_t u = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), u);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    fail(field, "expected a nonnegative integer, got '" + v + "'");
  }
  return u;
}

std::size_t to_size(const std::string& field, const std::string& v) {
  return static_cast<std::size_t>(to_uint(field, v));
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  fail(field, "expected true or false, got '" + v + "'");
}

std::optional<double> to_optional_double(const std::string& field, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return to_double(field, v);
}

std::optional<std::size_t> to_optional_size(const std::string& field, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return to_size(field, v);
}

std::string resolve(const fs::path& base, const std::string& v) {
  if (v.empty()) return v;
  const fs::path p(v);
  return (p.is_absolute() ? p : base / p).lexically_normal().string();
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& items, std::string (*f)(T)) {
  std::string s;
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (j) s += ",";
    s += f(items[j]);
  }
  return s;
}

std::string size_str(std::size_t v) { return std::to_string(v); }
std::string variant_str(Variant v) { return to_string(v); }

using Setter = void (*)(RunConfig&, const std::string& field, const std::string& value,
                        const fs::path& base);

struct Key {
  const char* section;
  const char* name;
  Setter set;
};

// clang-format off
const Key kKeys[] = {
  {"problem", "task", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) {
     try { c.problem.task = task_from_string(v); } catch (const std::invalid_argument& e) { fail(f, e.what()); } }},
  {"problem", "height", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.height = to_size(f, v); }},
  {"problem", "width", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.width = to_size(f, v); }},
  {"problem", "channels", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.channels = to_size(f, v); }},
  {"problem", "image", [](RunConfig& c, const std::string&, const std::string& v, const fs::path& b) {
     c.problem.image = is_procedural(v) ? v : resolve(b, v); }},
  {"problem", "kernel_size", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.kernel_size = to_size(f, v); }},
  {"problem", "kernel_std", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.kernel_std = to_double(f, v); }},
  {"problem", "kernel", [](RunConfig& c, const std::string&, const std::string& v, const fs::path& b) { c.problem.kernel_path = resolve(b, v); }},
  {"problem", "scale", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.scale = to_size(f, v); }},
  {"problem", "noise", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.noise = to_double(f, v); }},
  {"problem", "lambda", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.lambda = to_optional_double(f, v); }},
  {"problem", "sigma", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.sigma = to_optional_double(f, v); }},
  {"problem", "seed", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.problem.seed = to_uint(f, v); }},

  {"denoiser", "kind", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) {
     try { c.denoiser.kind = denoiser_kind_from_string(v); } catch (const std::invalid_argument& e) { fail(f, e.what()); } }},
  {"denoiser", "kernel_size", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.denoiser.kernel_size = to_size(f, v); }},
  {"denoiser", "kernel_std", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.denoiser.kernel_std = to_double(f, v); }},
  {"denoiser", "layers", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.denoiser.layers = to_size(f, v); }},
  {"denoiser", "hidden_channels", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.denoiser.hidden_channels = to_size(f, v); }},
  {"denoiser", "conv_size", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.denoiser.conv_size = to_size(f, v); }},
  {"denoiser", "seed", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.denoiser.seed = to_uint(f, v); }},
  {"denoiser", "weights", [](RunConfig& c, const std::string&, const std::string& v, const fs::path& b) { c.denoiser.weights_path = resolve(b, v); }},

  {"solver", "alpha_min", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.alpha_min = to_double(f, v); }},
  {"solver", "alpha_max", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.alpha_max = to_double(f, v); }},
  {"solver", "beta_max", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.beta_max = to_double(f, v); }},
  {"solver", "gamma", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.gamma = to_double(f, v); }},
  {"solver", "armijo_sigma", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.armijo_sigma = to_double(f, v); }},
  {"solver", "delta", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.delta = to_double(f, v); }},
  {"solver", "tau", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.tau = to_double(f, v); }},
  {"solver", "mu", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.mu = to_double(f, v); }},
  {"solver", "max_backtracks", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.max_backtracks = to_size(f, v); }},
  {"solver", "max_iters", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.max_iters = to_size(f, v); }},
  {"solver", "epsilon", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.epsilon = to_double(f, v); }},
  {"solver", "dual_max_iterations", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.dual.max_iterations = to_size(f, v); }},
  {"solver", "dual_stride", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.dual.stride = to_size(f, v); }},
  {"solver", "divergence_threshold", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.divergence_threshold = to_double(f, v); }},
  {"solver", "emit_grad_norms", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.solver.log_grad_norms = to_bool(f, v); }},

  {"partition", "scheme", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) {
     if (v == "auto") { c.partition.scheme.reset(); return; }
     try { c.partition.scheme = partition_kind_from_string(v); } catch (const std::invalid_argument& e) { fail(f, e.what()); } }},
  {"partition", "blocks", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) {
     c.partition.blocks.clear();
     for (const auto& s : split_list(v)) c.partition.blocks.push_back(to_size(f, s)); }},
  {"partition", "rows", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.partition.rows = to_size(f, v); }},
  {"partition", "cols", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.partition.cols = to_size(f, v); }},
  {"partition", "pad", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) {
     c.partition.pad = to_optional_size(f, v);
     c.solver.pad = c.partition.pad; }},

  {"run", "output", [](RunConfig& c, const std::string&, const std::string& v, const fs::path&) { c.output_dir = v; }},
  {"run", "variants", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) {
     c.variants.clear();
     if (v == "all") {
       for (int j = 0; j < 8; ++j) c.variants.push_back(static_cast<Variant>(j));
       return;
     }
     for (const auto& s : split_list(v)) {
       try { c.variants.push_back(variant_from_string(s)); } catch (const std::invalid_argument& e) { fail(f, e.what()); }
     } }},
  {"run", "threads", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.threads = to_size(f, v); }},
  {"run", "final_denoise", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.final_denoise = to_bool(f, v); }},
  {"run", "wall_clock", [](RunConfig& c, const std::string& f, const std::string& v, const fs::path&) { c.wall_clock = to_bool(f, v); }},
};
// clang-format on

const Key* find_key(const std::string& section, const std::string& name) {
  for (const Key& k : kKeys) {
    if (section == k.section && name == k.name) return &k;
  }
  return nullptr;
}

bool known_section(const std::string& s) {
  return std::any_of(std::begin(kKeys), std::end(kKeys),
                     [&](const Key& k) { return s == k.section; });
}

void require_file(const std::string& field, const std::string& path) {
  if (path.empty()) return;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) fail(field, "file '" + path + "' does not exist");
}

}  // namespace

void set_config_value(RunConfig& c, const std::string& section, const std::string& key,
                      const std::string& value, const fs::path& base_dir) {
  const Key* k = find_key(section, key);
  if (!k) {
    throw ConfigError(known_section(section) ? section + "." + key + ": unknown key"
                                             : "[" + section + "]: unknown section");
  }
  k->set(c, section + "." + key, trim(value), base_dir);
}

PartitionScheme partition_scheme_for(const PartitionConfig& p, std::size_t N) {
  const std::string f = "partition.blocks";
  if (N == 0) fail(f, "N must be >= 1");
  if (!p.scheme) {
    if (N == 1) return PartitionScheme::full();
    if (N == 2) return PartitionScheme::halves();
    if (N == 4) return PartitionScheme::quadrants();
    const auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(N))));
    if (r * r == N) return PartitionScheme::grid(r, r);
    fail(f, "no automatic scheme for N=" + std::to_string(N) +
                " (set partition.scheme = grid with rows and cols)");
  }
  PartitionScheme s;
  switch (*p.scheme) {
    case PartitionKind::full: s = PartitionScheme::full(); break;
    case PartitionKind::horizontal_halves: s = PartitionScheme::halves(); break;
    case PartitionKind::quadrants: s = PartitionScheme::quadrants(); break;
    case PartitionKind::grid: s = PartitionScheme::grid(p.rows, p.cols); break;
  }
  if (s.block_count() != N) {
    fail(f, "N=" + std::to_string(N) + " does not match scheme '" + to_string(*p.scheme) +
                "' with " + std::to_string(s.block_count()) + " blocks");
  }
  return s;
}

void validate(const RunConfig& c) {
  const ProblemSpec& p = c.problem;
  if (p.height == 0) fail("problem.height", "must be >= 1");
  if (p.width == 0) fail("problem.width", "must be >= 1");
  if (p.channels != 1 && p.channels != 3) fail("problem.channels", "must be 1 or 3");
  if (!is_procedural(p.image)) require_file("problem.image", p.image);
  if (p.kernel_path.empty()) {
    if (p.kernel_size % 2 == 0) fail("problem.kernel_size", "must be odd");
    if (!(p.kernel_std > 0.0)) fail("problem.kernel_std", "must be > 0");
  }
  require_file("problem.kernel", p.kernel_path);
  if (p.task == Task::super_resolution) {
    if (p.scale < 1) fail("problem.scale", "must be >= 1");
    if (is_procedural(p.image) && (p.height % p.scale != 0 || p.width % p.scale != 0)) {
      fail("problem.scale", "image dimensions must be divisible by the scale factor");
    }
  }
  if (!(p.noise >= 0.0) || !std::isfinite(p.noise)) fail("problem.noise", "must be >= 0");
  if (p.lambda && !(*p.lambda > 0.0)) fail("problem.lambda", "must be > 0");
  if (p.sigma && !(*p.sigma >= 0.0)) fail("problem.sigma", "must be >= 0");

  const DenoiserSpec& d = c.denoiser;
  if (d.kind == DenoiserKind::linear) {
    if (d.kernel_size % 2 == 0) fail("denoiser.kernel_size", "must be odd");
    if (!(d.kernel_std > 0.0)) fail("denoiser.kernel_std", "must be > 0");
  } else {
    if (d.layers == 0) fail("denoiser.layers", "must be >= 1");
    if (d.hidden_channels == 0) fail("denoiser.hidden_channels", "must be >= 1");
    if (d.conv_size % 2 == 0) fail("denoiser.conv_size", "must be odd");
  }
  require_file("denoiser.weights", d.weights_path);

  try {
    c.solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (c.partition.blocks.empty()) fail("partition.blocks", "needs at least one block count");
  std::set<std::size_t> seen;
  for (std::size_t N : c.partition.blocks) {
    if (!seen.insert(N).second) fail("partition.blocks", "duplicate N=" + std::to_string(N));
    const PartitionScheme s = partition_scheme_for(c.partition, N);
    if (is_procedural(p.image)) {
      try {
        (void)make_partition(p.height, p.width, s);
      } catch (const std::invalid_argument& e) {
        fail("partition.blocks", "N=" + std::to_string(N) + ": " + e.what());
      }
    }
  }

  if (c.variants.empty()) fail("run.variants", "needs at least one variant");
  std::set<Variant> vs(c.variants.begin(), c.variants.end());
  if (vs.size() != c.variants.size()) fail("run.variants", "duplicate variant");
  if (c.threads == 0) fail("run.threads", "must be >= 1");
  if (c.output_dir.empty()) fail("run.output", "must not be empty");
  std::error_code ec;
  if (fs::exists(c.output_dir, ec) && !fs::is_directory(c.output_dir, ec)) {
    fail("run.output", "'" + c.output_dir + "' exists and is not a directory");
  }
}

RunConfig parse_config_string(const std::string& text, const fs::path& base_dir) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(section + ": key outside a section");
    if (!known_section(section)) throw ConfigError("[" + section + "]: unknown section");
    for (const auto& [name, value] : body) {
      const std::string field = section + "." + name;
      set_config_value(c, section, name, value.data(), base_dir);
    }
  }
  validate(c);
  return c;
}

RunConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), path.parent_path().empty() ? fs::path(".")
                                                                   : path.parent_path());
}

std::string serialize(const RunConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string("auto"); };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  const ProblemSpec& p = c.problem;
  const DenoiserSpec& d = c.denoiser;
  const SolverConfig& s = c.solver;
  std::ostringstream os;
  os << "[problem]\n"
     << "task = " << to_string(p.task) << '\n'
     << "height = " << p.height << '\n'
     << "width = " << p.width << '\n'
     << "channels = " << p.channels << '\n'
     << "image = " << p.image << '\n'
     << "kernel_size = " << p.kernel_size << '\n'
     << "kernel_std = " << num(p.kernel_std) << '\n';
  if (!p.kernel_path.empty()) os << "kernel = " << p.kernel_path << '\n';
  os << "scale = " << p.scale << '\n'
     << "noise = " << num(p.noise) << '\n'
     << "lambda = " << opt(p.lambda) << '\n'
     << "sigma = " << opt(p.sigma) << '\n'
     << "seed = " << p.seed << "\n\n";
  os << "[denoiser]\n"
     << "kind = " << to_string(d.kind) << '\n'
     << "kernel_size = " << d.kernel_size << '\n'
     << "kernel_std = " << num(d.kernel_std) << '\n'
     << "layers = " << d.layers << '\n'
     << "hidden_channels = " << d.hidden_channels << '\n'
     << "conv_size = " << d.conv_size << '\n'
     << "seed = " << d.seed << '\n';
  if (!d.weights_path.empty()) os << "weights = " << d.weights_path << '\n';
  os << "\n[solver]\n"
     << "alpha_min = " << num(s.alpha_min) << '\n'
     << "alpha_max = " << num(s.alpha_max) << '\n'
     << "beta_max = " << num(s.beta_max) << '\n'
     << "gamma = " << num(s.gamma) << '\n'
     << "armijo_sigma = " << num(s.armijo_sigma) << '\n'
     << "delta = " << num(s.delta) << '\n'
     << "tau = " << num(s.tau) << '\n'
     << "mu = " << num(s.mu) << '\n'
     << "max_backtracks = " << s.max_backtracks << '\n'
     << "max_iters = " << s.max_iters << '\n'
     << "epsilon = " << num(s.epsilon) << '\n'
     << "dual_max_iterations = " << s.dual.max_iterations << '\n'
     << "dual_stride = " << s.dual.stride << '\n'
     << "divergence_threshold = " << num(s.divergence_threshold) << '\n'
     << "emit_grad_norms = " << b(s.log_grad_norms) << "\n\n";
  os << "[partition]\n"
     << "scheme = " << (c.partition.scheme ? to_string(*c.partition.scheme) : "auto") << '\n'
     << "blocks = " << join(c.partition.blocks, size_str) << '\n'
     << "rows = " << c.partition.rows << '\n'
     << "cols = " << c.partition.cols << '\n'
     << "pad = " << (c.partition.pad ? std::to_string(*c.partition.pad) : "auto") << "\n\n";
  os << "[run]\n"
     << "output = " << c.output_dir << '\n'
     << "variants = " << join(c.variants, variant_str) << '\n'
     << "threads = " << c.threads << '\n'
     << "final_denoise = " << b(c.final_denoise) << '\n'
     << "wall_clock = " << b(c.wall_clock) << '\n';
  return os.str();
}

}  // namespace bphila
