#include "bphila/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "bphila/simd/kernels.hpp"

namespace bphila {

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         double fill)
    : height_(height), width_(width), channels_(channels),
      data_(height * width * channels, fill) {}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (data_.size() != height * width * channels) {
    throw std::invalid_argument("ImageTensor: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(height) + "x" +
                                std::to_string(width) + "x" + std::to_string(channels));
  }
}

bool ImageTensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_string(const ImageTensor& x) {
  return std::to_string(x.height()) + "x" + std::to_string(x.width()) + "x" +
         std::to_string(x.channels());
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* where) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch " + shape_string(a) +
                                " vs " + shape_string(b));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return simd::active().dot(a.data(), b.data(), a.size());
}

double squared_norm(std::span<const double> a) {
  return simd::active().dot(a.data(), a.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: length mismatch");
  return simd::active().squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  simd::active().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> y) {
  simd::active().scale(alpha, y.data(), y.size());
}

double dot(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "dot");
  return dot(a.data(), b.data());
}

double squared_norm(const ImageTensor& a) { return squared_norm(a.data()); }

ImageTensor operator+(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "operator+");
  ImageTensor out = a;
  axpy(1.0, b.data(), out.data());
  return out;
}

ImageTensor operator-(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "operator-");
  ImageTensor out = a;
  axpy(-1.0, b.data(), out.data());
  return out;
}

ImageTensor operator*(double alpha, const ImageTensor& a) {
  ImageTensor out = a;
  scale(alpha, out.data());
  return out;
}

// ---------------------------------------------------------------------------

std::size_t PartitionScheme::block_count() const noexcept {
  switch (kind) {
    case PartitionKind::full: return 1;
    case PartitionKind::horizontal_halves: return 2;
    case PartitionKind::quadrants: return 4;
    case PartitionKind::grid: return rows * cols;
  }
  return 0;
}

std::string to_string(PartitionKind kind) {
  switch (kind) {
    case PartitionKind::full: return "full";
    case PartitionKind::horizontal_halves: return "halves";
    case PartitionKind::quadrants: return "quadrants";
    case PartitionKind::grid: return "grid";
  }
  return "?";
}

PartitionKind partition_kind_from_string(const std::string& s) {
  if (s == "full") return PartitionKind::full;
  if (s == "halves" || s == "horizontal-halves") return PartitionKind::horizontal_halves;
  if (s == "quadrants") return PartitionKind::quadrants;
  if (s == "grid") return PartitionKind::grid;
  throw std::invalid_argument("unknown partition scheme '" + s + "'");
}

BlockPartition::BlockPartition(std::size_t height, std::size_t width, PartitionScheme scheme,
                               std::vector<Rect> blocks)
    : height_(height), width_(width), scheme_(scheme), blocks_(std::move(blocks)) {}

const Rect& BlockPartition::block(std::size_t i) const {
  if (i >= blocks_.size()) {
    throw std::out_of_range("block index " + std::to_string(i) + " out of range (N=" +
                            std::to_string(blocks_.size()) + ")");
  }
  return blocks_[i];
}

std::size_t BlockPartition::block_of(std::size_t y, std::size_t x) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].contains(y, x)) return i;
  }
  throw std::out_of_range("pixel outside partition");
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> split_axis(std::size_t extent,
                                                            std::size_t parts) {
  const std::size_t base = extent / parts;
  if (base == 0) throw std::invalid_argument("partition produces an empty block");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < parts; ++k) {
    const std::size_t start = k * base;
    const std::size_t len = (k + 1 == parts) ? extent - start : base;
    out.emplace_back(start, len);
  }
  return out;
}

}  // namespace

BlockPartition make_partition(std::size_t height, std::size_t width, PartitionScheme scheme) {
  if (height == 0 || width == 0) throw std::invalid_argument("make_partition: zero-sized image");
  std::size_t rows = 1;
  std::size_t cols = 1;
  switch (scheme.kind) {
    case PartitionKind::full: break;
    case PartitionKind::horizontal_halves: rows = 2; break;
    case PartitionKind::quadrants: rows = 2; cols = 2; break;
    case PartitionKind::grid:
      rows = scheme.rows;
      cols = scheme.cols;
      if (rows == 0 || cols == 0) throw std::invalid_argument("make_partition: empty grid");
      break;
  }
  scheme.rows = rows;
  scheme.cols = cols;
  const auto ys = split_axis(height, rows);
  const auto xs = split_axis(width, cols);
  std::vector<Rect> blocks;
  for (const auto& [y0, h] : ys) {
    for (const auto& [x0, w] : xs) blocks.push_back(Rect{y0, x0, h, w});
  }
  return BlockPartition(height, width, scheme, std::move(blocks));
}

namespace {

void check_grid(const ImageTensor& x, const BlockPartition& p, const char* where) {
  if (x.height() != p.height() || x.width() != p.width()) {
    throw std::invalid_argument(std::string(where) + ": image " + shape_string(x) +
                                " does not match partition grid");
  }
}

}  // namespace

BlockVector extract_block(const ImageTensor& x, const BlockPartition& p, std::size_t i) {
  check_grid(x, p, "extract_block");
  const Rect& r = p.block(i);
  BlockVector out;
  out.reserve(r.area() * x.channels());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t y = 0; y < r.h; ++y) {
      const double* row = &x(c, r.y0 + y, r.x0);
      out.insert(out.end(), row, row + r.w);
    }
  }
  return out;
}

void scatter_block_inplace(ImageTensor& x, const BlockPartition& p, std::size_t i,
                           std::span<const double> z) {
  check_grid(x, p, "scatter_block");
  const Rect& r = p.block(i);
  if (z.size() != r.area() * x.channels()) {
    throw std::invalid_argument("scatter_block: block vector has length " +
                                std::to_string(z.size()) + ", expected " +
                                std::to_string(r.area() * x.channels()));
  }
  std::size_t k = 0;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t y = 0; y < r.h; ++y) {
      std::copy_n(z.data() + k, r.w, &x(c, r.y0 + y, r.x0));
      k += r.w;
    }
  }
}

ImageTensor scatter_block(const ImageTensor& x, const BlockPartition& p, std::size_t i,
                          std::span<const double> z) {
  ImageTensor out = x;
  scatter_block_inplace(out, p, i, z);
  return out;
}

PaddedBlock padded_geometry(const BlockPartition& p, std::size_t i, std::size_t pad) {
  const Rect& r = p.block(i);
  PaddedBlock g;
  g.block_index = i;
  g.pad = pad;
  g.periodic_y = (r.h == p.height());
  g.periodic_x = (r.w == p.width());
  g.pad_y = g.periodic_y ? 0 : pad;
  g.pad_x = g.periodic_x ? 0 : pad;
  g.patch_h = r.h + 2 * g.pad_y;
  g.patch_w = r.w + 2 * g.pad_x;
  if (g.patch_h > p.height() || g.patch_w > p.width()) {
    throw std::invalid_argument("extract_padded: pad " + std::to_string(pad) + " around block " +
                                std::to_string(i) + " exceeds the image period");
  }
  g.origin_y = (r.y0 + p.height() - g.pad_y % p.height()) % p.height();
  g.origin_x = (r.x0 + p.width() - g.pad_x % p.width()) % p.width();
  g.interior = Rect{g.pad_y, g.pad_x, r.h, r.w};
  return g;
}

std::size_t max_admissible_pad(const BlockPartition& p) {
  std::size_t best = static_cast<std::size_t>(-1);
  for (const Rect& r : p.blocks()) {
    if (r.h != p.height()) best = std::min(best, (p.height() - r.h) / 2);
    if (r.w != p.width()) best = std::min(best, (p.width() - r.w) / 2);
  }
  return best;
}

std::pair<PaddedBlock, ImageTensor> extract_padded(const ImageTensor& x, const BlockPartition& p,
                                                   std::size_t i, std::size_t pad) {
  check_grid(x, p, "extract_padded");
  PaddedBlock g = padded_geometry(p, i, pad);
  ImageTensor patch(g.patch_h, g.patch_w, x.channels());
  const std::size_t H = x.height();
  const std::size_t W = x.width();
  for (std::size_t c = 0; c < x.channels(); ++c) {
    for (std::size_t y = 0; y < g.patch_h; ++y) {
      const std::size_t sy = (g.origin_y + y) % H;
      for (std::size_t xx = 0; xx < g.patch_w; ++xx) {
        patch(c, y, xx) = x(c, sy, (g.origin_x + xx) % W);
      }
    }
  }
  return {g, std::move(patch)};
}

BlockVector patch_interior(const ImageTensor& patch, const PaddedBlock& geom) {
  const Rect& r = geom.interior;
  BlockVector out;
  out.reserve(r.area() * patch.channels());
  for (std::size_t c = 0; c < patch.channels(); ++c) {
    for (std::size_t y = 0; y < r.h; ++y) {
      const double* row = &patch(c, r.y0 + y, r.x0);
      out.insert(out.end(), row, row + r.w);
    }
  }
  return out;
}

}  // namespace bphila
