#pragma once

// Dense image tensors and the block-selection algebra used by the solver.
//
// Layout: planar, row-major. Element (c, y, x) lives at
//   data[(c * height + y) * width + x].
// Block vectors use the same convention restricted to the block rectangle:
// channel-major, then rows, then columns of the rectangle. All channels of a
// pixel belong to the same block.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bphila {

using BlockVector = std::vector<double>;

class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels = 1,
              double fill = 0.0);
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }
  const double& operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> plane(std::size_t c) noexcept {
    return std::span<double>(data_).subspan(c * pixels(), pixels());
  }
  std::span<const double> plane(std::size_t c) const noexcept {
    return std::span<const double>(data_).subspan(c * pixels(), pixels());
  }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  bool all_finite() const noexcept;

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* where);
std::string shape_string(const ImageTensor& x);

// Elementwise helpers backed by the SIMD kernel table.
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> y);

double dot(const ImageTensor& a, const ImageTensor& b);
double squared_norm(const ImageTensor& a);
ImageTensor operator+(const ImageTensor& a, const ImageTensor& b);
ImageTensor operator-(const ImageTensor& a, const ImageTensor& b);
ImageTensor operator*(double alpha, const ImageTensor& a);

// ---------------------------------------------------------------------------
// Block partitions

struct Rect {
  std::size_t y0 = 0;
  std::size_t x0 = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t area() const noexcept { return h * w; }
  bool contains(std::size_t y, std::size_t x) const noexcept {
    return y >= y0 && y < y0 + h && x >= x0 && x < x0 + w;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

enum class PartitionKind { full, horizontal_halves, quadrants, grid };

struct PartitionScheme {
  PartitionKind kind = PartitionKind::full;
  std::size_t rows = 1;  // grid only
  std::size_t cols = 1;  // grid only

  static PartitionScheme full() { return {PartitionKind::full, 1, 1}; }
  static PartitionScheme halves() { return {PartitionKind::horizontal_halves, 2, 1}; }
  static PartitionScheme quadrants() { return {PartitionKind::quadrants, 2, 2}; }
  static PartitionScheme grid(std::size_t r, std::size_t c) {
    return {PartitionKind::grid, r, c};
  }
  std::size_t block_count() const noexcept;
  friend bool operator==(const PartitionScheme&, const PartitionScheme&) = default;
};

std::string to_string(PartitionKind kind);
PartitionKind partition_kind_from_string(const std::string& s);

class BlockPartition {
 public:
  BlockPartition(std::size_t height, std::size_t width, PartitionScheme scheme,
                 std::vector<Rect> blocks);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t total_dim() const noexcept { return height_ * width_; }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  const Rect& block(std::size_t i) const;
  const std::vector<Rect>& blocks() const noexcept { return blocks_; }
  const PartitionScheme& scheme() const noexcept { return scheme_; }

  // Index of the block containing pixel (y, x).
  std::size_t block_of(std::size_t y, std::size_t x) const;

 private:
  std::size_t height_;
  std::size_t width_;
  PartitionScheme scheme_;
  std::vector<Rect> blocks_;
};

// Rows (and columns) are split evenly; the remainder goes to the last block
// row (column).
BlockPartition make_partition(std::size_t height, std::size_t width, PartitionScheme scheme);

// U_i^T x
BlockVector extract_block(const ImageTensor& x, const BlockPartition& p, std::size_t i);
// x + U_i (z - U_i^T x)
ImageTensor scatter_block(const ImageTensor& x, const BlockPartition& p, std::size_t i,
                          std::span<const double> z);
void scatter_block_inplace(ImageTensor& x, const BlockPartition& p, std::size_t i,
                           std::span<const double> z);

// Geometry of a padded read patch.
//
// The block rectangle is grown by `pad` pixels on every side along each axis
// the block does not already span; coordinates wrap around the image. Along an
// axis the block spans completely, the patch is the whole (periodic) axis and
// no extra pixels are read.
struct PaddedBlock {
  std::size_t block_index = 0;
  std::size_t pad = 0;
  std::size_t pad_y = 0;
  std::size_t pad_x = 0;
  bool periodic_y = false;
  bool periodic_x = false;
  // Top-left corner in image coordinates (may be "negative": stored modulo the
  // image size) and extent of the patch.
  std::size_t origin_y = 0;
  std::size_t origin_x = 0;
  std::size_t patch_h = 0;
  std::size_t patch_w = 0;
  // Rectangle of the block inside the patch.
  Rect interior;

  std::size_t patch_area() const noexcept { return patch_h * patch_w; }
};

PaddedBlock padded_geometry(const BlockPartition& p, std::size_t i, std::size_t pad);

// Largest pad accepted by extract_padded for every block of the partition.
std::size_t max_admissible_pad(const BlockPartition& p);

// Ū_i^T x as a patch image. Rejects a pad whose patch would exceed the image
// period along a padded axis.
std::pair<PaddedBlock, ImageTensor> extract_padded(const ImageTensor& x, const BlockPartition& p,
                                                   std::size_t i, std::size_t pad);

// U_i^T Ū_i applied to a patch: the block values sitting in the interior.
BlockVector patch_interior(const ImageTensor& patch, const PaddedBlock& geom);

}  // namespace bphila
