#include "bphila/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace bphila::io {
namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "'");
  return f;
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

// Next header token of a netpbm file, skipping whitespace and comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw std::runtime_error("truncated netpbm header");
  return tok;
}

ImageTensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  const std::string magic = pnm_token(in);
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6") {
    throw std::runtime_error("'" + path.string() + "': unsupported netpbm type " + magic);
  }
  const std::size_t width = std::stoul(pnm_token(in));
  const std::size_t height = std::stoul(pnm_token(in));
  const unsigned long maxval = std::stoul(pnm_token(in));
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
    throw std::runtime_error("'" + path.string() + "': bad netpbm header");
  }
  const std::size_t channels = (magic == "P3" || magic == "P6") ? 3 : 1;
  const bool binary = (magic == "P5" || magic == "P6");
  const bool wide = maxval > 255;
  ImageTensor img(height, width, channels);
  const double inv = 1.0 / static_cast<double>(maxval);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        unsigned long v = 0;
        if (binary) {
          const int hi = in.get();
          if (hi == EOF) throw std::runtime_error("'" + path.string() + "': truncated data");
          v = static_cast<unsigned long>(hi);
          if (wide) {
            const int lo = in.get();
            if (lo == EOF) throw std::runtime_error("'" + path.string() + "': truncated data");
            v = (v << 8) | static_cast<unsigned long>(lo);
          }
        } else {
          v = std::stoul(pnm_token(in));
        }
        img(c, y, x) = std::min(1.0, static_cast<double>(v) * inv);
      }
    }
  }
  return img;
}

ImageTensor read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng: cannot create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("'" + path.string() + "': invalid PNG");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // host little-endian 16-bit samples
  png_read_update_info(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  const int out_channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  std::vector<unsigned char> buffer(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t color_channels = (out_channels >= 3) ? 3 : 1;
  ImageTensor img(height, width, color_channels);
  const double inv = out_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < color_channels; ++c) {
        const std::size_t idx = x * out_channels + c;
        double v;
        if (out_depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + 2 * idx, 2);
          v = s;
        } else {
          v = rows[y][idx];
        }
        img(c, y, x) = v * inv;
      }
    }
  }
  return img;
}

unsigned quantize(double v, unsigned maxval) {
  const double clamped = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
  return static_cast<unsigned>(std::lround(clamped * maxval));
}

void write_pnm(const std::filesystem::path& path, const ImageTensor& x, int bit_depth,
               std::size_t want_channels) {
  if (x.channels() != want_channels) {
    throw std::invalid_argument("'" + path.string() + "': extension requires " +
                                std::to_string(want_channels) + " channel(s)");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  const unsigned maxval = bit_depth == 16 ? 65535u : 255u;
  out << (want_channels == 3 ? "P6" : "P5") << '\n'
      << x.width() << ' ' << x.height() << '\n'
      << maxval << '\n';
  for (std::size_t y = 0; y < x.height(); ++y) {
    for (std::size_t xx = 0; xx < x.width(); ++xx) {
      for (std::size_t c = 0; c < x.channels(); ++c) {
        const unsigned v = quantize(x(c, y, xx), maxval);
        if (bit_depth == 16) out.put(static_cast<char>(v >> 8));
        out.put(static_cast<char>(v & 0xFF));
      }
    }
  }
}

void write_png(const std::filesystem::path& path, const ImageTensor& x, int bit_depth) {
  if (x.channels() != 1 && x.channels() != 3) {
    throw std::invalid_argument("write_png: 1 or 3 channels required");
  }
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng: cannot create info struct");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("'" + path.string() + "': PNG write failed");
  }
  png_init_io(png, f.get());
  const int color = x.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, static_cast<png_uint_32>(x.width()),
               static_cast<png_uint_32>(x.height()), bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const unsigned maxval = bit_depth == 16 ? 65535u : 255u;
  const std::size_t bytes = bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> row(x.width() * x.channels() * bytes);
  for (std::size_t y = 0; y < x.height(); ++y) {
    std::size_t k = 0;
    for (std::size_t xx = 0; xx < x.width(); ++xx) {
      for (std::size_t c = 0; c < x.channels(); ++c) {
        const unsigned v = quantize(x(c, y, xx), maxval);
        if (bit_depth == 16) row[k++] = static_cast<unsigned char>(v >> 8);  // PNG is big-endian
        row[k++] = static_cast<unsigned char>(v & 0xFF);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageTensor read_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  ImageTensor img = (ext == ".png") ? read_png(path) : read_pnm(path);
  if (!img.all_finite()) throw std::runtime_error("'" + path.string() + "': non-finite pixels");
  return img;
}

void write_image(const std::filesystem::path& path, const ImageTensor& x, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("bit depth must be 8 or 16");
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_png(path, x, bit_depth);
  } else if (ext == ".pgm") {
    write_pnm(path, x, bit_depth, 1);
  } else if (ext == ".ppm") {
    write_pnm(path, x, bit_depth, 3);
  } else {
    throw std::invalid_argument("unsupported image extension '" + ext + "'");
  }
}

}  // namespace bphila::io
