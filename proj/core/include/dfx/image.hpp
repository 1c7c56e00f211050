#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace dfx {

/// Row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using GrayImage = Grid<double>;
/// Nonzero = set.
using Mask = Grid<std::uint8_t>;

/// Interleaved multi-channel image with samples on the 0..255 scale.
struct Raster {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 1;
  std::vector<double> data;

  Raster() = default;
  Raster(std::size_t r, std::size_t c, std::size_t ch, double fill = 0.0)
      : rows(r), cols(c), channels(ch), data(r * c * ch, fill) {}

  double& at(std::size_t r, std::size_t c, std::size_t ch = 0) {
    return data[(r * cols + c) * channels + ch];
  }
  double at(std::size_t r, std::size_t c, std::size_t ch = 0) const {
    return data[(r * cols + c) * channels + ch];
  }

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Rec. 601 luma for 3/4-channel input; single-channel input is copied.
GrayImage luminance(const Raster& image);
Raster to_raster(const GrayImage& image);

/// PNG (8-bit gray, gray+alpha, RGB, RGBA) and binary/ASCII PGM/PPM. Alpha is
/// discarded.
Raster read_image(const std::filesystem::path& path);
Mask read_mask(const std::filesystem::path& path);

/// Samples are rounded and clamped to 0..255. The format follows the
/// extension: .png, .pgm or .ppm.
void write_image(const std::filesystem::path& path, const Raster& image);
void write_mask(const std::filesystem::path& path, const Mask& mask);

}  // namespace dfx
