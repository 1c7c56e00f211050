#pragma once

// Image-level measures feeding the heterogeneity analysis.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dfx/image.hpp"

namespace dfx {

/// Binning of the joint (d/dx, d/dy) histogram. Bins are centred on integer
/// multiples of `bin_width`, so bin edges are symmetric about zero.
/// `half_range` is the outer edge of the last bin.
struct HistogramSpec {
  double bin_width = 0.5;
  double half_range = 255.25;

  std::size_t bins_per_axis() const;
};

/// Default binning: 2x2 box gradients of 8-bit data are multiples of 0.5 in
/// [-255, 255], so every value lands on its own bin centre.
inline constexpr HistogramSpec kEightBitHistogram{};

struct GradientHistogram {
  HistogramSpec spec;
  std::size_t bins_per_axis = 0;
  std::vector<std::uint64_t> counts;  // row = x-gradient bin, col = y-gradient bin
  std::uint64_t total = 0;

  std::uint64_t count(std::size_t x_bin, std::size_t y_bin) const {
    return counts[x_bin * bins_per_axis + y_bin];
  }
  std::size_t occupied_bins() const;
};

/// Joint histogram of the 2x2 box gradients
///   gx = ((I[r][c+1] - I[r][c]) + (I[r+1][c+1] - I[r+1][c])) / 2
///   gy = ((I[r+1][c] - I[r][c]) + (I[r+1][c+1] - I[r][c+1])) / 2
/// over every 2x2 block. Throws Errc::dimension below 2x2.
GradientHistogram gradient_histogram(const GrayImage& image,
                                     const HistogramSpec& spec = kEightBitHistogram);

/// -1/2 * sum p log2 p over the normalized histogram.
double delentropy(const GradientHistogram& histogram);
double delentropy(const GrayImage& image, const HistogramSpec& spec = kEightBitHistogram);
/// Colour input is reduced to luminance first.
double delentropy(const Raster& image, const HistogramSpec& spec = kEightBitHistogram);

double mask_fraction(const Mask& mask);
/// Checks the mask matches the image it annotates.
double mask_fraction(const Mask& mask, std::size_t image_rows, std::size_t image_cols);

/// Number of 8-connected components of set pixels.
std::uint32_t count_objects(const Mask& mask);

enum class Band { low_quartile, middle, high_quartile };

/// Nearest-rank split: value <= P(low) is low, value > P(high) is high. Needs at
/// least four values and two non-empty bands (Errc::sample_size otherwise).
std::map<std::string, Band> percentile_split(const std::map<std::string, double>& values,
                                             double low = 25.0, double high = 75.0);

/// Nearest-rank percentile of an unsorted sample.
double nearest_rank(std::vector<double> values, double percentile);

}  // namespace dfx
