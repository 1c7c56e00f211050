#include "dfx/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dfx/error.hpp"

namespace dfx {

std::size_t HistogramSpec::bins_per_axis() const {
  if (!(bin_width > 0.0) || !(half_range > 0.0))
    fail(Errc::configuration, "histogram bin width and range must be positive");
  return 2 * static_cast<std::size_t>(std::floor(half_range / bin_width - 0.5 + 1e-9)) + 1;
}

std::size_t GradientHistogram::occupied_bins() const {
  return static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](std::uint64_t c) { return c != 0; }));
}

namespace {

// round-half-away-from-zero keeps bin(-g) the mirror of bin(g)
std::size_t bin_of(double g, const HistogramSpec& spec, std::size_t bins) {
  const auto centre = static_cast<long>(bins / 2);
  const long idx = std::clamp(std::lround(g / spec.bin_width), -centre, centre);
  return static_cast<std::size_t>(idx + centre);
}

}  // namespace

GradientHistogram gradient_histogram(const GrayImage& image, const HistogramSpec& spec) {
  if (image.rows() < 2 || image.cols() < 2)
    fail(Errc::dimension, "delentropy needs an image of at least 2x2 pixels");
  GradientHistogram h;
  h.spec = spec;
  h.bins_per_axis = spec.bins_per_axis();
  h.counts.assign(h.bins_per_axis * h.bins_per_axis, 0);
  for (std::size_t r = 0; r + 1 < image.rows(); ++r) {
    for (std::size_t c = 0; c + 1 < image.cols(); ++c) {
      const double a = image(r, c), b = image(r, c + 1);
      const double d = image(r + 1, c), e = image(r + 1, c + 1);
      const double gx = ((b - a) + (e - d)) / 2.0;
      const double gy = ((d - a) + (e - b)) / 2.0;
      ++h.counts[bin_of(gx, spec, h.bins_per_axis) * h.bins_per_axis +
                 bin_of(gy, spec, h.bins_per_axis)];
      ++h.total;
    }
  }
  return h;
}

double delentropy(const GradientHistogram& histogram) {
  if (histogram.total == 0) return 0.0;
  // Summing over sorted counts makes the result a function of the multiset of
  // counts alone, so mirrored histograms agree bit for bit.
  std::vector<std::uint64_t> occupied;
  for (auto c : histogram.counts)
    if (c != 0) occupied.push_back(c);
  std::sort(occupied.begin(), occupied.end());
  const double total = static_cast<double>(histogram.total);
  double h = 0.0;
  for (auto c : occupied) {
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return std::max(0.0, h / 2.0);
}

double delentropy(const GrayImage& image, const HistogramSpec& spec) {
  return delentropy(gradient_histogram(image, spec));
}

double delentropy(const Raster& image, const HistogramSpec& spec) {
  return delentropy(luminance(image), spec);
}

double mask_fraction(const Mask& mask) {
  if (mask.size() == 0) fail(Errc::dimension, "empty mask");
  const auto set = std::count_if(mask.data().begin(), mask.data().end(),
                                 [](std::uint8_t v) { return v != 0; });
  return static_cast<double>(set) / static_cast<double>(mask.size());
}

double mask_fraction(const Mask& mask, std::size_t image_rows, std::size_t image_cols) {
  if (mask.rows() != image_rows || mask.cols() != image_cols)
    fail(Errc::dimension, "mask is " + std::to_string(mask.rows()) + "x" +
                              std::to_string(mask.cols()) + " but image is " +
                              std::to_string(image_rows) + "x" + std::to_string(image_cols));
  return mask_fraction(mask);
}

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

// Two-pass raster labeling against the already-visited 8-neighbours.
std::uint32_t count_objects(const Mask& mask) {
  const auto rows = mask.rows(), cols = mask.cols();
  DisjointSet sets(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!mask(r, c)) continue;
      const auto here = r * cols + c;
      if (c > 0 && mask(r, c - 1)) sets.unite(here, here - 1);
      if (r > 0) {
        if (mask(r - 1, c)) sets.unite(here, here - cols);
        if (c > 0 && mask(r - 1, c - 1)) sets.unite(here, here - cols - 1);
        if (c + 1 < cols && mask(r - 1, c + 1)) sets.unite(here, here - cols + 1);
      }
    }
  }
  std::uint32_t roots = 0;
  for (std::size_t i = 0; i < rows * cols; ++i)
    if (mask.data()[i] && sets.find(i) == i) ++roots;
  return roots;
}

double nearest_rank(std::vector<double> values, double percentile) {
  if (values.empty()) fail(Errc::sample_size, "percentile of an empty sample");
  if (!(percentile > 0.0 && percentile <= 100.0))
    fail(Errc::configuration, "percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::map<std::string, Band> percentile_split(const std::map<std::string, double>& values,
                                             double low, double high) {
  if (values.size() < 4)
    fail(Errc::sample_size, "percentile split needs at least 4 values, got " +
                                std::to_string(values.size()));
  if (!(low < high)) fail(Errc::configuration, "low percentile must be below high percentile");
  std::vector<double> sample;
  sample.reserve(values.size());
  for (const auto& [id, v] : values) sample.push_back(v);
  const double low_cut = nearest_rank(sample, low);
  const double high_cut = nearest_rank(sample, high);

  std::map<std::string, Band> out;
  std::size_t n_low = 0, n_high = 0;
  for (const auto& [id, v] : values) {
    Band b = Band::middle;
    if (v <= low_cut) b = Band::low_quartile, ++n_low;
    else if (v > high_cut) b = Band::high_quartile, ++n_high;
    out.emplace(id, b);
  }
  if (n_low == 0 || n_high == 0)
    fail(Errc::sample_size, "values are too concentrated for a percentile split");
  return out;
}

}  // namespace dfx
