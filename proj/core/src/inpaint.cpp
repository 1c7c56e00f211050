#include "dfx/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dfx/error.hpp"

namespace dfx {

FillResult remove_object(const FillTask& task) {
  const auto& img = task.image;
  const auto& mask = task.mask;
  if (mask.rows() != img.rows || mask.cols() != img.cols)
    fail(Errc::dimension, "mask and image sizes differ");
  if (!(task.tol > 0.0)) fail(Errc::configuration, "fill tolerance must be positive");

  FillResult out{img, 0, 0.0};
  std::vector<std::size_t> unknown;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask.data()[i]) unknown.push_back(i);
  if (unknown.empty()) return out;
  if (unknown.size() == mask.size()) fail(Errc::boundary, "mask covers the entire image");

  const auto rows = img.rows, cols = img.cols, ch = img.channels;
  auto masked = [&](std::size_t r, std::size_t c) { return mask(r, c) != 0; };

  // Boundary range per channel: unmasked pixels touching the mask.
  std::vector<double> lo(ch, std::numeric_limits<double>::infinity());
  std::vector<double> hi(ch, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (masked(r, c)) continue;
      const bool touches = (r > 0 && masked(r - 1, c)) || (r + 1 < rows && masked(r + 1, c)) ||
                           (c > 0 && masked(r, c - 1)) || (c + 1 < cols && masked(r, c + 1));
      if (!touches) continue;
      for (std::size_t k = 0; k < ch; ++k) {
        lo[k] = std::min(lo[k], img.at(r, c, k));
        hi[k] = std::max(hi[k], img.at(r, c, k));
      }
    }
  }
  for (auto i : unknown)
    for (std::size_t k = 0; k < ch; ++k) {
      auto& v = out.image.data[i * ch + k];
      v = std::clamp(v, lo[k], hi[k]);
    }

  struct Neighbours {
    std::size_t idx[4];
    std::size_t count;
  };
  std::vector<Neighbours> nbrs;
  nbrs.reserve(unknown.size());
  for (auto i : unknown) {
    const auto r = i / cols, c = i % cols;
    Neighbours nb{{}, 0};
    if (r > 0) nb.idx[nb.count++] = i - cols;
    if (r + 1 < rows) nb.idx[nb.count++] = i + cols;
    if (c > 0) nb.idx[nb.count++] = i - 1;
    if (c + 1 < cols) nb.idx[nb.count++] = i + 1;
    nbrs.push_back(nb);
  }

  auto& data = out.image.data;
  while (out.iterations < task.max_iter) {
    ++out.iterations;
    double delta = 0.0;
    for (std::size_t u = 0; u < unknown.size(); ++u) {
      const auto i = unknown[u];
      const auto& nb = nbrs[u];
      for (std::size_t k = 0; k < ch; ++k) {
        double sum = 0.0;
        for (std::size_t n = 0; n < nb.count; ++n) sum += data[nb.idx[n] * ch + k];
        const double v = std::clamp(sum / static_cast<double>(nb.count), lo[k], hi[k]);
        auto& cur = data[i * ch + k];
        delta = std::max(delta, std::abs(v - cur));
        cur = v;
      }
    }
    out.last_delta = delta;
    if (delta < task.tol) return out;
  }
  fail(Errc::iteration, "harmonic fill did not converge in " + std::to_string(task.max_iter) +
                            " sweeps (last delta " + std::to_string(out.last_delta) + ")");
}

}  // namespace dfx
