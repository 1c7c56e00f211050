#pragma once

// Classical object removal: masked pixels are replaced by the discrete
// harmonic extension of the surrounding unmasked pixels (each filled pixel
// is the mean of its 4-neighbours inside the image).

#include <cstddef>

#include "dfx/image.hpp"

namespace dfx {

struct FillTask {
  Raster image;
  Mask mask;  // set = remove
  double tol = 1e-6;
  int max_iter = 200000;
};

struct FillResult {
  Raster image;
  int iterations = 0;
  double last_delta = 0.0;
};

/// Gauss-Seidel relaxation, per channel, until the largest update in a sweep
/// is below `tol`. Unmasked samples are copied unchanged. Throws
/// Errc::boundary when the mask covers the whole image, Errc::dimension on a
/// size mismatch and Errc::iteration if `max_iter` sweeps do not converge.
FillResult remove_object(const FillTask& task);

}  // namespace dfx
