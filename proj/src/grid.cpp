#include "cad/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cad/error.hpp"

namespace cad {

GridSpec::GridSpec(std::size_t grid_rows, std::size_t grid_cols, std::size_t image_h,
                   std::size_t image_w)
    : grid_rows_(grid_rows), grid_cols_(grid_cols), image_h_(image_h), image_w_(image_w) {
  if (grid_rows_ == 0 || grid_cols_ == 0 || image_h_ == 0 || image_w_ == 0) {
    throw Error(ErrorCode::GridMismatch, "grid and image dims must be positive");
  }
  if (image_h_ % grid_rows_ != 0 || image_w_ % grid_cols_ != 0) {
    throw Error(ErrorCode::GridMismatch,
                "image " + std::to_string(image_h_) + "x" + std::to_string(image_w_) +
                    " is not divisible by grid " + std::to_string(grid_rows_) + "x" +
                    std::to_string(grid_cols_));
  }
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 3) throw Error(ErrorCode::Shape, "softmax expects C×H×W logits");
  const std::size_t k = logits.dim(0);
  if (k < 2) throw Error(ErrorCode::InvalidClassCount, "softmax needs at least 2 classes");
  const std::size_t pixels = logits.dim(1) * logits.dim(2);

  Tensor out(logits.shape());
  for (std::size_t px = 0; px < pixels; ++px) {
    double peak = logits[px];
    for (std::size_t c = 1; c < k; ++c) peak = std::max(peak, logits[c * pixels + px]);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double e = std::exp(logits[c * pixels + px] - peak);
      out[c * pixels + px] = e;
      total += e;
    }
    for (std::size_t c = 0; c < k; ++c) out[c * pixels + px] /= total;
  }
  return out;
}

Tensor pixel_confidence(const Tensor& probs) {
  if (probs.rank() != 3) throw Error(ErrorCode::Shape, "pixel_confidence expects C×H×W");
  const std::size_t k = probs.dim(0);
  if (k < 2) throw Error(ErrorCode::InvalidClassCount, "need at least 2 classes");
  const std::size_t pixels = probs.dim(1) * probs.dim(2);

  Tensor conf({probs.dim(1), probs.dim(2)});
  for (std::size_t px = 0; px < pixels; ++px) {
    double best = probs[px];
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double p = probs[c * pixels + px];
      if (p < 0.0) throw Error(ErrorCode::NotADistribution, "negative probability");
      best = std::max(best, p);
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-4) {
      throw Error(ErrorCode::NotADistribution,
                  "channel sum " + std::to_string(total) + " at pixel " + std::to_string(px));
    }
    conf[px] = best;
  }
  return conf;
}

PatchGrid patch_confidence(const Tensor& conf, const GridSpec& spec) {
  if (conf.rank() != 2) throw Error(ErrorCode::Shape, "patch_confidence expects an H×W map");
  if (conf.dim(0) != spec.image_h() || conf.dim(1) != spec.image_w()) {
    throw Error(ErrorCode::GridMismatch, "confidence map dims differ from grid spec");
  }
  const std::size_t ph = spec.patch_px_h();
  const std::size_t pw = spec.patch_px_w();
  const double count = static_cast<double>(ph * pw);

  PatchGrid grid{spec, std::vector<double>(spec.num_patches(), 0.0), {}};
  for (std::size_t r = 0; r < spec.grid_rows(); ++r) {
    for (std::size_t c = 0; c < spec.grid_cols(); ++c) {
      double sum = 0.0;
      for (std::size_t y = r * ph; y < (r + 1) * ph; ++y) {
        for (std::size_t x = c * pw; x < (c + 1) * pw; ++x) sum += conf.at(y, x);
      }
      grid.raw[r * spec.grid_cols() + c] = sum / count;
    }
  }
  return grid;
}

PatchGrid normalize(PatchGrid grid) {
  if (grid.raw.size() != grid.spec.num_patches()) {
    throw Error(ErrorCode::GridMismatch, "raw confidences do not cover the grid");
  }
  const auto [lo_it, hi_it] = std::minmax_element(grid.raw.begin(), grid.raw.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  grid.normalized.resize(grid.raw.size());
  for (std::size_t i = 0; i < grid.raw.size(); ++i) {
    grid.normalized[i] = span > 0.0 ? (grid.raw[i] - lo) / span : 0.0;
  }
  return grid;
}

PatchGrid confidence_grid(const Tensor& logits, const GridSpec& spec) {
  return normalize(patch_confidence(pixel_confidence(softmax(logits)), spec));
}

PatchGrid grid_from_normalized(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) throw Error(ErrorCode::Shape, "grid value count mismatch");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "non-finite grid value");
  }
  PatchGrid grid{GridSpec(rows, cols, rows, cols), values, values};
  return grid;
}

}  // namespace cad
