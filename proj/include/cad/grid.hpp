#pragma once

#include <cstddef>
#include <vector>

#include "cad/tensor.hpp"

namespace cad {

/// Partition of an image_h × image_w image into grid_rows × grid_cols equal patches.
class GridSpec {
 public:
  /// Throws GridMismatch unless both image dims are divisible by the grid dims.
  GridSpec(std::size_t grid_rows, std::size_t grid_cols, std::size_t image_h, std::size_t image_w);

  std::size_t grid_rows() const noexcept { return grid_rows_; }
  std::size_t grid_cols() const noexcept { return grid_cols_; }
  std::size_t image_h() const noexcept { return image_h_; }
  std::size_t image_w() const noexcept { return image_w_; }
  std::size_t patch_px_h() const noexcept { return image_h_ / grid_rows_; }
  std::size_t patch_px_w() const noexcept { return image_w_ / grid_cols_; }
  std::size_t num_patches() const noexcept { return grid_rows_ * grid_cols_; }

  bool operator==(const GridSpec&) const = default;

 private:
  std::size_t grid_rows_;
  std::size_t grid_cols_;
  std::size_t image_h_;
  std::size_t image_w_;
};

/// Per-patch confidences. `raw` holds patch means; `normalized` is empty until
/// normalize() fills it.
struct PatchGrid {
  GridSpec spec;
  std::vector<double> raw;
  std::vector<double> normalized;

  std::size_t rows() const noexcept { return spec.grid_rows(); }
  std::size_t cols() const noexcept { return spec.grid_cols(); }
  double raw_at(std::size_t r, std::size_t c) const { return raw[r * cols() + c]; }
  double norm_at(std::size_t r, std::size_t c) const { return normalized[r * cols() + c]; }
  bool is_normalized() const noexcept { return !normalized.empty(); }
};

/// Channel softmax over a C×H×W logits tensor, max-subtracted per pixel.
Tensor softmax(const Tensor& logits);

/// Max class probability per pixel. Rejects channel sums off by more than 1e-4.
Tensor pixel_confidence(const Tensor& probs);

/// Mean pixel confidence of every patch; `normalized` is left empty.
PatchGrid patch_confidence(const Tensor& conf, const GridSpec& spec);

/// Min-max normalization into [0, 1]. A constant grid normalizes to all zeros
/// so the global minimum always passes any non-negative threshold.
PatchGrid normalize(PatchGrid grid);

/// logits → softmax → pixel confidence → patch means → normalized.
PatchGrid confidence_grid(const Tensor& logits, const GridSpec& spec);

/// Builds a grid directly from already-normalized values (tests, tools).
PatchGrid grid_from_normalized(std::size_t rows, std::size_t cols, std::vector<double> values);

}  // namespace cad
