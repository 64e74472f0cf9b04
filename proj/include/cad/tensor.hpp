#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cad {

/// Dense row-major real tensor. Values are checked finite on construction.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 (H×W) and rank-3 (C×H×W) accessors.
  double& at(std::size_t y, std::size_t x) { return data_[y * shape_[1] + x]; }
  double at(std::size_t y, std::size_t x) const { return data_[y * shape_[1] + x]; }
  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  /// Spatial height/width: the last two axes.
  std::size_t height() const { return shape_.at(shape_.size() - 2); }
  std::size_t width() const { return shape_.at(shape_.size() - 1); }

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape) noexcept;

/// H×W map of integer class ids in [0, num_classes).
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::size_t height, std::size_t width, std::vector<std::int32_t> labels,
           int num_classes);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  int num_classes() const noexcept { return num_classes_; }
  std::span<const std::int32_t> labels() const noexcept { return labels_; }
  std::span<std::int32_t> labels() noexcept { return labels_; }

  std::int32_t at(std::size_t y, std::size_t x) const { return labels_[y * width_ + x]; }
  std::int32_t& at(std::size_t y, std::size_t x) { return labels_[y * width_ + x]; }

  bool operator==(const LabelMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::int32_t> labels_;
  int num_classes_ = 0;
};

/// K×H×W one-hot encoding with exactly one active class per pixel.
class OneHotLabels {
 public:
  explicit OneHotLabels(Tensor encoded);

  static OneHotLabels from_labels(const LabelMap& labels);
  /// Per-pixel argmax over channels; ties resolve to the lowest class index.
  static OneHotLabels from_argmax(const Tensor& scores);

  const Tensor& tensor() const noexcept { return encoded_; }
  std::size_t num_classes() const { return encoded_.dim(0); }

 private:
  Tensor encoded_;
};

/// Per-pixel argmax over channels of a K×H×W tensor (ties → lowest index).
LabelMap argmax_labels(const Tensor& scores);

}  // namespace cad
