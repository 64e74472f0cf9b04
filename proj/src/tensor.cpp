#include "cad/tensor.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cad/error.hpp"

namespace cad {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput:
      return "invalid-input";
    case ErrorCode::InvalidClassCount:
      return "invalid-class-count";
    case ErrorCode::NotADistribution:
      return "not-a-distribution";
    case ErrorCode::GridMismatch:
      return "grid-mismatch";
    case ErrorCode::InvalidThreshold:
      return "invalid-threshold";
    case ErrorCode::EmptyRegion:
      return "empty-region";
    case ErrorCode::NoPlacement:
      return "no-placement";
    case ErrorCode::Shape:
      return "shape";
    case ErrorCode::Bounds:
      return "bounds";
    case ErrorCode::InvalidIteration:
      return "invalid-iteration";
    case ErrorCode::InvalidConfig:
      return "invalid-config";
    case ErrorCode::UndefinedMetric:
      return "undefined-metric";
    case ErrorCode::UnsupportedLoss:
      return "unsupported-loss";
    case ErrorCode::MissingComponent:
      return "missing-component";
    case ErrorCode::Divergence:
      return "divergence";
    case ErrorCode::MalformedFile:
      return "malformed-file";
  }
  return "unknown";
}

std::size_t shape_product(std::span<const std::size_t> shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw Error(ErrorCode::Shape, "tensor needs at least one axis");
  for (auto d : shape) {
    if (d == 0) throw Error(ErrorCode::Shape, "tensor axes must be positive");
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  if (!std::isfinite(fill)) throw Error(ErrorCode::InvalidInput, "non-finite fill value");
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_product(shape_)) {
    throw Error(ErrorCode::Shape, "data length " + std::to_string(data_.size()) +
                                      " does not match shape product " +
                                      std::to_string(shape_product(shape_)));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "tensor contains NaN or Inf");
  }
}

LabelMap::LabelMap(std::size_t height, std::size_t width, std::vector<std::int32_t> labels,
                   int num_classes)
    : height_(height), width_(width), labels_(std::move(labels)), num_classes_(num_classes) {
  if (height_ == 0 || width_ == 0) throw Error(ErrorCode::Shape, "label map must be non-empty");
  if (labels_.size() != height_ * width_) {
    throw Error(ErrorCode::Shape, "label count does not match height*width");
  }
  if (num_classes_ < 1) throw Error(ErrorCode::InvalidClassCount, "label map needs classes");
  for (auto v : labels_) {
    if (v < 0 || v >= num_classes_) {
      throw Error(ErrorCode::InvalidInput, "class id " + std::to_string(v) + " out of range");
    }
  }
}

OneHotLabels::OneHotLabels(Tensor encoded) : encoded_(std::move(encoded)) {
  if (encoded_.rank() != 3) throw Error(ErrorCode::Shape, "one-hot labels must be K×H×W");
  const std::size_t k = encoded_.dim(0);
  const std::size_t pixels = encoded_.dim(1) * encoded_.dim(2);
  for (std::size_t px = 0; px < pixels; ++px) {
    int active = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double v = encoded_[c * pixels + px];
      if (v == 1.0) {
        ++active;
      } else if (v != 0.0) {
        throw Error(ErrorCode::InvalidInput, "one-hot entries must be 0 or 1");
      }
    }
    if (active != 1) throw Error(ErrorCode::InvalidInput, "exactly one class must be active");
  }
}

OneHotLabels OneHotLabels::from_labels(const LabelMap& labels) {
  const auto k = static_cast<std::size_t>(labels.num_classes());
  Tensor t({k, labels.height(), labels.width()});
  const std::size_t pixels = labels.height() * labels.width();
  auto ids = labels.labels();
  for (std::size_t px = 0; px < pixels; ++px) {
    t[static_cast<std::size_t>(ids[px]) * pixels + px] = 1.0;
  }
  return OneHotLabels(std::move(t));
}

OneHotLabels OneHotLabels::from_argmax(const Tensor& scores) {
  return from_labels(argmax_labels(scores));
}

LabelMap argmax_labels(const Tensor& scores) {
  if (scores.rank() != 3) throw Error(ErrorCode::Shape, "argmax expects K×H×W");
  const std::size_t k = scores.dim(0);
  const std::size_t pixels = scores.dim(1) * scores.dim(2);
  std::vector<std::int32_t> ids(pixels, 0);
  for (std::size_t px = 0; px < pixels; ++px) {
    double best = scores[px];
    for (std::size_t c = 1; c < k; ++c) {
      const double v = scores[c * pixels + px];
      if (v > best) {
        best = v;
        ids[px] = static_cast<std::int32_t>(c);
      }
    }
  }
  return LabelMap(scores.dim(1), scores.dim(2), std::move(ids), static_cast<int>(k));
}

}  // namespace cad
