#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cad/tensor.hpp"

namespace cad::io {

// CADT container:
//   "CADT" | u32 LE header length | UTF-8 JSON header {"dtype":"f32"|"i32","shape":[...]}
//   | row-major little-endian payload, 4 bytes per value.

enum class DType { F32, I32 };

struct TensorFile {
  DType dtype = DType::F32;
  std::vector<std::size_t> shape;
  std::variant<std::vector<float>, std::vector<std::int32_t>> values;
};

/// Parses a CADT byte buffer. Throws Error(MalformedFile) on any defect.
TensorFile decode(std::span<const std::uint8_t> bytes);
/// Canonical encoding (compact header, keys in fixed order).
std::vector<std::uint8_t> encode(const TensorFile& file);

TensorFile read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const TensorFile& file);

TensorFile from_tensor(const Tensor& t);
TensorFile from_labels(const LabelMap& labels);
/// f32 payloads only. i32 payloads are rejected with Shape.
Tensor to_tensor(const TensorFile& file);
/// i32 H×W payloads only; num_classes is max label + 1 (at least 2) unless given.
LabelMap to_labels(const TensorFile& file, int num_classes = 0);

Tensor read_tensor(const std::filesystem::path& path);
LabelMap read_labels(const std::filesystem::path& path, int num_classes = 0);

/// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               std::span<const std::uint8_t> pixels);
std::vector<std::uint8_t> encode_pgm(std::size_t height, std::size_t width,
                                     std::span<const std::uint8_t> pixels);

}  // namespace cad::io
