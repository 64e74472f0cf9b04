#include "cad/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <nlohmann/json.hpp>

#include "cad/error.hpp"

namespace cad::io {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'D', 'T'};

static_assert(std::endian::native == std::endian::little,
              "CADT payload decoding assumes a little-endian host");

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MalformedFile, why); }

std::uint32_t read_u32(std::span<const std::uint8_t> b) {
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

TensorFile decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) malformed("file shorter than the fixed preamble");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) malformed("bad magic, expected CADT");
  const std::uint32_t header_len = read_u32(bytes.subspan(4, 4));
  if (bytes.size() < 8 + static_cast<std::size_t>(header_len)) malformed("truncated header");

  const auto header_bytes = bytes.subspan(8, header_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.is_object() || !header.contains("dtype") || !header.contains("shape")) {
    malformed("header needs dtype and shape");
  }

  TensorFile file;
  const auto& dtype = header["dtype"];
  if (dtype == "f32") {
    file.dtype = DType::F32;
  } else if (dtype == "i32") {
    file.dtype = DType::I32;
  } else {
    malformed("unsupported dtype");
  }
  const auto& shape = header["shape"];
  if (!shape.is_array() || shape.empty()) malformed("shape must be a non-empty list");
  std::size_t count = 1;
  for (const auto& d : shape) {
    if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
      malformed("shape entries must be positive integers");
    }
    const auto v = d.get<std::uint64_t>();
    if (count > std::numeric_limits<std::size_t>::max() / 4 / v) malformed("shape too large");
    file.shape.push_back(static_cast<std::size_t>(v));
    count *= static_cast<std::size_t>(v);
  }

  const auto payload = bytes.subspan(8 + header_len);
  if (payload.size() != 4 * count) {
    malformed("payload is " + std::to_string(payload.size()) + " bytes, expected " +
              std::to_string(4 * count));
  }
  if (file.dtype == DType::F32) {
    std::vector<float> v(count);
    std::memcpy(v.data(), payload.data(), payload.size());
    file.values = std::move(v);
  } else {
    std::vector<std::int32_t> v(count);
    std::memcpy(v.data(), payload.data(), payload.size());
    file.values = std::move(v);
  }
  return file;
}

std::vector<std::uint8_t> encode(const TensorFile& file) {
  nlohmann::ordered_json header;
  header["dtype"] = file.dtype == DType::F32 ? "f32" : "i32";
  header["shape"] = file.shape;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  std::visit(
      [&](const auto& values) {
        const auto* raw = reinterpret_cast<const std::uint8_t*>(values.data());
        out.insert(out.end(), raw, raw + values.size() * 4);
      },
      file.values);
  return out;
}

TensorFile read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) malformed("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode(bytes);
}

void write_file(const std::filesystem::path& path, const TensorFile& file) {
  const auto bytes = encode(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

TensorFile from_tensor(const Tensor& t) {
  TensorFile f;
  f.dtype = DType::F32;
  f.shape = t.shape();
  std::vector<float> v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) v[i] = static_cast<float>(t[i]);
  f.values = std::move(v);
  return f;
}

TensorFile from_labels(const LabelMap& labels) {
  TensorFile f;
  f.dtype = DType::I32;
  f.shape = {labels.height(), labels.width()};
  f.values = std::vector<std::int32_t>(labels.labels().begin(), labels.labels().end());
  return f;
}

Tensor to_tensor(const TensorFile& file) {
  if (file.dtype != DType::F32) throw Error(ErrorCode::Shape, "expected an f32 tensor file");
  const auto& v = std::get<std::vector<float>>(file.values);
  std::vector<double> data(v.begin(), v.end());
  for (double d : data) {
    if (!std::isfinite(d)) malformed("tensor file contains NaN or Inf");
  }
  return Tensor(file.shape, std::move(data));
}

LabelMap to_labels(const TensorFile& file, int num_classes) {
  if (file.dtype != DType::I32) throw Error(ErrorCode::Shape, "expected an i32 label file");
  if (file.shape.size() != 2) throw Error(ErrorCode::Shape, "label file must be H×W");
  const auto& v = std::get<std::vector<std::int32_t>>(file.values);
  std::int32_t top = 0;
  for (auto x : v) {
    if (x < 0) malformed("negative class id in label file");
    top = std::max(top, x);
  }
  if (num_classes <= 0) num_classes = std::max(2, static_cast<int>(top) + 1);
  return LabelMap(file.shape[0], file.shape[1], v, num_classes);
}

Tensor read_tensor(const std::filesystem::path& path) { return to_tensor(read_file(path)); }

LabelMap read_labels(const std::filesystem::path& path, int num_classes) {
  return to_labels(read_file(path), num_classes);
}

std::vector<std::uint8_t> encode_pgm(std::size_t height, std::size_t width,
                                     std::span<const std::uint8_t> pixels) {
  if (pixels.size() != height * width) throw Error(ErrorCode::Shape, "PGM pixel count mismatch");
  const std::string head =
      "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

void write_pgm(const std::filesystem::path& path, std::size_t height, std::size_t width,
               std::span<const std::uint8_t> pixels) {
  const auto bytes = encode_pgm(height, width, pixels);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace cad::io
