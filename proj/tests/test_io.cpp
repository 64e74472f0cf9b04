#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "cad/error.hpp"
#include "cad/io.hpp"
#include "oracles.hpp"

using namespace cad;

namespace {

std::vector<std::uint8_t> raw_file(const std::string& header, std::size_t payload_bytes) {
  std::vector<std::uint8_t> out{'C', 'A', 'D', 'T'};
  const auto n = static_cast<std::uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  out.insert(out.end(), header.begin(), header.end());
  out.resize(out.size() + payload_bytes, 0);
  return out;
}

ErrorCode decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    io::decode(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decode accepted a malformed file");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("canonical layout") {
  const Tensor t({2, 1, 2}, std::vector<double>{1.0, -2.0, 0.5, 3.0});
  const auto bytes = io::encode(io::from_tensor(t));
  const std::string header = R"({"dtype":"f32","shape":[2,1,2]})";
  REQUIRE(bytes.size() == 8 + header.size() + 16);
  CHECK(std::memcmp(bytes.data(), "CADT", 4) == 0);
  CHECK(bytes[4] == header.size());
  CHECK(bytes[5] == 0);
  CHECK(std::string(bytes.begin() + 8, bytes.begin() + 8 + header.size()) == header);
  // 1.0f little-endian.
  CHECK(bytes[8 + header.size() + 3] == 0x3f);
  CHECK(bytes[8 + header.size() + 2] == 0x80);
  CHECK(io::to_tensor(io::decode(bytes)) == t);
}

TEST_CASE("property: decode/encode is byte-identical") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor t = oracle::random_tensor(rng, {1 + trial % 3u, 2 + trial % 5u, 3});
    const auto bytes = io::encode(io::from_tensor(t));
    CHECK(io::encode(io::decode(bytes)) == bytes);

    const auto labels = oracle::random_labels(rng, 3, 4, 5);
    const auto lbytes = io::encode(io::from_labels(labels));
    CHECK(io::encode(io::decode(lbytes)) == lbytes);
    CHECK(io::to_labels(io::decode(lbytes), 5) == labels);
  }
}

TEST_CASE("file round trip on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "cad_io_test";
  std::filesystem::create_directories(dir);
  const Tensor t({2, 2}, std::vector<double>{0.25, 0.5, 0.75, 1.0});
  io::write_file(dir / "t.cadt", io::from_tensor(t));
  CHECK(io::read_tensor(dir / "t.cadt") == t);
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed files") {
  CHECK(decode_error({'C', 'A', 'D'}) == ErrorCode::MalformedFile);
  auto bad_magic = raw_file(R"({"dtype":"f32","shape":[1]})", 4);
  bad_magic[0] = 'X';
  CHECK(decode_error(bad_magic) == ErrorCode::MalformedFile);
  CHECK(decode_error(raw_file(R"({"dtype":"f32","shape":[2]})", 4)) == ErrorCode::MalformedFile);
  CHECK(decode_error(raw_file(R"({"dtype":"f64","shape":[1]})", 4)) == ErrorCode::MalformedFile);
  CHECK(decode_error(raw_file(R"({"dtype":"f32","shape":[0]})", 0)) == ErrorCode::MalformedFile);
  CHECK(decode_error(raw_file(R"({"dtype":"f32"})", 4)) == ErrorCode::MalformedFile);
  CHECK(decode_error(raw_file("not json", 4)) == ErrorCode::MalformedFile);
  CHECK_THROWS_AS(io::read_file("/nonexistent/file.cadt"), Error);

  // Whitespace in the header is accepted.
  CHECK_NOTHROW(io::decode(raw_file(R"({ "shape": [1], "dtype": "i32" })", 4)));
}

TEST_CASE("PGM encoding") {
  const std::vector<std::uint8_t> px{0, 255, 255, 0, 0, 0};
  const auto bytes = io::encode_pgm(2, 3, px);
  const std::string head = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == head.size() + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + head.size()) == head);
  CHECK(bytes[head.size() + 1] == 255);
  CHECK_THROWS_AS(io::encode_pgm(2, 2, px), Error);
}
