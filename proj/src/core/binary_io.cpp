#include "core/binary_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "core/errors.hpp"

namespace lapis {

std::vector<unsigned char> encode_f32(std::span<const float> data) {
  std::vector<unsigned char> out(4 * data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(data[i]);
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  return out;
}

std::vector<float> decode_f32(const unsigned char* bytes, std::size_t count) {
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* b = bytes + 4 * i;
    const std::uint32_t bits = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
                               std::uint32_t(b[3]) << 24;
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

void write_f32(const std::string& path, std::span<const float> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const auto raw = encode_f32(data);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path);
}

std::vector<float> read_f32(const std::string& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(float)) {
    throw IoError(path + ": expected " + std::to_string(expected * sizeof(float)) + " bytes, found " +
                  std::to_string(bytes));
  }
  in.seekg(0);
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("failed reading " + path);
  return decode_f32(raw.data(), expected);
}

}  // namespace lapis
