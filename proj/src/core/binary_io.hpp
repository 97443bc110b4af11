#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lapis {

/// Raw float32 arrays, little-endian regardless of host order.
void write_f32(const std::string& path, std::span<const float> data);
/// Throws IoError unless the file holds exactly `expected` values.
std::vector<float> read_f32(const std::string& path, std::size_t expected);

std::vector<unsigned char> encode_f32(std::span<const float> data);
std::vector<float> decode_f32(const unsigned char* bytes, std::size_t count);

}  // namespace lapis
