#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace lapis::sim {

struct Provenance {
  std::string system;
  std::map<std::string, double> parameters;
  std::uint64_t seed = 0;
};

/// A trajectory of T+1 frames. Each frame concatenates its channels, each
/// channel a row-major grid (y slowest for 2D grids).
struct FieldSequence {
  Tensor<float> frames;                // (T+1) x n
  std::vector<std::size_t> grid_shape;  // {ny, nx} or {nx}
  double dt_save = 1.0;
  std::vector<std::string> channels;
  /// Per grid cell, 1 where the cell is excluded from sensing and metrics.
  /// Empty when nothing is excluded.
  std::vector<std::uint8_t> mask;
  Provenance provenance;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t grid_size() const {
    std::size_t n = 1;
    for (auto d : grid_shape) n *= d;
    return n;
  }
  std::size_t num_channels() const { return channels.size(); }
  std::size_t frame_size() const { return frames.cols(); }

  /// Mask expanded across channels to the full frame width.
  std::vector<std::uint8_t> frame_mask() const;
  /// Throws if the layout invariants or finiteness do not hold.
  void validate() const;
};

}  // namespace lapis::sim
