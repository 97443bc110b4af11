#include "sim/field_sequence.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace lapis::sim {

std::vector<std::uint8_t> FieldSequence::frame_mask() const {
  std::vector<std::uint8_t> out(grid_size() * num_channels(), 0);
  if (mask.empty()) return out;
  for (std::size_t c = 0; c < num_channels(); ++c)
    std::copy(mask.begin(), mask.end(), out.begin() + static_cast<std::ptrdiff_t>(c * grid_size()));
  return out;
}

void FieldSequence::validate() const {
  if (grid_shape.empty() || channels.empty()) throw InvalidArgument("field sequence without grid or channels");
  if (frames.cols() != grid_size() * num_channels()) {
    throw ShapeError("field sequence frame width " + std::to_string(frames.cols()) + " != grid " +
                     std::to_string(grid_size()) + " x channels " + std::to_string(num_channels()));
  }
  if (!mask.empty() && mask.size() != grid_size()) throw ShapeError("mask size does not match grid");
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    for (float v : frames.row(t)) {
      if (!std::isfinite(v)) throw NumericalError("non-finite value in frame " + std::to_string(t), t);
    }
  }
}

}  // namespace lapis::sim
