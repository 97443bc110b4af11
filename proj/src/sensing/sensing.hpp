#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/tensor.hpp"
#include "sim/field_sequence.hpp"

namespace lapis::sensing {

struct SensorLayout {
  std::vector<std::size_t> indices;  // flat indices into a frame
  std::string policy = "uniform";
  std::uint64_t seed = 0;

  std::size_t p() const { return indices.size(); }
};

/// Per-channel affine map onto [0, 1]; a channel with max == min maps to 0.5.
struct Normalization {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t channels() const { return min.size(); }
  float forward(float v, std::size_t channel) const;
  float inverse(float v, std::size_t channel) const;
};

struct SensorSeries {
  Tensor<float> values;  // (T+1) x p
  std::optional<Normalization> normalization;
};

/// p distinct indices drawn uniformly without replacement from the cells of
/// [0, n) whose mask entry is 0. Deterministic per seed.
SensorLayout place_sensors(std::size_t n, std::size_t p, const std::vector<std::uint8_t>& mask, std::uint64_t seed);

/// values[t][j] = frames[t][indices[j]].
SensorSeries sample_sensors(const sim::FieldSequence& field, const SensorLayout& layout);
Tensor<float> gather_columns(const Tensor<float>& frames, const std::vector<std::size_t>& indices);

/// One l x p window per time t; window t holds s_{t-l+1..t}, with s_0
/// repeated where t - l + 1 < 0.
std::vector<Tensor<float>> make_lag_windows(const Tensor<float>& series, std::size_t lag);

/// Min/max per channel over the unmasked cells of the given fields.
Normalization fit_normalization(const std::vector<const sim::FieldSequence*>& fields);

void normalize_field(sim::FieldSequence& field, const Normalization& norm);
void denormalize_field(sim::FieldSequence& field, const Normalization& norm);
/// Sensor j belongs to the channel of its frame index.
void normalize_sensors(Tensor<float>& values, const SensorLayout& layout, std::size_t grid_size,
                       const Normalization& norm);
void denormalize_sensors(Tensor<float>& values, const SensorLayout& layout, std::size_t grid_size,
                         const Normalization& norm);

}  // namespace lapis::sensing
