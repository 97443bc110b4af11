#include "sensing/sensing.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "core/errors.hpp"

namespace lapis::sensing {

float Normalization::forward(float v, std::size_t c) const {
  const double lo = min[c], hi = max[c];
  if (hi == lo) return 0.5f;
  return static_cast<float>((static_cast<double>(v) - lo) / (hi - lo));
}

float Normalization::inverse(float v, std::size_t c) const {
  const double lo = min[c], hi = max[c];
  if (hi == lo) return static_cast<float>(lo);
  return static_cast<float>(static_cast<double>(v) * (hi - lo) + lo);
}

SensorLayout place_sensors(std::size_t n, std::size_t p, const std::vector<std::uint8_t>& mask, std::uint64_t seed) {
  if (!mask.empty() && mask.size() != n) throw ShapeError("place_sensors: mask size does not match n");
  std::vector<std::size_t> valid;
  valid.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (mask.empty() || !mask[i]) valid.push_back(i);
  if (p == 0 || p > valid.size()) {
    throw InvalidArgument("place_sensors: requested " + std::to_string(p) + " sensors but only " +
                          std::to_string(valid.size()) + " cells are available");
  }
  // Partial Fisher-Yates with an explicit uniform draw per position.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, valid.size() - 1);
    std::swap(valid[i], valid[pick(rng)]);
  }
  SensorLayout layout;
  layout.indices.assign(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(p));
  layout.seed = seed;
  return layout;
}

Tensor<float> gather_columns(const Tensor<float>& frames, const std::vector<std::size_t>& indices) {
  Tensor<float> out = Tensor<float>::matrix(frames.rows(), indices.size());
  for (std::size_t t = 0; t < frames.rows(); ++t)
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (indices[j] >= frames.cols()) throw ShapeError("sensor index outside the frame");
      out(t, j) = frames(t, indices[j]);
    }
  return out;
}

SensorSeries sample_sensors(const sim::FieldSequence& field, const SensorLayout& layout) {
  SensorSeries s;
  s.values = gather_columns(field.frames, layout.indices);
  return s;
}

std::vector<Tensor<float>> make_lag_windows(const Tensor<float>& series, std::size_t lag) {
  if (lag < 1) throw InvalidArgument("lag must be at least 1");
  const std::size_t steps = series.rows(), p = series.cols();
  std::vector<Tensor<float>> out;
  out.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor<float> w = Tensor<float>::matrix(lag, p);
    for (std::size_t k = 0; k < lag; ++k) {
      const long src = static_cast<long>(t) - static_cast<long>(lag - 1 - k);
      const std::size_t s = src < 0 ? 0 : static_cast<std::size_t>(src);
      std::copy(series.row(s).begin(), series.row(s).end(), w.row(k).begin());
    }
    out.push_back(std::move(w));
  }
  return out;
}

Normalization fit_normalization(const std::vector<const sim::FieldSequence*>& fields) {
  if (fields.empty()) throw InvalidArgument("fit_normalization: no fields");
  const std::size_t nch = fields[0]->num_channels(), g = fields[0]->grid_size();
  Normalization n;
  n.min.assign(nch, std::numeric_limits<double>::infinity());
  n.max.assign(nch, -std::numeric_limits<double>::infinity());
  for (const auto* f : fields) {
    if (f->num_channels() != nch || f->grid_size() != g) throw ShapeError("fit_normalization: mixed layouts");
    for (std::size_t t = 0; t < f->num_frames(); ++t)
      for (std::size_t c = 0; c < nch; ++c)
        for (std::size_t i = 0; i < g; ++i) {
          if (!f->mask.empty() && f->mask[i]) continue;
          const double v = f->frames(t, c * g + i);
          n.min[c] = std::min(n.min[c], v);
          n.max[c] = std::max(n.max[c], v);
        }
  }
  return n;
}

void normalize_field(sim::FieldSequence& f, const Normalization& norm) {
  const std::size_t g = f.grid_size();
  for (std::size_t t = 0; t < f.num_frames(); ++t)
    for (std::size_t c = 0; c < f.num_channels(); ++c)
      for (std::size_t i = 0; i < g; ++i) f.frames(t, c * g + i) = norm.forward(f.frames(t, c * g + i), c);
}

void denormalize_field(sim::FieldSequence& f, const Normalization& norm) {
  const std::size_t g = f.grid_size();
  for (std::size_t t = 0; t < f.num_frames(); ++t)
    for (std::size_t c = 0; c < f.num_channels(); ++c)
      for (std::size_t i = 0; i < g; ++i) f.frames(t, c * g + i) = norm.inverse(f.frames(t, c * g + i), c);
}

void normalize_sensors(Tensor<float>& values, const SensorLayout& layout, std::size_t grid_size,
                       const Normalization& norm) {
  for (std::size_t t = 0; t < values.rows(); ++t)
    for (std::size_t j = 0; j < layout.p(); ++j) values(t, j) = norm.forward(values(t, j), layout.indices[j] / grid_size);
}

void denormalize_sensors(Tensor<float>& values, const SensorLayout& layout, std::size_t grid_size,
                         const Normalization& norm) {
  for (std::size_t t = 0; t < values.rows(); ++t)
    for (std::size_t j = 0; j < layout.p(); ++j) values(t, j) = norm.inverse(values(t, j), layout.indices[j] / grid_size);
}

}  // namespace lapis::sensing
