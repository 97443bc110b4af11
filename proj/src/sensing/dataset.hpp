#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sensing/sensing.hpp"
#include "sim/config.hpp"
#include "sim/field_sequence.hpp"

namespace lapis::sensing {

enum class Split { train, val, truth };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Member {
  sim::FieldSequence field;
  Tensor<float> sensors;  // (T+1) x p, same normalisation state as `field`
  Split split = Split::train;
};

/// K simulation members sharing one sensor layout, plus (optionally) the
/// held-out ground-truth trajectory.
struct EnsembleDataset {
  std::string system;
  SensorLayout layout;
  std::optional<Normalization> normalization;
  std::vector<Member> members;

  std::vector<std::size_t> indices(Split split) const;
  /// Train and validation members only; the ground truth never appears.
  std::vector<const Member*> training_members() const;
  const Member& truth() const;
  bool normalized() const { return normalization.has_value(); }
  std::size_t frames() const { return members.front().field.num_frames(); }
  std::size_t frame_size() const { return members.front().field.frame_size(); }
  std::size_t grid_size() const { return members.front().field.grid_size(); }

  void validate() const;
};

struct EnsembleSpec {
  sim::SimConfig base;
  std::size_t members = 8;       // K simulations (train + validation)
  std::size_t validation = 1;    // how many of the K are held for validation
  std::size_t sensors = 3;
  std::uint64_t seed = 0;
  bool with_truth = true;
  std::size_t workers = 0;       // 0: worker_count()
};

/// Simulates the ensemble (members in parallel), places sensors avoiding
/// masked cells and samples every member. Fields stay in physical units.
EnsembleDataset generate_ensemble(const EnsembleSpec& spec);

/// Fits min/max on the training split and rescales fields and sensors of
/// every member.
void normalize_dataset(EnsembleDataset& ds);

/// manifest.json plus member_<k>_fields.bin / member_<k>_sensors.bin
/// (float32, little-endian, row-major).
void save_dataset(const EnsembleDataset& ds, const std::string& dir);
EnsembleDataset load_dataset(const std::string& dir);

}  // namespace lapis::sensing
