#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "core/tensor.hpp"
#include "metrics/metrics.hpp"
#include "pipeline/config.hpp"
#include "sensing/dataset.hpp"
#include "shred/shred.hpp"
#include "sim/field_sequence.hpp"
#include "temporal/temporal.hpp"

namespace lapis::pipeline {

/// Deployment input: raw sensor readings over a contiguous run of frames and
/// nothing else. Holds no field data and cannot be built from a field.
class SensorWindow final {
 public:
  /// `values` is (frames in window) x p in physical units; the window covers
  /// frames [start, start + rows) of a trajectory with `total_frames` frames.
  SensorWindow(Tensor<float> values, std::size_t start, std::size_t total_frames);
  SensorWindow(const sim::FieldSequence&, std::size_t, std::size_t) = delete;

  /// Last `frames` rows of a full sensor series.
  static SensorWindow terminal(const Tensor<float>& series, std::size_t frames);
  /// First `frames` rows of a full sensor series.
  static SensorWindow initial(const Tensor<float>& series, std::size_t frames);

  const Tensor<float>& values() const { return values_; }
  std::size_t start() const { return start_; }
  std::size_t size() const { return values_.rows(); }
  std::size_t total_frames() const { return total_; }
  std::size_t end() const { return start_ + values_.rows(); }

 private:
  Tensor<float> values_;
  std::size_t start_;
  std::size_t total_;
};

static_assert(!std::is_constructible_v<SensorWindow, const sim::FieldSequence&>);
static_assert(!std::is_constructible_v<SensorWindow, const sensing::Member&>);

/// Grid metadata needed to turn decoded rows back into a field.
struct FieldMeta {
  std::string system;
  std::vector<std::size_t> grid_shape;
  std::vector<std::string> channels;
  std::vector<std::uint8_t> mask;
  double dt_save = 1.0;
};

struct Timing {
  double encode = 0;
  double generate = 0;
  double decode = 0;
  double total() const { return encode + generate + decode; }
};

struct InferenceResult {
  sim::FieldSequence reconstruction;   // T + 1 frames, physical units
  Tensor<float> latents;               // (T + 1) x d_z, unnormalised SHRED latents
  std::vector<std::uint8_t> observed;  // 1 on the frames covered by the window
  std::size_t first_frame = 0;         // trajectory index of reconstruction row 0
  std::optional<metrics::MetricsReport> metrics;
  Timing timing;
};

/// Frozen SHRED plus whichever temporal model was trained.
struct Models {
  ExperimentConfig config;
  FieldMeta meta;
  shred::ShredModel<float> shred;
  std::optional<temporal::Seq2SeqTemporalModel<float>> seq2seq;
  std::optional<temporal::ARModel<float>> ar;
};

struct TrainReport {
  shred::TrainHistory shred;
  std::optional<shred::TrainHistory> temporal;
  double shred_seconds = 0;
  double temporal_seconds = 0;
};

struct TrainCallbacks {
  std::function<void(std::size_t epoch, double train, double val)> shred_epoch;
  std::function<void(std::size_t epoch, double train, double val)> temporal_epoch;
};

/// Trains SHRED on the non-truth members, freezes it and writes it to
/// `out_dir/shred`; encodes every member from the reloaded checkpoint into
/// `out_dir/latents`; trains the temporal model from that cache and writes it
/// to `out_dir/temporal`. The dataset must be unnormalised. The truth member,
/// if present, is never read.
TrainReport train_all(const ExperimentConfig& cfg, const sensing::EnsembleDataset& ds, const std::string& out_dir,
                      const TrainCallbacks& callbacks = {});

/// Reads what train_all wrote.
Models load_models(const std::string& dir);

/// Contiguous crops of a trajectory with seeded start and end, each at least
/// `min_len` rows long.
std::vector<Tensor<float>> extract_subsequences(const Tensor<float>& trajectory, std::size_t count,
                                                std::size_t min_len, std::uint64_t seed);

/// SHRED latents of a normalised sensor window, one row per frame. A single-frame
/// window with padding > 0 goes through the static terminal pad.
Tensor<float> observed_latents(shred::ShredModel<float>& shred, const Tensor<float>& normalized_window,
                               std::size_t padding);

/// Reconstructs frames [0, window.end()) from a terminal window.
InferenceResult infer_backward(Models& models, const SensorWindow& window);

/// Reconstructs the window plus `horizon` frames after it.
InferenceResult infer_forward(Models& models, const SensorWindow& window, std::size_t horizon);

/// Fills result.metrics against a reference trajectory (evaluation only).
/// The reference may be longer; rows from first_frame on are compared.
void attach_metrics(InferenceResult& result, const sim::FieldSequence& truth, bool with_ssim = true);

void save_result(const InferenceResult& result, const std::string& dir);
/// Reads what save_result wrote; metrics are not restored.
InferenceResult load_result(const std::string& dir);

}  // namespace lapis::pipeline
