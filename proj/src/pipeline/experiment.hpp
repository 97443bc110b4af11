#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pipeline/pipeline.hpp"

namespace lapis::pipeline {

sensing::EnsembleSpec ensemble_spec(const ExperimentConfig& cfg);

/// The deployment window for the configured direction: the last observed
/// frames for backward, the first ones for forward.
SensorWindow deployment_window(const ExperimentConfig& cfg, const Tensor<float>& sensors);

/// Runs the configured inference on a window and scores it against `truth`.
InferenceResult infer_configured(Models& models, const SensorWindow& window, const sim::FieldSequence& truth,
                                 bool with_ssim = true);

struct ExperimentRun {
  TrainReport training;
  InferenceResult lapis;
  InferenceResult baseline;  // plain SHRED on the full truth sensor series
};

/// Simulate, train into `out_dir` and evaluate on the held-out member.
ExperimentRun run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, bool with_ssim = true,
                             std::size_t sim_workers = 0);

enum class Axis { sensors, latent, temporal_hidden, window, padding };

std::string to_string(Axis a);
/// Accepts p, d_z, d_h, W and L as well as the long names.
Axis axis_from_string(const std::string& s);
/// Applies one axis value. `window` sets the observed frame count; `latent`
/// sets d_z, which must be even in seq2seq mode.
void apply_axis(ExperimentConfig& cfg, Axis axis, std::size_t value);

struct AblationSpec {
  ExperimentConfig base;
  Axis axis = Axis::sensors;
  std::vector<std::size_t> values;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::size_t workers = 0;  // 0: worker_count()
  bool with_ssim = true;
};

struct AblationRow {
  std::size_t value = 0;
  std::uint64_t seed = 0;
  double nrmse = 0;
  double ssim = 0;
  double baseline_nrmse = 0;
};

struct AblationPoint {
  std::size_t value = 0;
  std::size_t runs = 0;
  double nrmse_mean = 0;
  double nrmse_std = 0;
  double ssim_mean = 0;
  double ssim_std = 0;
};

struct AblationResult {
  Axis axis = Axis::sensors;
  std::vector<AblationRow> rows;      // values x seeds, value-major
  std::vector<AblationPoint> points;  // one per value, sample std
};

/// One independent training run per (value, seed), spread over a worker pool.
/// Run directories live under `out_dir`.
AblationResult run_ablation(const AblationSpec& spec, const std::string& out_dir);

void write_ablation_csv(const AblationResult& r, const std::string& rows_path, const std::string& summary_path);

}  // namespace lapis::pipeline
