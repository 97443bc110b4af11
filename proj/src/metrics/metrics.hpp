#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/tensor.hpp"
#include "sim/field_sequence.hpp"

namespace lapis::metrics {

/// Cells with mask value 1 are excluded. An empty mask excludes nothing.
using Mask = std::vector<std::uint8_t>;

/// Root mean squared error over all frames and unmasked columns.
double rmse(const Tensor<float>& pred, const Tensor<float>& truth, const Mask& mask = {});
/// max - min of the unmasked ground truth.
double data_range(const Tensor<float>& truth, const Mask& mask = {});
/// rmse / data_range; throws InvalidArgument when the range is zero.
double nrmse(const Tensor<float>& pred, const Tensor<float>& truth, const Mask& mask = {});

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over all window positions fully inside the grid and free of
/// masked cells. `grid` is {ny, nx} or {n}; a 1D grid uses a 1D window.
double ssim(std::span<const float> pred, std::span<const float> truth, const std::vector<std::size_t>& grid,
            double dynamic_range, const Mask& mask = {}, const SsimParams& params = {});

/// Frame-averaged SSIM of one channel of two trajectories.
double ssim_trajectory(const Tensor<float>& pred, const Tensor<float>& truth, const std::vector<std::size_t>& grid,
                       std::size_t channel, double dynamic_range, const Mask& grid_mask = {},
                       const SsimParams& params = {});

struct MetricEntry {
  double rmse = 0;
  double nrmse = 0;
  double delta = 0;
  std::optional<double> ssim;
};

struct MetricsReport {
  MetricEntry full;
  std::optional<MetricEntry> observed;
  std::optional<MetricEntry> generated;
  std::map<std::string, MetricEntry> channels;
  std::vector<double> frame_rmse;
  std::vector<double> frame_nrmse;
  std::vector<double> frame_ssim;  // first channel, empty without SSIM
};

/// Scores a reconstruction against ground truth. `observed` flags frames
/// that were inside the observation window (may be empty). Every region
/// and frame is normalised by the full-trajectory range of its channel.
MetricsReport evaluate(const sim::FieldSequence& pred, const sim::FieldSequence& truth,
                       const std::vector<std::uint8_t>& observed = {}, bool with_ssim = true);

std::string to_json(const MetricsReport& report, int indent = 2);
void write_metrics_json(const MetricsReport& report, const std::string& path);
/// One row per frame: frame, observed, rmse, nrmse, ssim.
void write_frame_csv(const MetricsReport& report, const std::vector<std::uint8_t>& observed,
                     const std::string& path);

struct LinearBackwardReport {
  std::vector<double> times;
  /// max_j |measured_j(t) - e^{gamma_j (T-t)} eps_j| / |e^{gamma_j (T-t)} eps_j|
  double max_modewise_relative_error = 0;
  /// ||dY(t)|| and the bound e^{gamma_max (T-t)} ||eps|| per time.
  std::vector<double> error_norm;
  std::vector<double> bound;
  bool bound_holds = true;
};

/// Perturbs the terminal state of a linear toy by sum_j eps_j phi_j, inverts
/// the dynamics exactly mode by mode and compares the backward error with
/// the closed form at each time in `times`.
LinearBackwardReport validate_linear_backward(const std::vector<double>& gammas, double T,
                                              const std::vector<double>& eps, const std::vector<double>& times,
                                              std::size_t grid_points = 64);

}  // namespace lapis::metrics
