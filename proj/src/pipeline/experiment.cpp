#include "pipeline/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "core/errors.hpp"
#include "core/parallel.hpp"

namespace lapis::pipeline {

namespace fs = std::filesystem;

sensing::EnsembleSpec ensemble_spec(const ExperimentConfig& cfg) {
  sensing::EnsembleSpec spec;
  spec.base = cfg.sim;
  spec.members = cfg.ensemble;
  spec.validation = cfg.validation;
  spec.sensors = cfg.sensors;
  spec.seed = cfg.seed;
  return spec;
}

SensorWindow deployment_window(const ExperimentConfig& cfg, const Tensor<float>& sensors) {
  if (cfg.direction == temporal::Direction::backward) return SensorWindow::terminal(sensors, cfg.observed_frames());
  return SensorWindow::initial(sensors, cfg.observed_frames());
}

InferenceResult infer_configured(Models& models, const SensorWindow& window, const sim::FieldSequence& truth,
                                 bool with_ssim) {
  const auto& cfg = models.config;
  InferenceResult r;
  if (cfg.direction == temporal::Direction::backward) {
    r = infer_backward(models, window);
  } else {
    const std::size_t rest = window.total_frames() - window.end();
    r = infer_forward(models, window, cfg.horizon > 0 ? std::min(cfg.horizon, rest) : rest);
  }
  attach_metrics(r, truth, with_ssim);
  return r;
}

ExperimentRun run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, bool with_ssim,
                             std::size_t sim_workers) {
  cfg.validate();
  auto spec = ensemble_spec(cfg);
  spec.workers = sim_workers;
  const auto ds = sensing::generate_ensemble(spec);
  ExperimentRun run;
  run.training = train_all(cfg, ds, out_dir);
  auto models = load_models(out_dir);
  const auto& truth = ds.truth();
  run.lapis = infer_configured(models, deployment_window(cfg, truth.sensors), truth.field, with_ssim);
  run.baseline = infer_backward(models, SensorWindow::terminal(truth.sensors, truth.sensors.rows()));
  attach_metrics(run.baseline, truth.field, with_ssim);
  return run;
}

std::string to_string(Axis a) {
  switch (a) {
    case Axis::sensors: return "p";
    case Axis::latent: return "d_z";
    case Axis::temporal_hidden: return "d_h";
    case Axis::window: return "W";
    case Axis::padding: return "L";
  }
  return "?";
}

Axis axis_from_string(const std::string& s) {
  if (s == "p" || s == "sensors") return Axis::sensors;
  if (s == "d_z" || s == "latent") return Axis::latent;
  if (s == "d_h" || s == "temporal_hidden") return Axis::temporal_hidden;
  if (s == "W" || s == "window") return Axis::window;
  if (s == "L" || s == "padding") return Axis::padding;
  throw InvalidArgument("unknown ablation axis '" + s + "' (expected p, d_z, d_h, W or L)");
}

void apply_axis(ExperimentConfig& cfg, Axis axis, std::size_t value) {
  if (value == 0 && axis != Axis::padding) throw InvalidArgument(to_string(axis) + " must be positive");
  switch (axis) {
    case Axis::sensors: cfg.sensors = value; break;
    case Axis::latent:
      if (cfg.mode == shred::Mode::seq2seq) {
        if (value % 2) throw InvalidArgument("seq2seq SHRED needs an even latent size");
        cfg.shred_hidden = value / 2;
      } else {
        cfg.shred_hidden = value;
      }
      break;
    case Axis::temporal_hidden: cfg.temporal_hidden = value; break;
    case Axis::window:
      cfg.window_frames = value;
      cfg.obs_fraction = 0;
      break;
    case Axis::padding: cfg.padding = value; break;
  }
}

AblationResult run_ablation(const AblationSpec& spec, const std::string& out_dir) {
  if (spec.values.empty() || spec.seeds.empty()) throw InvalidArgument("ablation needs at least one value and seed");
  std::vector<ExperimentConfig> configs;
  for (auto v : spec.values) {
    for (auto s : spec.seeds) {
      auto c = spec.base;
      apply_axis(c, spec.axis, v);
      c.seed = s;
      c.validate();
      configs.push_back(c);
    }
  }
  AblationResult res;
  res.axis = spec.axis;
  res.rows.resize(configs.size());
  parallel_for(
      configs.size(),
      [&](std::size_t i) {
        const auto& c = configs[i];
        const std::size_t v = spec.values[i / spec.seeds.size()];
        const auto dir =
            fs::path(out_dir) / (to_string(spec.axis) + "_" + std::to_string(v) + "_seed" + std::to_string(c.seed));
        const auto run = run_experiment(c, dir.string(), spec.with_ssim, 1);
        AblationRow row;
        row.value = v;
        row.seed = c.seed;
        row.nrmse = run.lapis.metrics->full.nrmse;
        row.ssim = run.lapis.metrics->full.ssim.value_or(std::nan(""));
        row.baseline_nrmse = run.baseline.metrics->full.nrmse;
        res.rows[i] = row;
      },
      spec.workers);

  const std::size_t n = spec.seeds.size();
  for (std::size_t k = 0; k < spec.values.size(); ++k) {
    AblationPoint p;
    p.value = spec.values[k];
    p.runs = n;
    for (std::size_t s = 0; s < n; ++s) {
      p.nrmse_mean += res.rows[k * n + s].nrmse / static_cast<double>(n);
      p.ssim_mean += res.rows[k * n + s].ssim / static_cast<double>(n);
    }
    if (n > 1) {
      for (std::size_t s = 0; s < n; ++s) {
        p.nrmse_std += std::pow(res.rows[k * n + s].nrmse - p.nrmse_mean, 2);
        p.ssim_std += std::pow(res.rows[k * n + s].ssim - p.ssim_mean, 2);
      }
      p.nrmse_std = std::sqrt(p.nrmse_std / static_cast<double>(n - 1));
      p.ssim_std = std::sqrt(p.ssim_std / static_cast<double>(n - 1));
    }
    res.points.push_back(p);
  }
  return res;
}

void write_ablation_csv(const AblationResult& r, const std::string& rows_path, const std::string& summary_path) {
  std::ofstream rows(rows_path);
  if (!rows) throw IoError("cannot write " + rows_path);
  rows.precision(10);
  rows << to_string(r.axis) << ",seed,nrmse,ssim,baseline_nrmse\n";
  for (const auto& row : r.rows)
    rows << row.value << ',' << row.seed << ',' << row.nrmse << ',' << row.ssim << ',' << row.baseline_nrmse << '\n';
  std::ofstream sum(summary_path);
  if (!sum) throw IoError("cannot write " + summary_path);
  sum.precision(10);
  sum << to_string(r.axis) << ",runs,nrmse_mean,nrmse_std,ssim_mean,ssim_std\n";
  for (const auto& p : r.points)
    sum << p.value << ',' << p.runs << ',' << p.nrmse_mean << ',' << p.nrmse_std << ',' << p.ssim_mean << ','
        << p.ssim_std << '\n';
  if (!rows || !sum) throw IoError("failed writing ablation tables");
}

}  // namespace lapis::pipeline
