#include "lapis/lapis.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "core/errors.hpp"
#include "pipeline/experiment.hpp"
#include "pipeline/pipeline.hpp"
#include "report/plot.hpp"

using namespace lapis;

struct lapis_config {
  pipeline::ExperimentConfig cfg;
};
struct lapis_dataset {
  sensing::EnsembleDataset ds;
};
struct lapis_models {
  pipeline::Models models;
};
struct lapis_result {
  pipeline::InferenceResult result;
};

namespace {

thread_local std::string last_error;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int status_of(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::numerical: return LAPIS_ERR_NUMERICAL;
    case ErrorKind::io: return LAPIS_ERR_IO;
    default: return LAPIS_ERR_USAGE;
  }
}

template <typename F>
lapis_status guard(F&& f) {
  last_error.clear();
  try {
    f();
    return LAPIS_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e);
  } catch (const UsageError& e) {
    last_error = e.what();
    return LAPIS_ERR_USAGE;
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = e.what();
    return LAPIS_ERR_IO;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return LAPIS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return LAPIS_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return LAPIS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw UsageError(std::string(what) + " must not be NULL");
}

void copy_out(const std::vector<float>& src, float* buf, size_t cap) {
  need(buf, "buffer");
  if (cap < src.size())
    throw UsageError("buffer holds " + std::to_string(cap) + " values, " + std::to_string(src.size()) + " needed");
  std::memcpy(buf, src.data(), src.size() * sizeof(float));
}

void copy_out(std::span<const float> src, float* buf, size_t cap) {
  copy_out(std::vector<float>(src.begin(), src.end()), buf, cap);
}

const sensing::Member& member_at(const lapis_dataset* ds, size_t k) {
  need(ds, "dataset");
  if (k >= ds->ds.members.size()) throw UsageError("member index " + std::to_string(k) + " out of range");
  return ds->ds.members[k];
}

template <typename T, typename Make>
lapis_status make_handle(T** out, Make&& make) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    auto h = std::make_unique<T>();
    make(*h);
    *out = h.release();
  });
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  return cells;
}

}  // namespace

extern "C" {

const char* lapis_version(void) { return "1.0.0"; }

const char* lapis_last_error(void) { return last_error.c_str(); }

lapis_status lapis_config_new(const char* system, lapis_config** out) {
  return make_handle(out, [&](lapis_config& c) {
    need(system, "system");
    c.cfg = pipeline::ExperimentConfig::defaults(sim::system_from_string(system));
  });
}

lapis_status lapis_config_load(const char* path, lapis_config** out) {
  return make_handle(out, [&](lapis_config& c) {
    need(path, "path");
    c.cfg = pipeline::load_config(path);
  });
}

lapis_status lapis_config_parse(const char* text, lapis_config** out) {
  return make_handle(out, [&](lapis_config& c) {
    need(text, "text");
    c.cfg = pipeline::parse_config(text);
  });
}

lapis_status lapis_config_set(lapis_config* cfg, const char* key, const char* value) {
  return guard([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

lapis_status lapis_config_get(const lapis_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guard([&] {
    need(cfg, "config");
    need(key, "key");
    for (const auto& [k, v] : cfg->cfg.entries()) {
      if (k != key) continue;
      if (needed) *needed = v.size() + 1;
      if (buf && cap >= v.size() + 1) std::memcpy(buf, v.c_str(), v.size() + 1);
      else if (buf) throw UsageError("buffer too small for " + k);
      return;
    }
    throw UsageError(std::string("unknown configuration key '") + key + "'");
  });
}

lapis_status lapis_config_validate(const lapis_config* cfg) {
  return guard([&] {
    need(cfg, "config");
    cfg->cfg.validate();
  });
}

lapis_status lapis_config_save(const lapis_config* cfg, const char* path) {
  return guard([&] {
    need(cfg, "config");
    need(path, "path");
    pipeline::save_config(cfg->cfg, path);
  });
}

void lapis_config_free(lapis_config* cfg) { delete cfg; }

lapis_status lapis_simulate(const lapis_config* cfg, lapis_dataset** out) {
  return make_handle(out, [&](lapis_dataset& d) {
    need(cfg, "config");
    cfg->cfg.validate();
    d.ds = sensing::generate_ensemble(pipeline::ensemble_spec(cfg->cfg));
  });
}

lapis_status lapis_dataset_load(const char* dir, lapis_dataset** out) {
  return make_handle(out, [&](lapis_dataset& d) {
    need(dir, "dir");
    d.ds = sensing::load_dataset(dir);
  });
}

lapis_status lapis_dataset_save(const lapis_dataset* ds, const char* dir) {
  return guard([&] {
    need(ds, "dataset");
    need(dir, "dir");
    sensing::save_dataset(ds->ds, dir);
  });
}

lapis_status lapis_dataset_describe(const lapis_dataset* ds, lapis_dataset_info* info) {
  return guard([&] {
    need(ds, "dataset");
    need(info, "info");
    info->members = ds->ds.members.size();
    info->frames = ds->ds.frames();
    info->frame_size = ds->ds.frame_size();
    info->sensors = ds->ds.layout.p();
    const auto t = ds->ds.indices(sensing::Split::truth);
    info->truth_index = t.empty() ? -1 : static_cast<long>(t.front());
  });
}

lapis_status lapis_dataset_sensors(const lapis_dataset* ds, size_t member, float* buf, size_t cap) {
  return guard([&] { copy_out(member_at(ds, member).sensors.values(), buf, cap); });
}

void lapis_dataset_free(lapis_dataset* ds) { delete ds; }

lapis_status lapis_train(const lapis_config* cfg, const lapis_dataset* ds, const char* out_dir,
                         lapis_train_summary* summary) {
  return guard([&] {
    need(cfg, "config");
    need(ds, "dataset");
    need(out_dir, "out_dir");
    const auto rep = pipeline::train_all(cfg->cfg, ds->ds, out_dir);
    if (summary) {
      *summary = {};
      summary->shred_epochs = rep.shred.train_loss.size();
      summary->shred_best_epoch = rep.shred.best_epoch;
      summary->shred_best_val = rep.shred.best_val;
      if (rep.temporal) {
        summary->temporal_epochs = rep.temporal->train_loss.size();
        summary->temporal_best_epoch = rep.temporal->best_epoch;
        summary->temporal_best_val = rep.temporal->best_val;
      }
      summary->shred_seconds = rep.shred_seconds;
      summary->temporal_seconds = rep.temporal_seconds;
    }
  });
}

lapis_status lapis_models_load(const char* dir, lapis_models** out) {
  return make_handle(out, [&](lapis_models& m) {
    need(dir, "dir");
    m.models = pipeline::load_models(dir);
  });
}

lapis_status lapis_models_describe(const lapis_models* m, lapis_models_info* info) {
  return guard([&] {
    need(m, "models");
    need(info, "info");
    const auto& md = m->models;
    info->sensors = md.shred.config().sensors;
    info->frame_size = md.shred.config().output_dim;
    info->latent_dim = md.shred.latent_dim();
    info->frames = md.config.frames();
    info->observed_frames = md.config.observed_frames();
    info->direction = md.config.direction == temporal::Direction::backward ? LAPIS_BACKWARD : LAPIS_FORWARD;
  });
}

void lapis_models_free(lapis_models* m) { delete m; }

lapis_status lapis_infer(lapis_models* m, const float* sensors, size_t rows, size_t p, size_t start,
                         size_t total_frames, int direction, size_t horizon, lapis_result** out) {
  return make_handle(out, [&](lapis_result& r) {
    need(m, "models");
    need(sensors, "sensors");
    if (rows == 0 || p == 0) throw UsageError("sensor window is empty");
    if (direction != LAPIS_BACKWARD && direction != LAPIS_FORWARD) throw UsageError("unknown direction");
    Tensor<float> values({rows, p}, std::vector<float>(sensors, sensors + rows * p));
    const pipeline::SensorWindow window(std::move(values), start, total_frames);
    r.result = direction == LAPIS_BACKWARD ? pipeline::infer_backward(m->models, window)
                                           : pipeline::infer_forward(m->models, window, horizon);
  });
}

lapis_status lapis_result_load(const char* dir, lapis_result** out) {
  return make_handle(out, [&](lapis_result& r) {
    need(dir, "dir");
    r.result = pipeline::load_result(dir);
  });
}

lapis_status lapis_result_save(const lapis_result* r, const char* dir) {
  return guard([&] {
    need(r, "result");
    need(dir, "dir");
    pipeline::save_result(r->result, dir);
  });
}

lapis_status lapis_result_describe(const lapis_result* r, lapis_result_info* info) {
  return guard([&] {
    need(r, "result");
    need(info, "info");
    const auto& res = r->result;
    info->frames = res.reconstruction.num_frames();
    info->frame_size = res.reconstruction.frame_size();
    info->latent_dim = res.latents.cols();
    info->first_frame = res.first_frame;
    info->observed_frames = static_cast<size_t>(std::count(res.observed.begin(), res.observed.end(), 1));
    info->seconds = res.timing.total();
  });
}

lapis_status lapis_result_field(const lapis_result* r, float* buf, size_t cap) {
  return guard([&] {
    need(r, "result");
    copy_out(r->result.reconstruction.frames.values(), buf, cap);
  });
}

lapis_status lapis_result_latents(const lapis_result* r, float* buf, size_t cap) {
  return guard([&] {
    need(r, "result");
    copy_out(r->result.latents.values(), buf, cap);
  });
}

lapis_status lapis_result_observed(const lapis_result* r, uint8_t* buf, size_t cap) {
  return guard([&] {
    need(r, "result");
    need(buf, "buffer");
    const auto& o = r->result.observed;
    if (cap < o.size()) throw UsageError("buffer too small for the observed mask");
    std::copy(o.begin(), o.end(), buf);
  });
}

lapis_status lapis_result_evaluate(lapis_result* r, const lapis_dataset* ds, size_t member, int with_ssim,
                                   lapis_metrics* out) {
  return guard([&] {
    need(r, "result");
    const auto& m = member_at(ds, member);
    if (ds->ds.normalized()) throw UsageError("evaluation needs an unnormalised dataset");
    pipeline::attach_metrics(r->result, m.field, with_ssim != 0);
    if (out) {
      const auto& rep = *r->result.metrics;
      *out = {};
      out->rmse = rep.full.rmse;
      out->nrmse = rep.full.nrmse;
      out->delta = rep.full.delta;
      out->ssim = rep.full.ssim.value_or(std::nan(""));
      out->has_generated = rep.generated.has_value();
      if (rep.generated) {
        out->generated_rmse = rep.generated->rmse;
        out->generated_nrmse = rep.generated->nrmse;
      }
      out->has_observed = rep.observed.has_value();
      if (rep.observed) out->observed_nrmse = rep.observed->nrmse;
    }
  });
}

void lapis_result_free(lapis_result* r) { delete r; }

lapis_status lapis_ablate(const lapis_config* base, const char* axis, const size_t* values, size_t n_values,
                          const uint64_t* seeds, size_t n_seeds, size_t workers, const char* out_dir) {
  return guard([&] {
    need(base, "config");
    need(axis, "axis");
    need(values, "values");
    need(seeds, "seeds");
    need(out_dir, "out_dir");
    pipeline::AblationSpec spec;
    spec.base = base->cfg;
    spec.axis = pipeline::axis_from_string(axis);
    spec.values.assign(values, values + n_values);
    spec.seeds.assign(seeds, seeds + n_seeds);
    spec.workers = workers;
    std::filesystem::create_directories(out_dir);
    pipeline::save_config(base->cfg, (std::filesystem::path(out_dir) / "config.ini").string());
    const auto res = pipeline::run_ablation(spec, out_dir);
    const std::filesystem::path dir(out_dir);
    pipeline::write_ablation_csv(res, (dir / "rows.csv").string(), (dir / "summary.csv").string());
  });
}

lapis_status lapis_plot_snapshots(const lapis_result* r, const lapis_dataset* ds, size_t member, size_t columns,
                                  size_t channel, const char* png_path, const char* csv_path) {
  return guard([&] {
    need(r, "result");
    need(png_path, "png_path");
    need(csv_path, "csv_path");
    const auto& m = member_at(ds, member);
    const auto& res = r->result;
    const std::size_t n = res.reconstruction.num_frames();
    if (res.first_frame + n > m.field.num_frames()) throw UsageError("reference member is too short");
    sim::FieldSequence ref = m.field;
    ref.frames = m.field.frames.slice_rows(res.first_frame, res.first_frame + n);
    report::StripOptions opts;
    opts.channel = channel;
    report::snapshot_strip(ref, res.reconstruction, report::select_frames(n, columns), png_path, csv_path, opts);
  });
}

lapis_status lapis_plot_frame_errors(const lapis_result* r, const char* png_path, const char* csv_path) {
  return guard([&] {
    need(r, "result");
    need(png_path, "png_path");
    need(csv_path, "csv_path");
    if (!r->result.metrics) throw UsageError("evaluate the result before plotting its errors");
    report::frame_error_plot(*r->result.metrics, r->result.observed, png_path, csv_path);
  });
}

lapis_status lapis_plot_history(const char* history_csv, const char* png_path, const char* csv_path) {
  return guard([&] {
    need(history_csv, "history_csv");
    need(png_path, "png_path");
    need(csv_path, "csv_path");
    report::CurveOptions opts;
    opts.log_y = true;
    report::curves({report::read_history(history_csv, false), report::read_history(history_csv, true)}, png_path,
                   csv_path, opts);
  });
}

lapis_status lapis_plot_sweep(const char* summary_csv, const char* png_path, const char* csv_path) {
  return guard([&] {
    need(summary_csv, "summary_csv");
    need(png_path, "png_path");
    need(csv_path, "csv_path");
    std::ifstream in(summary_csv);
    if (!in) throw IoError(std::string("cannot open ") + summary_csv);
    std::string line;
    std::getline(in, line);
    const auto header = split_csv(line);
    if (header.size() < 4 || header[2] != "nrmse_mean" || header[3] != "nrmse_std")
      throw IoError(std::string(summary_csv) + " is not an ablation summary");
    report::Series s;
    s.name = "NRMSE " + header[0];
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (cells.size() < 4) throw IoError(std::string("malformed row in ") + summary_csv);
      try {
        const double mean = std::stod(cells[2]), sd = std::stod(cells[3]);
        s.x.push_back(std::stod(cells[0]));
        s.y.push_back(mean);
        s.lo.push_back(mean - sd);
        s.hi.push_back(mean + sd);
      } catch (const std::exception&) {
        throw IoError(std::string("malformed row in ") + summary_csv);
      }
    }
    report::curves({s}, png_path, csv_path);
  });
}

}  // extern "C"
