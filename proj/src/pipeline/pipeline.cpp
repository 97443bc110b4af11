#include "pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>

#include "core/binary_io.hpp"
#include "core/errors.hpp"

namespace lapis::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Tensor<float> reverse_rows(const Tensor<float>& z) {
  Tensor<float> out({z.rows(), z.cols()});
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto src = z.row(z.rows() - 1 - r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Tensor<float> stack(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  std::vector<Tensor<float>> parts{a, b};
  return vstack<float>(parts);
}

sensing::SensorLayout layout_of(const shred::ShredModel<float>& m) {
  sensing::SensorLayout l;
  l.indices = m.sensor_indices;
  return l;
}

std::size_t grid_size_of(const shred::ShredModel<float>& m) {
  const std::size_t c = m.normalization ? m.normalization->channels() : 1;
  return m.config().output_dim / c;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed " + path.string() + ": " + e.what());
  }
}

json meta_to_json(const FieldMeta& m) {
  return {{"system", m.system},     {"grid_shape", m.grid_shape}, {"channels", m.channels},
          {"mask", m.mask},         {"dt_save", m.dt_save}};
}

FieldMeta meta_from_json(const json& j) {
  FieldMeta m;
  m.system = j.at("system").get<std::string>();
  m.grid_shape = j.at("grid_shape").get<std::vector<std::size_t>>();
  m.channels = j.at("channels").get<std::vector<std::string>>();
  m.mask = j.at("mask").get<std::vector<std::uint8_t>>();
  m.dt_save = j.at("dt_save").get<double>();
  return m;
}

void write_history(const shred::TrainHistory& h, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < h.train_loss.size(); ++e)
    out << e + 1 << ',' << h.train_loss[e] << ',' << h.val_loss[e] << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

// Rows of the trajectory the temporal model sees as observed.
std::pair<std::size_t, std::size_t> observed_range(const ExperimentConfig& cfg, std::size_t frames) {
  const std::size_t w = cfg.observed_frames();
  if (cfg.direction == temporal::Direction::backward) return {frames - w, frames};
  return {0, w};
}

struct CachedMember {
  std::size_t index = 0;
  sensing::Split split = sensing::Split::train;
  Tensor<float> full;
  Tensor<float> observed;
};

void write_latent_cache(const std::vector<CachedMember>& members, std::size_t d_z, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["format"] = "lapis-latents";
  j["version"] = 1;
  j["latent_dim"] = d_z;
  j["members"] = json::array();
  for (const auto& m : members) {
    const std::string base = "member_" + std::to_string(m.index);
    write_f32((dir / (base + "_full.bin")).string(), m.full.values());
    write_f32((dir / (base + "_observed.bin")).string(), m.observed.values());
    j["members"].push_back({{"index", m.index},
                            {"split", sensing::to_string(m.split)},
                            {"full", base + "_full.bin"},
                            {"full_rows", m.full.rows()},
                            {"observed", base + "_observed.bin"},
                            {"observed_rows", m.observed.rows()}});
  }
  write_json(j, dir / "manifest.json");
}

std::vector<CachedMember> read_latent_cache(const fs::path& dir) {
  const json j = read_json(dir / "manifest.json");
  std::vector<CachedMember> out;
  try {
    const auto d = j.at("latent_dim").get<std::size_t>();
    for (const auto& e : j.at("members")) {
      CachedMember m;
      m.index = e.at("index").get<std::size_t>();
      m.split = sensing::split_from_string(e.at("split").get<std::string>());
      const auto fr = e.at("full_rows").get<std::size_t>();
      const auto orows = e.at("observed_rows").get<std::size_t>();
      m.full = Tensor<float>({fr, d}, read_f32((dir / e.at("full").get<std::string>()).string(), fr * d));
      m.observed =
          Tensor<float>({orows, d}, read_f32((dir / e.at("observed").get<std::string>()).string(), orows * d));
      out.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed latent cache: ") + e.what());
  }
  return out;
}

// Normalises raw sensor rows with the model's stored field normalisation.
Tensor<float> normalize_window(const shred::ShredModel<float>& shred, const Tensor<float>& raw) {
  Tensor<float> v = raw;
  if (shred.normalization) sensing::normalize_sensors(v, layout_of(shred), grid_size_of(shred), *shred.normalization);
  return v;
}

Tensor<float> generated_latents(Models& models, const Tensor<float>& obs_norm, std::size_t steps,
                                temporal::Direction direction) {
  if (steps == 0) return Tensor<float>();
  if (models.config.direction != direction)
    throw InvalidArgument("the temporal model was trained for " + temporal::to_string(models.config.direction) +
                          " inference");
  if (models.seq2seq) {
    auto& m = *models.seq2seq;
    if (m.config().direction != direction)
      throw InvalidArgument("the temporal model was trained for " + temporal::to_string(m.config().direction) +
                            " inference");
    if (steps != m.config().horizon)
      throw InvalidArgument("the seq2seq temporal model generates exactly " + std::to_string(m.config().horizon) +
                            " frames, " + std::to_string(steps) + " requested");
    if (obs_norm.rows() != m.config().window + 1)
      throw InvalidArgument("the seq2seq temporal model expects " + std::to_string(m.config().window + 1) +
                            " observed frames");
    return m.generate(obs_norm, steps);
  }
  if (models.ar) {
    auto& m = *models.ar;
    const std::size_t w = m.config().window;
    if (obs_norm.rows() < w)
      throw InvalidArgument("the AR model needs at least " + std::to_string(w) + " observed frames");
    if (direction == temporal::Direction::forward)
      return m.rollout(obs_norm.slice_rows(obs_norm.rows() - w, obs_norm.rows()), steps);
    // trained on time-reversed trajectories
    const auto rev = reverse_rows(obs_norm);
    return reverse_rows(m.rollout(rev.slice_rows(rev.rows() - w, rev.rows()), steps));
  }
  throw StateError("no temporal model loaded");
}

InferenceResult run_inference(Models& models, const SensorWindow& window, std::size_t steps,
                              temporal::Direction direction) {
  auto& shred = models.shred;
  if (!shred.frozen()) throw StateError("inference requires a frozen SHRED model");
  if (window.values().cols() != shred.config().sensors)
    throw ShapeError("sensor window has " + std::to_string(window.values().cols()) + " columns, the model expects " +
                     std::to_string(shred.config().sensors));
  InferenceResult res;

  auto t0 = Clock::now();
  const Tensor<float> sensors = normalize_window(shred, window.values());
  const Tensor<float> obs_raw = observed_latents(shred, sensors, models.config.padding);
  res.timing.encode = seconds_since(t0);

  t0 = Clock::now();
  Tensor<float> gen_raw;
  if (steps > 0) {
    if (!models.seq2seq && !models.ar) throw StateError("no temporal model loaded");
    const auto& stats = models.seq2seq ? models.seq2seq->stats : models.ar->stats;
    if (!stats) throw StateError("temporal model has no latent statistics");
    gen_raw = stats->denormalize(generated_latents(models, stats->normalize(obs_raw), steps, direction));
  }
  res.timing.generate = seconds_since(t0);

  res.first_frame = direction == temporal::Direction::backward ? 0 : window.start();
  res.latents = direction == temporal::Direction::backward ? stack(gen_raw, obs_raw) : stack(obs_raw, gen_raw);
  const std::size_t total = res.latents.rows();
  res.observed.assign(total, 0);
  const std::size_t obs_begin = direction == temporal::Direction::backward ? total - obs_raw.rows() : 0;
  std::fill_n(res.observed.begin() + static_cast<std::ptrdiff_t>(obs_begin), obs_raw.rows(), 1);

  t0 = Clock::now();
  auto& field = res.reconstruction;
  field.frames = shred.decode(res.latents);
  field.grid_shape = models.meta.grid_shape;
  field.channels = models.meta.channels;
  field.mask = models.meta.mask;
  field.dt_save = models.meta.dt_save;
  field.provenance.system = models.meta.system;
  field.provenance.parameters["reconstruction"] = 1;
  if (shred.normalization) sensing::denormalize_field(field, *shred.normalization);
  const auto fmask = field.frame_mask();
  for (std::size_t r = 0; r < field.frames.rows(); ++r) {
    auto row = field.frames.row(r);
    for (std::size_t i = 0; i < fmask.size(); ++i)
      if (fmask[i]) row[i] = 0.0f;
  }
  res.timing.decode = seconds_since(t0);
  return res;
}

}  // namespace

SensorWindow::SensorWindow(Tensor<float> values, std::size_t start, std::size_t total_frames)
    : values_(std::move(values)), start_(start), total_(total_frames) {
  if (values_.rows() == 0) throw InvalidArgument("sensor window is empty");
  if (start_ + values_.rows() > total_)
    throw InvalidArgument("sensor window [" + std::to_string(start_) + ", " + std::to_string(end()) +
                          ") exceeds the trajectory length " + std::to_string(total_));
}

SensorWindow SensorWindow::terminal(const Tensor<float>& series, std::size_t frames) {
  if (frames == 0 || frames > series.rows()) throw InvalidArgument("terminal window length out of range");
  return SensorWindow(series.slice_rows(series.rows() - frames, series.rows()), series.rows() - frames,
                      series.rows());
}

SensorWindow SensorWindow::initial(const Tensor<float>& series, std::size_t frames) {
  if (frames == 0 || frames > series.rows()) throw InvalidArgument("initial window length out of range");
  return SensorWindow(series.slice_rows(0, frames), 0, series.rows());
}

std::vector<Tensor<float>> extract_subsequences(const Tensor<float>& trajectory, std::size_t count,
                                                std::size_t min_len, std::uint64_t seed) {
  const std::size_t n = trajectory.rows();
  if (min_len == 0 || min_len > n) throw InvalidArgument("min_len must lie in [1, trajectory length]");
  std::mt19937_64 rng(seed);
  std::vector<Tensor<float>> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> len_dist(min_len, n);
    const std::size_t len = len_dist(rng);
    std::uniform_int_distribution<std::size_t> start_dist(0, n - len);
    const std::size_t start = start_dist(rng);
    out.push_back(trajectory.slice_rows(start, start + len));
  }
  return out;
}

Tensor<float> observed_latents(shred::ShredModel<float>& shred, const Tensor<float>& normalized_window,
                               std::size_t padding) {
  if (normalized_window.rows() == 1 && padding > 0)
    return temporal::encode_padded_terminal(shred, temporal::pad_terminal(normalized_window, padding));
  return shred.encode(normalized_window);
}

TrainReport train_all(const ExperimentConfig& cfg, const sensing::EnsembleDataset& raw, const std::string& out_dir,
                      const TrainCallbacks& callbacks) {
  cfg.validate();
  if (raw.normalized()) throw StateError("train_all expects an unnormalised dataset");
  if (raw.training_members().size() < 2) throw InvalidArgument("training needs at least two ensemble members");
  if (raw.layout.p() != cfg.sensors)
    throw InvalidArgument("dataset has " + std::to_string(raw.layout.p()) + " sensors, config asks for " +
                          std::to_string(cfg.sensors));
  const std::size_t frames = raw.frames();
  if (cfg.observed_frames() > frames) throw InvalidArgument("observed window is longer than the trajectories");

  // The truth member is dropped before anything else touches the data.
  sensing::EnsembleDataset ds;
  ds.system = raw.system;
  ds.layout = raw.layout;
  for (const auto& m : raw.members)
    if (m.split != sensing::Split::truth) ds.members.push_back(m);
  ds.validate();
  sensing::normalize_dataset(ds);

  const fs::path out(out_dir);
  fs::create_directories(out);
  save_config(cfg, (out / "config.ini").string());
  const auto& first = ds.members.front().field;
  FieldMeta meta{ds.system, first.grid_shape, first.channels, first.mask, first.dt_save};
  write_json({{"format", "lapis-pipeline"}, {"version", 1}, {"temporal", to_string(cfg.temporal)},
              {"field", meta_to_json(meta)}},
             out / "pipeline.json");

  TrainReport report;

  // Stage i: spatial model.
  auto t0 = Clock::now();
  {
    shred::ShredModel<float> model(cfg.shred_config(ds.frame_size()), cfg.seed);
    model.normalization = ds.normalization;
    model.sensor_indices = ds.layout.indices;
    shred::TrainOptions opts;
    opts.epochs = cfg.shred_epochs;
    opts.lr = cfg.shred_lr;
    opts.patience = cfg.shred_patience;
    opts.batch = cfg.shred_batch;
    opts.seed = cfg.seed;
    opts.padding = cfg.padding;
    if (!first.mask.empty()) opts.weights = shred::mask_weights(first);
    opts.on_epoch = callbacks.shred_epoch;
    try {
      report.shred = shred::train_shred(model, ds, opts);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("SHRED stage: ") + e.what(), e.index());
    }
    model.freeze();
    shred::save_shred(model, (out / "shred").string());
    write_history(report.shred, out / "shred" / "history.csv");
  }
  report.shred_seconds = seconds_since(t0);

  // Latents come from the reloaded checkpoint, never the in-memory model.
  auto shred_model = shred::load_shred((out / "shred").string());
  shred_model.freeze();
  const auto [obs_begin, obs_end] = observed_range(cfg, frames);
  std::vector<CachedMember> cache;
  for (std::size_t k = 0; k < ds.members.size(); ++k) {
    const auto& m = ds.members[k];
    CachedMember c;
    c.index = k;
    c.split = m.split;
    c.full = shred_model.encode(m.sensors);
    c.observed = observed_latents(shred_model, m.sensors.slice_rows(obs_begin, obs_end), cfg.padding);
    cache.push_back(std::move(c));
  }
  write_latent_cache(cache, shred_model.latent_dim(), out / "latents");

  // Stage ii: temporal model, from the cache only.
  t0 = Clock::now();
  cache = read_latent_cache(out / "latents");
  std::vector<const Tensor<float>*> train_full;
  for (const auto& c : cache)
    if (c.split == sensing::Split::train) train_full.push_back(&c.full);
  const auto stats = temporal::LatentStats::fit(train_full);
  const std::size_t d_z = shred_model.latent_dim();

  temporal::TemporalTrainOptions topts;
  topts.epochs = cfg.temporal_epochs;
  topts.lr = cfg.temporal_lr;
  topts.patience = cfg.temporal_patience;
  topts.batch = cfg.temporal_batch;
  topts.seed = cfg.seed + 1;
  topts.on_epoch = callbacks.temporal_epoch;

  try {
    if (cfg.temporal == TemporalKind::seq2seq) {
      const std::size_t steps = cfg.generated_frames();
      if (steps == 0) throw InvalidArgument("the observed window covers the whole trajectory; nothing to generate");
      temporal::Seq2SeqConfig tc;
      tc.latent_dim = d_z;
      tc.hidden = cfg.temporal_hidden;
      tc.window = cfg.observed_frames() - 1;
      tc.horizon = steps;
      tc.direction = cfg.direction;
      temporal::Seq2SeqTemporalModel<float> model(tc, cfg.seed + 2);
      model.stats = stats;
      model.lambda_recon = cfg.lambda_recon;
      model.lambda_shape = cfg.lambda_shape;
      std::vector<temporal::LatentSample> train, val;
      for (const auto& c : cache) {
        const auto target = cfg.direction == temporal::Direction::backward ? c.full.slice_rows(0, obs_begin)
                                                                           : c.full.slice_rows(obs_end, frames);
        temporal::LatentSample s{stats.normalize(c.observed), stats.normalize(target)};
        (c.split == sensing::Split::train ? train : val).push_back(std::move(s));
      }
      if (val.empty()) val = train;
      report.temporal = temporal::train_temporal(model, train, val, topts);
      temporal::save_temporal(model, (out / "temporal").string());
      write_history(*report.temporal, out / "temporal" / "history.csv");
    } else {
      temporal::ArConfig ac;
      ac.latent_dim = d_z;
      ac.hidden = cfg.temporal_hidden;
      ac.window = cfg.ar_window;
      temporal::ARModel<float> model(ac, cfg.seed + 2);
      model.stats = stats;
      std::vector<Tensor<float>> train_traj, val_traj;
      std::uint64_t crop_seed = cfg.seed + 3;
      for (const auto& c : cache) {
        auto z = stats.normalize(c.full);
        if (cfg.direction == temporal::Direction::backward) z = reverse_rows(z);
        auto& dst = c.split == sensing::Split::train ? train_traj : val_traj;
        if (c.split == sensing::Split::train && cfg.subsequences > 0) {
          const std::size_t min_len = std::min(z.rows(), std::max(cfg.ar_window + 1, z.rows() / 2));
          for (auto& crop : extract_subsequences(z, cfg.subsequences, min_len, crop_seed++))
            dst.push_back(std::move(crop));
        }
        dst.push_back(std::move(z));
      }
      auto pointers = [](const std::vector<Tensor<float>>& v) {
        std::vector<const Tensor<float>*> p;
        for (const auto& t : v) p.push_back(&t);
        return p;
      };
      const auto train = temporal::build_ar_dataset(pointers(train_traj), cfg.ar_window);
      auto val = temporal::build_ar_dataset(pointers(val_traj), cfg.ar_window);
      if (val.empty()) val = train;
      report.temporal = temporal::train_ar(model, train, val, topts);
      temporal::save_ar(model, (out / "temporal").string());
      write_history(*report.temporal, out / "temporal" / "history.csv");
    }
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("temporal stage: ") + e.what(), e.index());
  }
  report.temporal_seconds = seconds_since(t0);
  return report;
}

Models load_models(const std::string& dir) {
  const fs::path root(dir);
  Models m;
  m.config = load_config((root / "config.ini").string());
  const json j = read_json(root / "pipeline.json");
  try {
    m.meta = meta_from_json(j.at("field"));
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed pipeline.json: ") + e.what());
  }
  m.shred = shred::load_shred((root / "shred").string());
  m.shred.freeze();
  const auto tdir = (root / "temporal").string();
  if (fs::exists(root / "temporal")) {
    if (temporal::temporal_kind(tdir) == "ar") m.ar = temporal::load_ar(tdir);
    else m.seq2seq = temporal::load_seq2seq_temporal(tdir);
  }
  return m;
}

InferenceResult infer_backward(Models& models, const SensorWindow& window) {
  return run_inference(models, window, window.start(), temporal::Direction::backward);
}

InferenceResult infer_forward(Models& models, const SensorWindow& window, std::size_t horizon) {
  return run_inference(models, window, horizon, temporal::Direction::forward);
}

void attach_metrics(InferenceResult& result, const sim::FieldSequence& truth, bool with_ssim) {
  const std::size_t n = result.reconstruction.num_frames();
  if (result.first_frame + n > truth.num_frames())
    throw ShapeError("reference has " + std::to_string(truth.num_frames()) + " frames, reconstruction needs " +
                     std::to_string(result.first_frame + n));
  if (truth.frame_size() != result.reconstruction.frame_size())
    throw ShapeError("reference frame size differs from the reconstruction");
  if (result.first_frame == 0 && n == truth.num_frames()) {
    result.metrics = metrics::evaluate(result.reconstruction, truth, result.observed, with_ssim);
    return;
  }
  sim::FieldSequence ref = truth;
  ref.frames = truth.frames.slice_rows(result.first_frame, result.first_frame + n);
  result.metrics = metrics::evaluate(result.reconstruction, ref, result.observed, with_ssim);
}

void save_result(const InferenceResult& result, const std::string& dir) {
  const fs::path out(dir);
  fs::create_directories(out);
  const auto& f = result.reconstruction;
  write_f32((out / "reconstruction.bin").string(), f.frames.values());
  write_f32((out / "latents.bin").string(), result.latents.values());
  json j;
  j["format"] = "lapis-inference";
  j["version"] = 1;
  j["byte_order"] = "little";
  j["dtype"] = "float32";
  j["frames"] = f.num_frames();
  j["first_frame"] = result.first_frame;
  j["system"] = f.provenance.system;
  j["frame_size"] = f.frame_size();
  j["grid"] = f.grid_shape;
  j["channels"] = f.channels;
  j["dt_save"] = f.dt_save;
  j["masked_cells"] = f.mask;
  j["reconstruction"] = "reconstruction.bin";
  j["latents"] = "latents.bin";
  j["latents_shape"] = {result.latents.rows(), result.latents.cols()};
  j["observed"] = result.observed;
  j["timing"] = {{"encode", result.timing.encode},
                 {"generate", result.timing.generate},
                 {"decode", result.timing.decode},
                 {"total", result.timing.total()}};
  write_json(j, out / "result.json");
  if (result.metrics) {
    metrics::write_metrics_json(*result.metrics, (out / "metrics.json").string());
    metrics::write_frame_csv(*result.metrics, result.observed, (out / "frames.csv").string());
  }
}

InferenceResult load_result(const std::string& dir) {
  const fs::path root(dir);
  const json j = read_json(root / "result.json");
  InferenceResult r;
  try {
    if (j.at("format").get<std::string>() != "lapis-inference") throw IoError(dir + " is not an inference result");
    const auto frames = j.at("frames").get<std::size_t>();
    const auto width = j.at("frame_size").get<std::size_t>();
    auto& f = r.reconstruction;
    f.frames = Tensor<float>({frames, width},
                             read_f32((root / j.at("reconstruction").get<std::string>()).string(), frames * width));
    f.grid_shape = j.at("grid").get<std::vector<std::size_t>>();
    f.channels = j.at("channels").get<std::vector<std::string>>();
    f.dt_save = j.at("dt_save").get<double>();
    f.mask = j.at("masked_cells").get<std::vector<std::uint8_t>>();
    f.provenance.system = j.value("system", std::string());
    f.validate();
    const auto shape = j.at("latents_shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw IoError("latents_shape must have two entries");
    r.latents = Tensor<float>({shape[0], shape[1]},
                              read_f32((root / j.at("latents").get<std::string>()).string(), shape[0] * shape[1]));
    r.observed = j.at("observed").get<std::vector<std::uint8_t>>();
    r.first_frame = j.at("first_frame").get<std::size_t>();
    const auto& t = j.at("timing");
    r.timing.encode = t.at("encode").get<double>();
    r.timing.generate = t.at("generate").get<double>();
    r.timing.decode = t.at("decode").get<double>();
    if (r.observed.size() != frames) throw IoError("observed mask length differs from the frame count");
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed result.json: ") + e.what());
  } catch (const ShapeError& e) {
    throw IoError(std::string("inconsistent result: ") + e.what());
  }
  return r;
}

}  // namespace lapis::pipeline
