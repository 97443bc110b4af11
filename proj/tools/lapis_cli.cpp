// Command-line front end over the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lapis/lapis.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Failure {
  int code;
  std::string message;
};

void check(lapis_status s, const std::string& what) {
  if (s != LAPIS_OK) throw Failure{s, what + ": " + lapis_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<lapis_config, Deleter<lapis_config, lapis_config_free>>;
using Dataset = std::unique_ptr<lapis_dataset, Deleter<lapis_dataset, lapis_dataset_free>>;
using Models = std::unique_ptr<lapis_models, Deleter<lapis_models, lapis_models_free>>;
using Result = std::unique_ptr<lapis_result, Deleter<lapis_result, lapis_result_free>>;

/// Flags shared by every subcommand that builds an experiment config.
struct ConfigFlags {
  std::string config;
  std::optional<std::string> system, mode, direction, temporal;
  std::optional<std::size_t> ensemble, sensors, lag, window_frames, padding, horizon;
  std::optional<double> obs_fraction;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;

  void add(CLI::App* app) {
    app->add_option("--config", config, "INI experiment config");
    app->add_option("--system", system, "ks2d, kolmogorov2d, kvs or linear_toy")
        ->check(CLI::IsMember({"ks2d", "kolmogorov2d", "kvs", "linear_toy"}));
    app->add_option("--ensemble", ensemble, "simulation members K");
    app->add_option("--sensors", sensors, "sensor count p");
    app->add_option("--lag", lag, "SHRED lag (frame mode)");
    app->add_option("--mode", mode, "SHRED mode")->check(CLI::IsMember({"frame", "seq2seq"}));
    app->add_option("--direction", direction, "inference direction")->check(CLI::IsMember({"backward", "forward"}));
    auto* w = app->add_option("--window-frames", window_frames, "observed frames");
    auto* f = app->add_option("--obs-fraction", obs_fraction, "observed fraction of the trajectory");
    w->excludes(f);
    app->add_option("--padding", padding, "static padding length L (0: off)");
    app->add_option("--temporal", temporal, "temporal model")->check(CLI::IsMember({"seq2seq", "ar"}));
    app->add_option("--horizon", horizon, "forward horizon (0: rest of the trajectory)");
    app->add_option("--seed", seed, "experiment seed");
    app->add_option("--set", sets, "extra override section.key=value (repeatable)");
  }

  void apply(lapis_config* c) const {
    auto set = [&](const std::string& k, const std::string& v) { check(lapis_config_set(c, k.c_str(), v.c_str()), k); };
    if (ensemble) set("experiment.ensemble", std::to_string(*ensemble));
    if (sensors) set("experiment.sensors", std::to_string(*sensors));
    if (seed) set("experiment.seed", std::to_string(*seed));
    if (mode) {
      set("shred.mode", *mode);
      set("shred.layers", "0");
    }
    if (lag) set("shred.lag", std::to_string(*lag));
    if (direction) set("temporal.direction", *direction);
    if (window_frames) {
      set("temporal.window_frames", std::to_string(*window_frames));
      set("temporal.obs_fraction", "0");
    }
    if (obs_fraction) set("temporal.obs_fraction", std::to_string(*obs_fraction));
    if (padding) set("temporal.padding", std::to_string(*padding));
    if (temporal) set("temporal.kind", *temporal);
    if (horizon) set("temporal.horizon", std::to_string(*horizon));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Failure{LAPIS_ERR_USAGE, "--set expects section.key=value, got " + kv};
      set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }

  /// Config file < system defaults when no file < flags.
  Config resolve() const {
    lapis_config* raw = nullptr;
    if (!config.empty()) {
      check(lapis_config_load(config.c_str(), &raw), "loading " + config);
      Config c(raw);
      if (system) check(lapis_config_set(c.get(), "experiment.system", system->c_str()), "system");
      apply(c.get());
      return c;
    }
    check(lapis_config_new(system.value_or("ks2d").c_str(), &raw), "config");
    Config c(raw);
    apply(c.get());
    return c;
  }
};

std::string get(const lapis_config* c, const std::string& key) {
  std::size_t needed = 0;
  check(lapis_config_get(c, key.c_str(), nullptr, 0, &needed), key);
  std::string s(needed, '\0');
  check(lapis_config_get(c, key.c_str(), s.data(), s.size(), &needed), key);
  s.resize(needed - 1);
  return s;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Failure{LAPIS_ERR_IO, "cannot write " + p.string()};
  out << text;
  if (!out) throw Failure{LAPIS_ERR_IO, "failed writing " + p.string()};
}

void prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Failure{LAPIS_ERR_IO, "cannot create " + out + ": " + ec.message()};
}

void save_resolved(const lapis_config* c, const std::string& out) {
  check(lapis_config_save(c, (fs::path(out) / "config.ini").c_str()), "writing resolved config");
}

/// Records the invocation next to every output.
void save_command(const std::string& out, const std::string& sub, int argc, char** argv, const json& resolved) {
  json j;
  j["subcommand"] = sub;
  j["argv"] = std::vector<std::string>(argv, argv + argc);
  j["resolved"] = resolved;
  j["lapis_version"] = lapis_version();
  write_text(fs::path(out) / "command.json", j.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir) {
  lapis_dataset* raw = nullptr;
  check(lapis_dataset_load(dir.c_str(), &raw), "loading dataset " + dir);
  return Dataset(raw);
}

lapis_dataset_info describe(const lapis_dataset* ds) {
  lapis_dataset_info info{};
  check(lapis_dataset_describe(ds, &info), "dataset");
  return info;
}

std::size_t member_index(const lapis_dataset* ds, const std::string& member) {
  const auto info = describe(ds);
  if (member == "truth") {
    if (info.truth_index < 0) throw Failure{LAPIS_ERR_USAGE, "dataset has no truth member"};
    return static_cast<std::size_t>(info.truth_index);
  }
  try {
    std::size_t used = 0;
    const auto k = std::stoul(member, &used);
    if (used != member.size() || k >= info.members) throw std::out_of_range("member");
    return k;
  } catch (const std::exception&) {
    throw Failure{LAPIS_ERR_USAGE, "--member must be 'truth' or an index below " + std::to_string(info.members)};
  }
}

json metrics_json(const lapis_metrics& m) {
  json j{{"rmse", m.rmse}, {"nrmse", m.nrmse}, {"delta", m.delta}};
  j["ssim"] = std::isnan(m.ssim) ? json(nullptr) : json(m.ssim);
  if (m.has_generated) j["generated_nrmse"] = m.generated_nrmse;
  if (m.has_observed) j["observed_nrmse"] = m.observed_nrmse;
  return j;
}

void print_metrics(const lapis_metrics& m) {
  std::printf("rmse %.6g  nrmse %.6g  delta %.6g", m.rmse, m.nrmse, m.delta);
  if (!std::isnan(m.ssim)) std::printf("  ssim %.4f", m.ssim);
  if (m.has_generated) std::printf("  generated nrmse %.6g", m.generated_nrmse);
  std::printf("\n");
}

template <typename T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      if (item.empty() || item[0] == '-') throw std::invalid_argument(item);
      out.push_back(static_cast<T>(std::stoull(item, &used)));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{LAPIS_ERR_USAGE, std::string("invalid ") + what + " list '" + s + "'"};
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-sensor reconstruction with latent backward and forward inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lapis_version()));

  ConfigFlags sim_flags, train_flags, ablate_flags;
  std::string out, data, models_dir, result_dir, member = "truth", axis, values, seeds = "0,1,2", history, sweep;
  std::optional<std::string> infer_direction;
  std::optional<std::size_t> infer_window, infer_horizon;
  std::size_t workers = 0, columns = 4, channel = 0;
  bool no_ssim = false;

  auto* simulate = app.add_subcommand("simulate", "generate an ensemble dataset plus a held-out truth member");
  sim_flags.add(simulate);
  simulate->add_option("--out", out, "dataset directory")->required();

  auto* train = app.add_subcommand("train", "train SHRED and the temporal model");
  train_flags.add(train);
  train->add_option("--data", data, "dataset directory (simulated into OUT/data when omitted)");
  train->add_option("--out", out, "model directory")->required();

  auto* infer = app.add_subcommand("infer", "reconstruct a trajectory from a sensor window");
  infer->add_option("--models", models_dir, "directory written by train")->required();
  infer->add_option("--data", data, "dataset holding the sensor series")->required();
  infer->add_option("--member", member, "'truth' or a member index");
  infer->add_option("--direction", infer_direction, "defaults to the trained direction")
      ->check(CLI::IsMember({"backward", "forward"}));
  infer->add_option("--window-frames", infer_window, "observed frames (defaults to the trained window)");
  infer->add_option("--horizon", infer_horizon, "forward frames after the window");
  infer->add_flag("--no-ssim", no_ssim, "skip SSIM");
  infer->add_option("--out", out, "result directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score a saved result against a dataset member");
  evaluate->add_option("--result", result_dir, "directory written by infer")->required();
  evaluate->add_option("--data", data, "dataset with the reference member")->required();
  evaluate->add_option("--member", member, "'truth' or a member index");
  evaluate->add_flag("--no-ssim", no_ssim, "skip SSIM");
  evaluate->add_option("--out", out, "metrics directory (defaults to the result directory)");

  auto* ablate = app.add_subcommand("ablate", "sweep one hyperparameter over several seeds");
  ablate_flags.add(ablate);
  ablate->add_option("--axis", axis, "p, d_z, d_h, W or L")->required()->check(CLI::IsMember({"p", "d_z", "d_h", "W", "L"}));
  ablate->add_option("--values", values, "comma-separated axis values")->required();
  ablate->add_option("--seeds", seeds, "comma-separated seeds");
  ablate->add_option("--workers", workers, "parallel runs (0: LAPIS_THREADS or all cores)");
  ablate->add_option("--out", out, "sweep directory")->required();

  auto* plot = app.add_subcommand("plot", "PNG figures with matching CSV files");
  plot->add_option("--result", result_dir, "result directory for snapshot and error plots");
  plot->add_option("--data", data, "dataset with the reference member");
  plot->add_option("--member", member, "'truth' or a member index");
  plot->add_option("--columns", columns, "snapshot columns")->check(CLI::PositiveNumber);
  plot->add_option("--channel", channel, "field channel");
  plot->add_option("--history", history, "model directory with training histories");
  plot->add_option("--sweep", sweep, "ablation directory or summary.csv");
  plot->add_option("--out", out, "figure directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return LAPIS_ERR_USAGE;
  }

  try {
    if (*simulate) {
      auto cfg = sim_flags.resolve();
      check(lapis_config_validate(cfg.get()), "config");
      lapis_dataset* raw = nullptr;
      check(lapis_simulate(cfg.get(), &raw), "simulation");
      Dataset ds(raw);
      check(lapis_dataset_save(ds.get(), out.c_str()), "saving dataset");
      save_resolved(cfg.get(), out);
      const auto info = describe(ds.get());
      save_command(out, "simulate", argc, argv, {{"system", get(cfg.get(), "experiment.system")}});
      std::printf("%zu members x %zu frames x %zu cells, %zu sensors -> %s\n", info.members, info.frames,
                  info.frame_size, info.sensors, out.c_str());
    } else if (*train) {
      auto cfg = train_flags.resolve();
      check(lapis_config_validate(cfg.get()), "config");
      prepare_out(out);
      Dataset ds;
      if (data.empty()) {
        lapis_dataset* raw = nullptr;
        check(lapis_simulate(cfg.get(), &raw), "simulation");
        ds.reset(raw);
        data = (fs::path(out) / "data").string();
        check(lapis_dataset_save(ds.get(), data.c_str()), "saving dataset");
      } else {
        ds = load_dataset(data);
      }
      lapis_train_summary s{};
      check(lapis_train(cfg.get(), ds.get(), out.c_str(), &s), "training");
      save_resolved(cfg.get(), out);
      json summary{{"shred", {{"epochs", s.shred_epochs}, {"best_epoch", s.shred_best_epoch},
                              {"best_val", s.shred_best_val}, {"seconds", s.shred_seconds}}},
                   {"temporal", {{"epochs", s.temporal_epochs}, {"best_epoch", s.temporal_best_epoch},
                                 {"best_val", s.temporal_best_val}, {"seconds", s.temporal_seconds}}}};
      write_text(fs::path(out) / "train_summary.json", summary.dump(2) + "\n");
      save_command(out, "train", argc, argv, {{"data", data}});
      std::printf("SHRED: best epoch %zu of %zu, val %.6g (%.1fs)\n", s.shred_best_epoch, s.shred_epochs,
                  s.shred_best_val, s.shred_seconds);
      std::printf("temporal: best epoch %zu of %zu, val %.6g (%.1fs)\n", s.temporal_best_epoch, s.temporal_epochs,
                  s.temporal_best_val, s.temporal_seconds);
    } else if (*infer) {
      lapis_models* mraw = nullptr;
      check(lapis_models_load(models_dir.c_str(), &mraw), "loading models");
      Models models(mraw);
      lapis_models_info mi{};
      check(lapis_models_describe(models.get(), &mi), "models");
      auto ds = load_dataset(data);
      const auto k = member_index(ds.get(), member);
      const auto info = describe(ds.get());
      if (info.sensors != mi.sensors)
        throw Failure{LAPIS_ERR_USAGE, "dataset has " + std::to_string(info.sensors) + " sensors, the models expect " +
                                           std::to_string(mi.sensors)};
      std::vector<float> series(info.frames * info.sensors);
      check(lapis_dataset_sensors(ds.get(), k, series.data(), series.size()), "sensors");
      const int dir = infer_direction ? (*infer_direction == "forward" ? LAPIS_FORWARD : LAPIS_BACKWARD) : mi.direction;
      const std::size_t w = infer_window.value_or(mi.observed_frames);
      if (w == 0 || w > info.frames) throw Failure{LAPIS_ERR_USAGE, "--window-frames out of range"};
      const std::size_t start = dir == LAPIS_BACKWARD ? info.frames - w : 0;
      std::size_t horizon = 0;
      if (dir == LAPIS_FORWARD) {
        lapis_config* craw = nullptr;
        check(lapis_config_load((fs::path(models_dir) / "config.ini").c_str(), &craw), "model config");
        Config mc(craw);
        const auto trained = std::stoul(get(mc.get(), "temporal.horizon"));
        horizon = infer_horizon.value_or(trained > 0 ? trained : info.frames - w);
      }
      lapis_result* rraw = nullptr;
      check(lapis_infer(models.get(), series.data() + start * info.sensors, w, info.sensors, start, info.frames, dir,
                        horizon, &rraw),
            "inference");
      Result res(rraw);
      lapis_metrics m{};
      check(lapis_result_evaluate(res.get(), ds.get(), k, no_ssim ? 0 : 1, &m), "evaluation");
      check(lapis_result_save(res.get(), out.c_str()), "saving result");
      lapis_config* craw = nullptr;
      check(lapis_config_load((fs::path(models_dir) / "config.ini").c_str(), &craw), "model config");
      Config resolved(craw);
      check(lapis_config_set(resolved.get(), "temporal.direction", dir == LAPIS_FORWARD ? "forward" : "backward"),
            "direction");
      check(lapis_config_set(resolved.get(), "temporal.window_frames", std::to_string(w).c_str()), "window");
      check(lapis_config_set(resolved.get(), "temporal.obs_fraction", "0"), "window");
      check(lapis_config_set(resolved.get(), "temporal.horizon", std::to_string(horizon).c_str()), "horizon");
      save_resolved(resolved.get(), out);
      save_command(out, "infer", argc, argv,
                   {{"models", models_dir}, {"data", data}, {"member", k}, {"window_frames", w}, {"horizon", horizon}});
      print_metrics(m);
    } else if (*evaluate) {
      if (out.empty()) out = result_dir;
      lapis_result* rraw = nullptr;
      check(lapis_result_load(result_dir.c_str(), &rraw), "loading result");
      Result res(rraw);
      auto ds = load_dataset(data);
      const auto k = member_index(ds.get(), member);
      lapis_metrics m{};
      check(lapis_result_evaluate(res.get(), ds.get(), k, no_ssim ? 0 : 1, &m), "evaluation");
      prepare_out(out);
      json j = metrics_json(m);
      write_text(fs::path(out) / "evaluation.json", j.dump(2) + "\n");
      check(lapis_plot_frame_errors(res.get(), (fs::path(out) / "frame_errors.png").c_str(),
                                    (fs::path(out) / "frame_errors.csv").c_str()),
            "frame errors");
      check(lapis_result_save(res.get(), out.c_str()), "saving metrics");
      save_command(out, "evaluate", argc, argv, {{"result", result_dir}, {"data", data}, {"member", k}});
      print_metrics(m);
    } else if (*ablate) {
      auto cfg = ablate_flags.resolve();
      check(lapis_config_validate(cfg.get()), "config");
      const auto vals = parse_list<std::size_t>(values, "value");
      const auto sds = parse_list<std::uint64_t>(seeds, "seed");
      prepare_out(out);
      check(lapis_ablate(cfg.get(), axis.c_str(), vals.data(), vals.size(), sds.data(), sds.size(), workers,
                         out.c_str()),
            "ablation");
      check(lapis_plot_sweep((fs::path(out) / "summary.csv").c_str(), (fs::path(out) / "sweep.png").c_str(),
                             (fs::path(out) / "sweep.csv").c_str()),
            "sweep plot");
      save_command(out, "ablate", argc, argv, {{"axis", axis}, {"values", vals}, {"seeds", sds}, {"workers", workers}});
      std::ifstream in(fs::path(out) / "summary.csv");
      std::cout << in.rdbuf();
    } else if (*plot) {
      if (result_dir.empty() && history.empty() && sweep.empty())
        throw Failure{LAPIS_ERR_USAGE, "plot needs --result, --history or --sweep"};
      prepare_out(out);
      const fs::path o(out);
      std::vector<std::string> written;
      if (!result_dir.empty()) {
        if (data.empty()) throw Failure{LAPIS_ERR_USAGE, "--result needs --data for the reference"};
        lapis_result* rraw = nullptr;
        check(lapis_result_load(result_dir.c_str(), &rraw), "loading result");
        Result res(rraw);
        auto ds = load_dataset(data);
        const auto k = member_index(ds.get(), member);
        check(lapis_plot_snapshots(res.get(), ds.get(), k, columns, channel, (o / "snapshots.png").c_str(),
                                   (o / "snapshots.csv").c_str()),
              "snapshots");
        check(lapis_result_evaluate(res.get(), ds.get(), k, 1, nullptr), "evaluation");
        check(lapis_plot_frame_errors(res.get(), (o / "frame_errors.png").c_str(), (o / "frame_errors.csv").c_str()),
              "frame errors");
        written.insert(written.end(), {"snapshots.png", "frame_errors.png"});
      }
      if (!history.empty()) {
        for (const char* stage : {"shred", "temporal"}) {
          const auto csv = fs::path(history) / stage / "history.csv";
          if (!fs::exists(csv)) continue;
          const std::string base = std::string(stage) + "_loss";
          check(lapis_plot_history(csv.c_str(), (o / (base + ".png")).c_str(), (o / (base + ".csv")).c_str()),
                "loss curves");
          written.push_back(base + ".png");
        }
      }
      if (!sweep.empty()) {
        const fs::path summary = fs::is_directory(sweep) ? fs::path(sweep) / "summary.csv" : fs::path(sweep);
        check(lapis_plot_sweep(summary.c_str(), (o / "sweep.png").c_str(), (o / "sweep.csv").c_str()), "sweep plot");
        written.push_back("sweep.png");
      }
      save_command(out, "plot", argc, argv,
                   {{"result", result_dir}, {"data", data}, {"history", history}, {"sweep", sweep},
                    {"columns", columns}, {"channel", channel}});
      for (const auto& w : written) std::printf("%s\n", (o / w).c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return LAPIS_ERR_INTERNAL;
  }
  return 0;
}
