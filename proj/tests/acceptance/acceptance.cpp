// Acceptance harness: one PASS/FAIL line per criterion.
//
//   lapis_acceptance [--work DIR] [--known-deviation] N [N ...]
//
// Exit status is 0 when every requested criterion passes, 1 otherwise, or 77
// with --known-deviation when the only failures are the requested ones.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "core/autograd.hpp"
#include "metrics/metrics.hpp"
#include "nn/layers.hpp"
#include "pipeline/experiment.hpp"
#include "pipeline/pipeline.hpp"
#include "sensing/dataset.hpp"
#include "shred/shred.hpp"
#include "sim/simulate.hpp"
#include "support/gradcheck.hpp"
#include "temporal/temporal.hpp"

using namespace lapis;
namespace fs = std::filesystem;
using testing::gradcheck;
using testing::gradcheck_parameters;
using testing::random_tensor;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a measured value against its bound and folds it into `pass`.
  void at_most(const std::string& what, double value, double bound) {
    const bool ok = std::isfinite(value) && value <= bound;
    pass = pass && ok;
    note(what + " " + fmt(value) + (ok ? " <= " : " !<= ") + fmt(bound));
  }
  void at_least(const std::string& what, double value, double bound) {
    const bool ok = std::isfinite(value) && value >= bound;
    pass = pass && ok;
    note(what + " " + fmt(value) + (ok ? " >= " : " !>= ") + fmt(bound));
  }
  void within(const std::string& what, double value, double lo, double hi) {
    const bool ok = std::isfinite(value) && value >= lo && value <= hi;
    pass = pass && ok;
    note(what + " " + fmt(value) + (ok ? " in [" : " not in [") + fmt(lo) + ", " + fmt(hi) + "]");
  }
  void holds(const std::string& what, bool ok) {
    pass = pass && ok;
    note(what + (ok ? " ok" : " VIOLATED"));
  }
  void note(const std::string& s) {
    if (detail.tellp() > 0) detail << "; ";
    detail << s;
  }
  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
  }
};

fs::path work_root = fs::temp_directory_path() / "lapis_acceptance";

fs::path workdir(const std::string& name) {
  auto p = work_root / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool same_bits(const Tensor<float>& a, const Tensor<float>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Plain SHRED on raw sensor rows, denormalised.
Tensor<float> plain_shred(pipeline::Models& m, const Tensor<float>& raw, std::size_t grid) {
  Tensor<float> s = raw;
  sensing::SensorLayout layout;
  layout.indices = m.shred.sensor_indices;
  sensing::normalize_sensors(s, layout, grid, *m.shred.normalization);
  sim::FieldSequence f;
  f.frames = m.shred.reconstruct(s);
  f.grid_shape = m.meta.grid_shape;
  f.channels = m.meta.channels;
  sensing::denormalize_field(f, *m.shred.normalization);
  return f.frames;
}

double relative_distance(const Tensor<float>& a, const Tensor<float>& b) {
  double d = 0, n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
    n += double(b[i]) * b[i];
  }
  return std::sqrt(d) / std::max(std::sqrt(n), 1e-12);
}

// ---- 1: gradient integrity ----

void gradients(Outcome& out) {
  constexpr double tol = 1e-4;
  std::mt19937_64 rng(101);
  using V = std::vector<Var<double>>;
  auto w = random_tensor({4, 5}, rng);
  auto weighted = [w](Tape<double>& t, Var<double> y) {
    Tensor<double> ww = w;
    ww.reshape(y.shape());
    return ad::sum(ad::mul(y, t.constant(ww)));
  };
  struct Op {
    const char* name;
    std::function<Var<double>(Tape<double>&, const V&)> fn;
    std::vector<Shape> shapes;
  };
  const std::vector<Op> ops = {
      {"add", [&](auto& t, const V& v) { return weighted(t, ad::add(v[0], v[1])); }, {{4, 5}, {4, 5}}},
      {"add_bcast", [&](auto& t, const V& v) { return weighted(t, ad::add(v[0], v[1])); }, {{4, 5}, {1, 1}}},
      {"sub", [&](auto& t, const V& v) { return weighted(t, ad::sub(v[0], v[1])); }, {{4, 5}, {4, 5}}},
      {"mul", [&](auto& t, const V& v) { return weighted(t, ad::mul(v[0], v[1])); }, {{4, 5}, {4, 5}}},
      {"tanh", [&](auto& t, const V& v) { return weighted(t, ad::tanh(v[0])); }, {{4, 5}}},
      {"sigmoid", [&](auto& t, const V& v) { return weighted(t, ad::sigmoid(v[0])); }, {{4, 5}}},
      {"gelu", [&](auto& t, const V& v) { return weighted(t, ad::gelu(v[0])); }, {{4, 5}}},
      {"exp", [&](auto& t, const V& v) { return weighted(t, ad::exp(v[0])); }, {{4, 5}}},
      {"square", [&](auto& t, const V& v) { return weighted(t, ad::square(v[0])); }, {{4, 5}}},
      {"scale", [&](auto& t, const V& v) { return weighted(t, ad::scale(v[0], -1.7)); }, {{4, 5}}},
      {"add_row", [&](auto& t, const V& v) { return weighted(t, ad::add_row(v[0], v[1])); }, {{4, 5}, {1, 5}}},
      {"mul_row", [&](auto& t, const V& v) { return weighted(t, ad::mul_row(v[0], v[1])); }, {{4, 5}, {1, 5}}},
      {"matmul", [&](auto& t, const V& v) { return weighted(t, ad::matmul(v[0], v[1])); }, {{4, 3}, {3, 5}}},
      {"affine", [&](auto& t, const V& v) { return weighted(t, ad::affine(v[0], v[1], v[2])); },
       {{4, 3}, {3, 5}, {1, 5}}},
      {"slice_cols", [&](auto&, const V& v) { return ad::sum(ad::square(ad::slice_cols(v[0], 1, 4))); }, {{4, 5}}},
      {"slice_rows", [&](auto&, const V& v) { return ad::sum(ad::square(ad::slice_rows(v[0], 1, 3))); }, {{4, 5}}},
      {"concat_cols",
       [&](auto& t, const V& v) {
         const Var<double> p[] = {v[0], v[1]};
         return weighted(t, ad::concat_cols<double>(p));
       },
       {{4, 2}, {4, 3}}},
      {"concat_rows",
       [&](auto& t, const V& v) {
         const Var<double> p[] = {v[0], v[1]};
         return weighted(t, ad::concat_rows<double>(p));
       },
       {{1, 5}, {3, 5}}},
      {"tile_rows", [&](auto& t, const V& v) { return weighted(t, ad::tile_rows(v[0], 4)); }, {{1, 5}}},
      {"mean", [&](auto&, const V& v) { return ad::square(ad::mean(v[0])); }, {{4, 5}}},
      {"mean_rows", [&](auto&, const V& v) { return ad::sum(ad::square(ad::mean_rows(v[0]))); }, {{4, 5}}},
      {"layer_norm", [&](auto& t, const V& v) { return weighted(t, ad::layer_norm(v[0], 1e-6)); }, {{4, 5}}},
  };
  double worst_op = 0;
  std::string worst_name;
  for (const auto& op : ops) {
    std::vector<Tensor<double>> inputs;
    for (const auto& s : op.shapes) inputs.push_back(random_tensor(s, rng));
    const double e = gradcheck(op.fn, inputs);
    if (e >= worst_op) {
      worst_op = e;
      worst_name = op.name;
    }
  }
  out.at_most("worst op (" + worst_name + ")", worst_op, tol);

  // Layers: bidirectional LSTM stack and normalised MLP.
  nn::LstmStack<double> lstm("l", {3, 8, 2, true}, rng);
  auto xs = random_tensor({12, 3}, rng);
  auto wl = random_tensor({12, 16}, rng);
  out.at_most("bilstm", gradcheck_parameters(
                            [&](Tape<double>& t) {
                              auto o = lstm.forward(t, nn::rows_as_steps(t, xs));
                              return ad::sum(ad::mul(ad::concat_rows<double>(o), t.constant(wl)));
                            },
                            lstm.parameters()),
              tol);
  nn::Mlp<double> mlp("m", {{6, 8, 8, 6}, nn::Activation::gelu, true}, rng);
  auto xm = random_tensor({4, 6}, rng);
  out.at_most("mlp", gradcheck_parameters(
                         [&](Tape<double>& t) { return ad::sum(ad::square(mlp.forward(t, t.constant(xm)))); },
                         mlp.parameters()),
              tol);

  // SHRED in both modes with a masked loss.
  double worst_shred = 0;
  for (auto mode : {shred::Mode::frame, shred::Mode::seq2seq}) {
    auto c = shred::ShredConfig::defaults(mode, 3, 10);
    c.hidden = mode == shred::Mode::seq2seq ? 3 : 6;  // d_z = 6 either way
    c.lag = 4;
    c.decoder_hidden = {8};
    shred::ShredModel<double> m(c, 102);
    auto s = random_tensor({12, 3}, rng, 0, 1);
    auto y = random_tensor({12, 10}, rng);
    std::vector<double> mw{1, 0.5, 0, 2, 1, 1, 1, 0, 1, 1};
    worst_shred = std::max(worst_shred, gradcheck_parameters(
                                            [&](Tape<double>& t) {
                                              return shred::shred_loss(m.decode(t, m.encode(t, s)), y, mw);
                                            },
                                            m.parameters()));
  }
  out.at_most("shred", worst_shred, tol);

  // Seq2seq temporal model: W + 1 = 3 observed, 9 generated, T + 1 = 12.
  temporal::Seq2SeqConfig sc;
  sc.latent_dim = 6;
  sc.hidden = 8;
  sc.window = 2;
  sc.horizon = 9;
  temporal::Seq2SeqTemporalModel<double> s2s(sc, 103);
  auto obs = random_tensor({3, 6}, rng);
  auto target = random_tensor({9, 6}, rng);
  std::vector<Tensor<double>> ts;
  for (std::size_t t = 0; t < 9; ++t) ts.push_back(target.slice_rows(t, t + 1));
  out.at_most("seq2seq graph", gradcheck_parameters(
                                   [&](Tape<double>& tape) {
                                     auto gen = s2s.generate(tape, nn::rows_as_steps(tape, obs));
                                     std::span<const Var<double>> ps(gen);
                                     std::span<const Tensor<double>> tt(ts);
                                     return ad::add(temporal::recon_loss<double>(ps, tt),
                                                    ad::scale(temporal::shape_loss<double>(ps, tt), 0.1));
                                   },
                                   s2s.parameters()),
              tol);

  // AR model unrolled through its own predictions: 4 seed rows, 8 steps.
  temporal::ArConfig ac;
  ac.latent_dim = 6;
  ac.hidden = 8;
  ac.window = 4;
  temporal::ARModel<double> ar(ac, 104);
  auto seed = random_tensor({4, 6}, rng);
  auto ar_target = random_tensor({8, 6}, rng);
  out.at_most("AR rollout graph", gradcheck_parameters(
                                      [&](Tape<double>& tape) {
                                        auto win = nn::rows_as_steps(tape, seed);
                                        std::vector<Var<double>> preds;
                                        for (std::size_t k = 0; k < 8; ++k) {
                                          auto z = ar.step(tape, win);
                                          preds.push_back(z);
                                          win.erase(win.begin());
                                          win.push_back(z);
                                        }
                                        auto all = ad::concat_rows<double>(preds);
                                        return ad::mean(ad::square(ad::sub(all, tape.constant(ar_target))));
                                      },
                                      ar.parameters()),
              tol);
}

// ---- 2: solver oracles ----

std::vector<double> mode_field(std::size_t n, double length, int mx, int my) {
  std::vector<double> u(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      u[r * n + c] = std::cos(2 * std::numbers::pi * (mx * (length * c / n) + my * (length * r / n)) / length);
  return u;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void solvers(Outcome& out) {
  const double ks_len = 16 * std::numbers::pi;
  double ks_err = 0;
  for (auto [mx, my] : {std::pair{3, 0}, std::pair{5, 4}, std::pair{1, 1}, std::pair{7, 2}}) {
    sim::Ks2dSolver s(64, ks_len, 0.05, false);
    s.set_state(mode_field(64, ks_len, mx, my));
    s.advance(40);
    const double k2 = (mx * mx + my * my) * std::pow(2 * std::numbers::pi / ks_len, 2);
    const double expected = std::exp((k2 - k2 * k2) * 2.0);
    ks_err = std::max(ks_err, std::abs(s.state()[0] - expected) / expected);
  }
  out.at_most("KS linear mode rel err", ks_err, 1e-6);

  const double kf_len = 2 * std::numbers::pi, re = 50;
  double kf_err = 0;
  for (auto [mx, my] : {std::pair{2, 0}, std::pair{3, 5}, std::pair{1, 7}}) {
    sim::KolmogorovSolver s(64, kf_len, 0.01, re, 4.0, false, true);
    s.set_vorticity(mode_field(64, kf_len, mx, my));
    s.advance(100);
    const double expected = std::exp(-(mx * mx + my * my) * 1.0 / re);
    kf_err = std::max(kf_err, std::abs(s.vorticity()[0] - expected) / expected);
  }
  out.at_most("Kolmogorov decay rel err", kf_err, 1e-6);

  const auto u0 = sim::lowpass_noise(32, 3, 1.5, 17);
  auto run = [&](double dt) {
    sim::Ks2dSolver s(32, ks_len, dt, true);
    s.set_state(u0);
    s.advance(static_cast<std::size_t>(std::lround(4.0 / dt)));
    return s.state();
  };
  const auto ref = run(0.4 / 8);
  out.at_least("ETDRK4 order", std::log2(max_diff(run(0.4), ref) / max_diff(run(0.2), ref)), 3.5);

  auto cfg = sim::SimConfig::defaults(sim::System::kvs);
  cfg.nx = 64;
  cfg.ny = 32;
  cfg.periodic = true;
  sim::Lbm lbm(cfg);
  std::vector<double> rho(64 * 32), ux(64 * 32), uy(64 * 32, 0.0);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      rho[y * 64 + x] = 1.0 + 0.01 * std::sin(2 * std::numbers::pi * x / 64.0);
      ux[y * 64 + x] = 0.04 * std::sin(2 * std::numbers::pi * y / 32.0);
    }
  lbm.set_equilibrium(rho, ux, uy);
  const double m0 = lbm.total_mass();
  lbm.advance(1000);
  out.at_most("LBM mass drift / 1000 steps", std::abs(lbm.total_mass() - m0) / m0, 1e-8);
}

// ---- 3: vortex shedding ----

void strouhal(Outcome& out) {
  auto cfg = sim::ground_truth_member(sim::SimConfig::defaults(sim::System::kvs), 0);
  cfg.probe_x = std::lround(cfg.cylinder_x + 4 * cfg.radius);
  cfg.probe_y = std::lround(cfg.cylinder_y);
  sim::KvsDiagnostics diag;
  sim::simulate_kvs_lbm(cfg, &diag);
  out.note("Re " + Outcome::fmt(cfg.re) + ", U " + Outcome::fmt(cfg.u_inf));
  out.within("St", sim::strouhal_from_probe(diag.probe, cfg.radius, cfg.u_inf), 0.14, 0.20);
}

// ---- 4-6: end-to-end runs ----

pipeline::ExperimentRun end_to_end(const pipeline::ExperimentConfig& cfg, const std::string& name, Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  auto run = pipeline::run_experiment(cfg, workdir(name).string());
  out.note(name + " " + Outcome::fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) +
           " s");
  return run;
}

void ks_end_to_end(Outcome& out) {
  auto cfg = pipeline::ExperimentConfig::defaults(sim::System::ks2d);
  cfg.window_frames = 10;
  cfg.direction = temporal::Direction::backward;
  cfg.temporal = pipeline::TemporalKind::seq2seq;
  auto run = end_to_end(cfg, "ks2d", out);
  const double lapis = run.lapis.metrics->full.nrmse;
  const double shred = run.baseline.metrics->full.nrmse;
  out.at_most("LAPIS NRMSE", lapis, 0.10);
  out.at_most("LAPIS - SHRED", lapis - shred, 0.03);
  out.note("SHRED NRMSE " + Outcome::fmt(shred));
  if (run.lapis.metrics->full.ssim) out.note("SSIM " + Outcome::fmt(*run.lapis.metrics->full.ssim));
}

void kolmogorov_end_to_end(Outcome& out) {
  auto cfg = pipeline::ExperimentConfig::defaults(sim::System::kolmogorov2d);
  cfg.window_frames = 10;
  auto run = end_to_end(cfg, "kolmogorov2d", out);
  const auto& speed = run.lapis.metrics->channels.at("speed");
  out.at_most("velocity NRMSE", speed.nrmse, 0.09);
  out.at_least("velocity SSIM", speed.ssim.value_or(NAN), 0.75);
  out.note("SHRED velocity NRMSE " + Outcome::fmt(run.baseline.metrics->channels.at("speed").nrmse));
}

void kvs_end_to_end(Outcome& out) {
  for (auto dir : {temporal::Direction::forward, temporal::Direction::backward}) {
    auto cfg = pipeline::ExperimentConfig::defaults(sim::System::kvs);
    cfg.obs_fraction = 0.10;
    cfg.shred_hidden = 80;
    cfg.direction = dir;
    const std::string name = temporal::to_string(dir);
    auto run = end_to_end(cfg, "kvs_" + name, out);
    out.at_most(name + " NRMSE", run.lapis.metrics->full.nrmse, 0.08);
  }
}

// ---- 7: padding ----

pipeline::ExperimentConfig toy_config() {
  auto cfg = pipeline::ExperimentConfig::defaults(sim::System::linear_toy);
  cfg.shred_hidden = 16;
  cfg.decoder_hidden = {64, 64};
  cfg.shred_epochs = 200;
  cfg.temporal_hidden = 32;
  cfg.temporal_epochs = 200;
  return cfg;
}

void padding(Outcome& out) {
  auto cfg = toy_config();
  const auto ds = sensing::generate_ensemble(pipeline::ensemble_spec(cfg));
  const auto& truth = ds.truth();

  for (std::size_t L : {10, 15, 20}) {
    cfg.padding = L;
    cfg.window_frames = 1;
    const auto dir = workdir("padding_L" + std::to_string(L));
    pipeline::train_all(cfg, ds, dir.string());
    auto models = pipeline::load_models(dir.string());

    Tensor<float> s = truth.sensors;
    sensing::SensorLayout layout;
    layout.indices = models.shred.sensor_indices;
    sensing::normalize_sensors(s, layout, ds.grid_size(), *models.shred.normalization);
    const auto full = models.shred.encode(s);
    const auto terminal = full.slice_rows(full.rows() - 1, full.rows());
    const auto padded =
        temporal::encode_padded_terminal(models.shred, temporal::pad_terminal(s.slice_rows(s.rows() - 1, s.rows()), L));
    out.at_most("L=" + std::to_string(L) + " latent rel dist", relative_distance(padded, terminal), 0.10);

    if (L != 10) continue;
    auto single = pipeline::infer_backward(models, pipeline::SensorWindow::terminal(truth.sensors, 1));
    pipeline::attach_metrics(single, truth.field, false);

    auto multi_cfg = cfg;
    multi_cfg.window_frames = 10;
    const auto multi_dir = workdir("padding_W10");
    pipeline::train_all(multi_cfg, ds, multi_dir.string());
    auto multi_models = pipeline::load_models(multi_dir.string());
    auto multi = pipeline::infer_backward(multi_models, pipeline::SensorWindow::terminal(truth.sensors, 10));
    pipeline::attach_metrics(multi, truth.field, false);
    out.at_most("single-frame / W=10 NRMSE", single.metrics->full.nrmse / multi.metrics->full.nrmse, 2.0);
    out.note("single " + Outcome::fmt(single.metrics->full.nrmse) + ", W=10 " +
             Outcome::fmt(multi.metrics->full.nrmse));
  }
}

// ---- 8: linear backward validator ----

void linear_validator(Outcome& out) {
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> modes(1, 6);
  std::uniform_real_distribution<double> gamma(0.01, 2.0), eps(-1e-2, 1e-2), horizon(0.5, 5.0);
  double worst = 0;
  bool bound = true;
  for (int instance = 0; instance < 100; ++instance) {
    const int m = modes(rng);
    std::vector<double> g(m), e(m);
    for (int j = 0; j < m; ++j) {
      g[j] = gamma(rng);
      e[j] = eps(rng);
    }
    const double T = horizon(rng);
    std::vector<double> times;
    for (int k = 0; k <= 20; ++k) times.push_back(std::min(T, T * k / 20));
    auto r = metrics::validate_linear_backward(g, T, e, times);
    worst = std::max(worst, r.max_modewise_relative_error);
    bound = bound && r.bound_holds;
  }
  out.at_most("mode-wise rel err", worst, 1e-10);
  out.holds("aggregate bound at every t", bound);
}

// ---- 9: structural invariants ----

void invariants(Outcome& out) {
  std::mt19937_64 rng(909);

  temporal::ArConfig ac;
  ac.latent_dim = 6;
  ac.hidden = 8;
  ac.window = 4;
  temporal::ARModel<float> ar(ac, 1);
  auto seed = random_tensor({4, 6}, rng).cast<float>();
  const auto long_run = ar.rollout(seed, 30);
  bool prefix = long_run.rows() == 30;
  for (std::size_t k : {0, 1, 7, 29}) {
    auto r = ar.rollout(seed, k);
    prefix = prefix && r.rows() == k && std::memcmp(r.data(), long_run.data(), r.size() * sizeof(float)) == 0;
  }
  out.holds("rollout prefix consistency", prefix);

  bool lengths = true;
  for (std::size_t h : {1, 5, 17}) {
    temporal::Seq2SeqConfig sc;
    sc.latent_dim = 6;
    sc.hidden = 8;
    sc.window = 3;
    sc.horizon = h;
    temporal::Seq2SeqTemporalModel<float> m(sc, 2);
    auto g = m.generate(random_tensor({4, 6}, rng).cast<float>(), h);
    lengths = lengths && g.rows() == h && g.cols() == 6;
  }
  out.holds("generate output lengths", lengths);

  std::uniform_int_distribution<int> q(-64, 64);
  Tensor<double> a({10, 4}), b({10, 4});
  for (auto& v : a.values()) v = q(rng) / 8.0;
  for (auto& v : b.values()) v = q(rng) / 8.0;
  auto shifted = a;
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t j = 0; j < 4; ++j) shifted(t, j) += 0.5 * (j + 1) - 3;
  out.holds("shape-loss shift invariance",
            temporal::shape_loss(shifted, b) == temporal::shape_loss(a, b) && temporal::shape_loss(shifted, a) == 0.0);

  auto cfg = pipeline::ExperimentConfig::defaults(sim::System::linear_toy);
  cfg.sim.nx = 16;
  cfg.sim.num_frames = 30;
  cfg.sim.gammas = {0.1, 0.3, 0.6};
  cfg.ensemble = 4;
  cfg.sensors = 3;
  cfg.lag = 4;
  cfg.shred_hidden = 6;
  cfg.decoder_hidden = {12};
  cfg.shred_epochs = 5;
  cfg.window_frames = 6;
  cfg.temporal_hidden = 5;
  cfg.temporal_epochs = 5;
  const auto ds = sensing::generate_ensemble(pipeline::ensemble_spec(cfg));

  const auto ds_dir = workdir("inv_data");
  sensing::save_dataset(ds, ds_dir.string());
  const auto back = sensing::load_dataset(ds_dir.string());
  bool ds_exact = back.members.size() == ds.members.size();
  for (std::size_t k = 0; ds_exact && k < ds.members.size(); ++k)
    ds_exact = same_bits(back.members[k].field.frames, ds.members[k].field.frames) &&
               same_bits(back.members[k].sensors, ds.members[k].sensors);
  out.holds("dataset round trip", ds_exact);

  const auto dir_a = workdir("inv_a"), dir_b = workdir("inv_b");
  pipeline::train_all(cfg, ds, dir_a.string());
  pipeline::train_all(cfg, back, dir_b.string());
  out.holds("seed determinism",
            file_bytes(dir_a / "shred/weights.bin") == file_bytes(dir_b / "shred/weights.bin") &&
                file_bytes(dir_a / "temporal/weights.bin") == file_bytes(dir_b / "temporal/weights.bin"));

  auto models = pipeline::load_models(dir_a.string());
  const auto resaved = workdir("inv_resave");
  shred::save_shred(models.shred, resaved.string());
  out.holds("model round trip", file_bytes(resaved / "weights.bin") == file_bytes(dir_a / "shred/weights.bin"));

  const auto& truth = ds.truth();
  const auto window = pipeline::SensorWindow::terminal(truth.sensors, cfg.observed_frames());
  auto res = pipeline::infer_backward(models, window);
  auto all = pipeline::infer_backward(models, pipeline::SensorWindow::terminal(truth.sensors, cfg.frames()));
  out.holds("observed frames == plain SHRED",
            same_bits(res.reconstruction.frames.slice_rows(window.start(), cfg.frames()),
                      plain_shred(models, window.values(), ds.grid_size())));
  out.holds("full window == plain SHRED",
            same_bits(all.reconstruction.frames, plain_shred(models, truth.sensors, ds.grid_size())));
  auto reloaded = pipeline::load_models(dir_b.string());
  auto again = pipeline::infer_backward(reloaded, window);
  out.holds("inference determinism", same_bits(again.reconstruction.frames, res.reconstruction.frames));
}

// ---- 10: sensor-count sweep ----

void sensor_sweep(Outcome& out) {
  pipeline::AblationSpec spec;
  spec.base = toy_config();
  spec.axis = pipeline::Axis::sensors;
  spec.values = {4, 8, 16, 32};
  spec.seeds = {0, 1, 2};
  spec.with_ssim = false;
  const auto dir = workdir("sweep");
  auto r = pipeline::run_ablation(spec, dir.string());
  pipeline::write_ablation_csv(r, (dir / "rows.csv").string(), (dir / "summary.csv").string());
  for (const auto& p : r.points)
    out.note("p=" + std::to_string(p.value) + " " + Outcome::fmt(p.nrmse_mean) + "+-" + Outcome::fmt(p.nrmse_std));
  for (std::size_t k = 1; k < r.points.size(); ++k) {
    const auto &prev = r.points[k - 1], &cur = r.points[k];
    out.at_most("mean(p=" + std::to_string(cur.value) + ") - mean(p=" + std::to_string(prev.value) + ")",
                cur.nrmse_mean - prev.nrmse_mean, std::max(prev.nrmse_std, cur.nrmse_std));
  }
}

const std::map<int, std::pair<const char*, void (*)(Outcome&)>> criteria = {
    {1, {"gradient integrity", gradients}},
    {2, {"solver oracles", solvers}},
    {3, {"vortex shedding Strouhal", strouhal}},
    {4, {"2D KS end-to-end", ks_end_to_end}},
    {5, {"2D Kolmogorov end-to-end", kolmogorov_end_to_end}},
    {6, {"KVS bidirectional", kvs_end_to_end}},
    {7, {"padding mechanism", padding}},
    {8, {"linear backward validator", linear_validator}},
    {9, {"structural invariants", invariants}},
    {10, {"sensor-count sweep", sensor_sweep}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  bool known_deviation = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work_root = argv[++i];
    } else if (a == "--known-deviation") {
      known_deviation = true;
    } else if (a == "all") {
      for (const auto& [k, _] : criteria) wanted.push_back(k);
    } else {
      char* end = nullptr;
      const long k = std::strtol(a.c_str(), &end, 10);
      if (*end != '\0' || !criteria.count(static_cast<int>(k))) {
        std::fprintf(stderr, "usage: %s [--work DIR] [--known-deviation] (all | 1..10)...\n", argv[0]);
        return 2;
      }
      wanted.push_back(static_cast<int>(k));
    }
  }
  if (wanted.empty()) {
    for (const auto& [k, _] : criteria) wanted.push_back(k);
  }

  bool all_pass = true;
  for (int k : wanted) {
    const auto& [name, fn] = criteria.at(k);
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.note(std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s  %s [%s] (%.1f s)\n", k, out.pass ? "PASS" : "FAIL", name, out.detail.str().c_str(),
                secs);
    std::fflush(stdout);
    all_pass = all_pass && out.pass;
  }
  if (all_pass) return 0;
  return known_deviation ? 77 : 1;
}
