#include "temporal/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "core/errors.hpp"
#include "nn/adam.hpp"
#include "nn/serialize.hpp"

namespace lapis::temporal {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string to_string(Direction d) { return d == Direction::backward ? "backward" : "forward"; }

Direction direction_from_string(const std::string& s) {
  if (s == "backward") return Direction::backward;
  if (s == "forward") return Direction::forward;
  throw InvalidArgument("unknown direction '" + s + "' (expected backward or forward)");
}

template <typename T>
Tensor<T> pad_terminal(const Tensor<T>& terminal, std::size_t padding) {
  if (padding == 0) throw InvalidArgument("padding length must be at least 1");
  if (terminal.empty()) throw ShapeError("terminal frame is empty");
  if (terminal.rank() == 2 && terminal.rows() != 1) throw ShapeError("terminal frame must be a single row");
  const std::size_t p = terminal.size();
  Tensor<T> out = Tensor<T>::matrix(padding, p);
  for (std::size_t r = 0; r < padding; ++r) std::copy_n(terminal.data(), p, out.row(r).begin());
  return out;
}

Tensor<float> encode_padded_terminal(shred::ShredModel<float>& model, const Tensor<float>& pad) {
  if (!model.frozen()) throw StateError("padded encoding requires a frozen SHRED model");
  auto z = model.encode(pad);
  return z.slice_rows(z.rows() - 1, z.rows());
}

// ---- normalisation ----

LatentStats LatentStats::fit(const std::vector<const Tensor<float>*>& trajectories) {
  if (trajectories.empty()) throw InvalidArgument("no latent trajectories to fit");
  const std::size_t d = trajectories.front()->cols();
  std::vector<double> sum(d, 0), sq(d, 0);
  std::size_t count = 0;
  for (const auto* z : trajectories) {
    if (z->cols() != d) throw ShapeError("latent trajectories differ in width");
    for (std::size_t t = 0; t < z->rows(); ++t)
      for (std::size_t j = 0; j < d; ++j) sum[j] += (*z)(t, j);
    count += z->rows();
  }
  LatentStats s;
  s.mean.resize(d);
  s.std.resize(d);
  for (std::size_t j = 0; j < d; ++j) s.mean[j] = sum[j] / double(count);
  for (const auto* z : trajectories)
    for (std::size_t t = 0; t < z->rows(); ++t)
      for (std::size_t j = 0; j < d; ++j) sq[j] += ((*z)(t, j) - s.mean[j]) * ((*z)(t, j) - s.mean[j]);
  for (std::size_t j = 0; j < d; ++j) s.std[j] = std::sqrt(sq[j] / double(count));
  return s;
}

Tensor<float> LatentStats::normalize(const Tensor<float>& z) const {
  if (z.cols() != mean.size()) throw ShapeError("latent width does not match the normaliser");
  Tensor<float> out = z;
  for (std::size_t t = 0; t < z.rows(); ++t)
    for (std::size_t j = 0; j < z.cols(); ++j)
      out(t, j) = static_cast<float>((z(t, j) - mean[j]) / std::max(std[j], floor));
  return out;
}

Tensor<float> LatentStats::denormalize(const Tensor<float>& z) const {
  if (z.cols() != mean.size()) throw ShapeError("latent width does not match the normaliser");
  Tensor<float> out = z;
  for (std::size_t t = 0; t < z.rows(); ++t)
    for (std::size_t j = 0; j < z.cols(); ++j)
      out(t, j) = static_cast<float>(z(t, j) * std::max(std[j], floor) + mean[j]);
  return out;
}

// ---- losses ----

namespace {

template <typename T>
void check_steps(std::span<const Var<T>> pred, std::span<const Tensor<T>> target) {
  if (pred.empty()) throw ShapeError("empty latent sequence");
  if (pred.size() != target.size()) throw ShapeError("predicted and target sequences differ in length");
  for (std::size_t t = 0; t < pred.size(); ++t)
    if (pred[t].shape() != target[t].shape()) throw ShapeError("predicted and target steps differ in shape");
}

template <typename T>
Var<T> accumulate(Var<T> acc, Var<T> term) {
  return acc.valid() ? ad::add(acc, term) : term;
}

template <typename T>
std::vector<Tensor<T>> single_steps(const Tensor<T>& z) {
  std::vector<Tensor<T>> out;
  for (std::size_t t = 0; t < z.rows(); ++t) out.push_back(z.slice_rows(t, t + 1));
  return out;
}

}  // namespace

template <typename T>
Var<T> recon_loss(std::span<const Var<T>> pred, std::span<const Tensor<T>> target) {
  check_steps(pred, target);
  Tape<T>& tape = *pred.front().tape();
  Var<T> acc;
  for (std::size_t t = 0; t < pred.size(); ++t)
    acc = accumulate(acc, ad::sum(ad::square(ad::sub(pred[t], tape.constant(target[t])))));
  return ad::scale(acc, T(1) / static_cast<T>(pred.size() * pred.front().rows()));
}

template <typename T>
Var<T> shape_loss(std::span<const Var<T>> pred, std::span<const Tensor<T>> target) {
  check_steps(pred, target);
  Tape<T>& tape = *pred.front().tape();
  const std::size_t steps = pred.size(), batch = pred.front().rows(), d = pred.front().cols();
  Var<T> diff;
  for (std::size_t t = 0; t + 1 < steps; ++t) {
    Tensor<T> dt(target[t].shape());
    for (std::size_t i = 0; i < dt.size(); ++i) dt[i] = target[t + 1][i] - target[t][i];
    auto dp = ad::sub(pred[t + 1], pred[t]);
    diff = accumulate(diff, ad::sum(ad::square(ad::sub(dp, tape.constant(std::move(dt))))));
  }
  const T inv_steps = T(1) / static_cast<T>(steps);
  Var<T> mean_p;
  for (const auto& v : pred) mean_p = accumulate(mean_p, v);
  mean_p = ad::scale(mean_p, inv_steps);
  Var<T> var_p;
  for (const auto& v : pred) var_p = accumulate(var_p, ad::square(ad::sub(v, mean_p)));
  var_p = ad::scale(var_p, inv_steps);

  Tensor<T> mean_t = Tensor<T>::matrix(batch, d), var_t = Tensor<T>::matrix(batch, d);
  for (const auto& z : target)
    for (std::size_t i = 0; i < z.size(); ++i) mean_t[i] += z[i];
  for (auto& v : mean_t.values()) v *= inv_steps;
  for (const auto& z : target)
    for (std::size_t i = 0; i < z.size(); ++i) var_t[i] += (z[i] - mean_t[i]) * (z[i] - mean_t[i]);
  for (auto& v : var_t.values()) v *= inv_steps;

  auto var_term = ad::scale(ad::sum(ad::square(ad::sub(var_p, tape.constant(std::move(var_t))))),
                            T(0.5) / static_cast<T>(batch));
  if (!diff.valid()) return var_term;
  return ad::add(ad::scale(diff, T(1) / static_cast<T>((steps - 1) * batch)), var_term);
}

template <typename T>
double recon_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape() || pred.rows() == 0) throw ShapeError("latent sequences differ in shape");
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (double(pred[i]) - target[i]) * (double(pred[i]) - target[i]);
  return acc / double(pred.rows());
}

template <typename T>
double shape_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  Tape<T> tape;
  tape.set_grad_enabled(false);
  auto ps = single_steps(pred);
  auto ts = single_steps(target);
  std::vector<Var<T>> pv;
  for (auto& p : ps) pv.push_back(tape.constant(p));
  return double(shape_loss<T>(std::span<const Var<T>>(pv), std::span<const Tensor<T>>(ts)).value()[0]);
}

template <typename T>
std::vector<Tensor<T>> batch_steps(const std::vector<const Tensor<T>*>& sequences) {
  if (sequences.empty()) throw ShapeError("empty batch");
  const std::size_t steps = sequences.front()->rows(), d = sequences.front()->cols(), b = sequences.size();
  std::vector<Tensor<T>> out(steps, Tensor<T>::matrix(b, d));
  for (std::size_t k = 0; k < b; ++k) {
    if (sequences[k]->rows() != steps || sequences[k]->cols() != d) throw ShapeError("batch sequences differ in shape");
    for (std::size_t t = 0; t < steps; ++t) std::copy_n(sequences[k]->row(t).begin(), d, out[t].row(k).begin());
  }
  return out;
}

// ---- seq2seq ----

void Seq2SeqConfig::validate() const {
  if (latent_dim == 0 || hidden == 0) throw InvalidArgument("temporal model dimensions must be positive");
  if (horizon == 0) throw InvalidArgument("temporal horizon must be at least 1");
}

template <typename T>
Seq2SeqTemporalModel<T>::Seq2SeqTemporalModel(Seq2SeqConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.latent_dim, h = config_.hidden;
  compress_ = nn::LstmStack<T>("compress", {d, h, 1, true}, rng);
  summary_ = nn::Linear<T>("summary", 2 * h, d, rng);
  proj_ = nn::Linear<T>("proj", d + 1, d, rng);
  generator_ = nn::LstmStack<T>("generator", {d, h, 1, true}, rng);
  refiner_ = nn::LstmStack<T>("refiner", {2 * h, h, 1, false}, rng);
  head_ = nn::Mlp<T>("head", {{h, h, d}, nn::Activation::gelu, true}, rng);
}

template <typename T>
Var<T> Seq2SeqTemporalModel<T>::compress(Tape<T>& tape, std::span<const Var<T>> observed) {
  if (observed.empty()) throw ShapeError("observed window is empty");
  if (observed.front().cols() != config_.latent_dim) throw ShapeError("observed latent width mismatch");
  const std::size_t h = config_.hidden;
  auto out = compress_.forward(tape, observed);
  const Var<T> parts[] = {ad::slice_cols(out.back(), 0, h), ad::slice_cols(out.front(), h, 2 * h)};
  return summary_.forward(tape, ad::concat_cols<T>(parts));
}

template <typename T>
std::vector<Var<T>> Seq2SeqTemporalModel<T>::positional(Tape<T>& tape, Var<T> summary, std::size_t steps) {
  if (steps == 0) throw InvalidArgument("output length must be at least 1");
  const std::size_t b = summary.rows();
  std::vector<Var<T>> out;
  out.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const T pos = steps == 1 ? T(0) : static_cast<T>(t) / static_cast<T>(steps - 1);
    const Var<T> parts[] = {summary, tape.constant(Tensor<T>::matrix(b, 1, pos))};
    out.push_back(proj_.forward(tape, ad::concat_cols<T>(parts)));
  }
  return out;
}

template <typename T>
std::vector<Var<T>> Seq2SeqTemporalModel<T>::generate(Tape<T>& tape, std::span<const Var<T>> observed) {
  auto summary = compress(tape, observed);
  auto pos = positional(tape, summary, config_.horizon);
  auto g = generator_.forward(tape, pos);
  auto r = refiner_.forward(tape, g);
  std::vector<Var<T>> out;
  out.reserve(r.size());
  for (auto& v : r) out.push_back(head_.forward(tape, v));
  return out;
}

template <typename T>
Tensor<T> Seq2SeqTemporalModel<T>::compress(const Tensor<T>& observed) {
  Tape<T> tape;
  tape.set_grad_enabled(false);
  auto steps = nn::rows_as_steps(tape, observed);
  return compress(tape, steps).value();
}

template <typename T>
Tensor<T> Seq2SeqTemporalModel<T>::positional(const Tensor<T>& summary, std::size_t steps) {
  Tape<T> tape;
  tape.set_grad_enabled(false);
  auto out = positional(tape, tape.constant(summary), steps);
  return nn::steps_to_rows<T>(out);
}

template <typename T>
Tensor<T> Seq2SeqTemporalModel<T>::generate(const Tensor<T>& observed, std::size_t steps) {
  if (steps != config_.horizon)
    throw InvalidArgument("model was trained for " + std::to_string(config_.horizon) + " output steps, asked for " +
                          std::to_string(steps));
  Tape<T> tape;
  tape.set_grad_enabled(false);
  auto in = nn::rows_as_steps(tape, observed);
  auto out = generate(tape, in);
  return nn::steps_to_rows<T>(out);
}

template <typename T>
std::vector<Parameter<T>*> Seq2SeqTemporalModel<T>::parameters() {
  std::vector<Parameter<T>*> out = compress_.parameters();
  for (auto* p : summary_.parameters()) out.push_back(p);
  for (auto* p : proj_.parameters()) out.push_back(p);
  for (auto* p : generator_.parameters()) out.push_back(p);
  for (auto* p : refiner_.parameters()) out.push_back(p);
  for (auto* p : head_.parameters()) out.push_back(p);
  return out;
}

// ---- AR ----

void ArConfig::validate() const {
  if (latent_dim == 0 || hidden == 0 || layers == 0) throw InvalidArgument("AR model dimensions must be positive");
  if (window == 0) throw InvalidArgument("AR lookback must be at least 1");
}

template <typename T>
ARModel<T>::ARModel(ArConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  core_ = nn::LstmStack<T>("core", {config_.latent_dim, config_.hidden, config_.layers, true}, rng);
  head_ = nn::Mlp<T>("head", {{2 * config_.hidden, config_.hidden, config_.latent_dim}, nn::Activation::gelu, false}, rng);
}

template <typename T>
Var<T> ARModel<T>::step(Tape<T>& tape, std::span<const Var<T>> window) {
  if (window.size() != config_.window)
    throw ShapeError("AR window has " + std::to_string(window.size()) + " steps, expected " +
                     std::to_string(config_.window));
  auto out = core_.forward(tape, window);
  return head_.forward(tape, out.back());
}

template <typename T>
Tensor<T> ARModel<T>::ar_step(const Tensor<T>& window) {
  if (window.cols() != config_.latent_dim) throw ShapeError("AR window width mismatch");
  Tape<T> tape;
  tape.set_grad_enabled(false);
  auto steps = nn::rows_as_steps(tape, window);
  return step(tape, steps).value();
}

template <typename T>
Tensor<T> ARModel<T>::rollout(const Tensor<T>& seed_window, std::size_t steps) {
  const std::size_t w = config_.window, d = config_.latent_dim;
  if (seed_window.rows() != w || seed_window.cols() != d) throw ShapeError("seed window must be W x d_z");
  if (steps == 0) return Tensor<T>();
  Tensor<T> out = Tensor<T>::matrix(steps, d);
  Tensor<T> window = seed_window;
  for (std::size_t s = 0; s < steps; ++s) {
    auto next = ar_step(window);
    std::copy_n(next.data(), d, out.row(s).begin());
    std::copy(window.storage().begin() + d, window.storage().end(), window.storage().begin());
    std::copy_n(next.data(), d, window.row(w - 1).begin());
  }
  return out;
}

template <typename T>
std::vector<Parameter<T>*> ARModel<T>::parameters() {
  auto out = core_.parameters();
  for (auto* p : head_.parameters()) out.push_back(p);
  return out;
}

std::vector<ArPair> build_ar_dataset(const std::vector<const Tensor<float>*>& trajectories, std::size_t window) {
  if (window == 0) throw InvalidArgument("AR lookback must be at least 1");
  std::vector<ArPair> out;
  for (const auto* z : trajectories)
    for (std::size_t s = 0; s + window < z->rows(); ++s)
      out.push_back({z->slice_rows(s, s + window), z->slice_rows(s + window, s + window + 1)});
  return out;
}

// ---- training ----

namespace {

template <typename Model, typename Sample, typename LossFn>
shred::TrainHistory run_training(Model& model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                                 const TemporalTrainOptions& opts, LossFn batch_loss) {
  if (train.empty()) throw InvalidArgument("no training samples");
  const std::size_t batch = std::max<std::size_t>(1, std::min(opts.batch, train.size()));
  auto eval = [&](const std::vector<Sample>& set) {
    double acc = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < set.size(); i += batch) {
      std::vector<const Sample*> b;
      for (std::size_t j = i; j < std::min(set.size(), i + batch); ++j) b.push_back(&set[j]);
      Tape<float> tape;
      tape.set_grad_enabled(false);
      acc += double(batch_loss(tape, b).value()[0]) * double(b.size());
      n += b.size();
    }
    return acc / double(n);
  };
  const auto& monitor = val.empty() ? train : val;
  shred::TrainHistory hist;
  hist.best_val = eval(monitor);
  if (opts.epochs == 0) return hist;
  auto params = model.parameters();
  nn::Adam<float> adam(params, {.lr = opts.lr});
  auto best = nn::snapshot(params);
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < order.size(); i += batch) {
      std::vector<const Sample*> b;
      for (std::size_t j = i; j < std::min(order.size(), i + batch); ++j) b.push_back(&train[order[j]]);
      Tape<float> tape;
      auto loss = batch_loss(tape, b);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) throw NumericalError("temporal training loss is not finite at epoch " + std::to_string(epoch), epoch);
      total += lv * double(b.size());
      seen += b.size();
      tape.backward(loss);
      try {
        adam.step();
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")", epoch);
      }
      adam.zero_grad();
    }
    const double tl = total / double(seen);
    const double vl = val.empty() ? eval(train) : eval(val);
    if (!std::isfinite(vl)) throw NumericalError("temporal validation loss is not finite at epoch " + std::to_string(epoch), epoch);
    hist.train_loss.push_back(tl);
    hist.val_loss.push_back(vl);
    if (opts.on_epoch) opts.on_epoch(epoch, tl, vl);
    if (vl < hist.best_val) {
      hist.best_val = vl;
      hist.best_epoch = epoch;
      best = nn::snapshot(params);
    } else if (epoch - hist.best_epoch >= opts.patience) {
      hist.early_stopped = true;
      break;
    }
  }
  nn::restore(params, best);
  return hist;
}

Var<float> seq2seq_batch_loss(Seq2SeqTemporalModel<float>& model, Tape<float>& tape,
                              const std::vector<const LatentSample*>& b) {
  std::vector<const Tensor<float>*> obs, tgt;
  for (auto* s : b) {
    obs.push_back(&s->observed);
    tgt.push_back(&s->target);
  }
  auto obs_steps = batch_steps(obs);
  auto tgt_steps = batch_steps(tgt);
  std::vector<Var<float>> in;
  for (auto& s : obs_steps) in.push_back(tape.constant(std::move(s)));
  auto pred = model.generate(tape, in);
  std::span<const Var<float>> ps(pred);
  std::span<const Tensor<float>> ts(tgt_steps);
  auto r = ad::scale(recon_loss<float>(ps, ts), float(model.lambda_recon));
  if (model.lambda_shape == 0) return r;
  return ad::add(r, ad::scale(shape_loss<float>(ps, ts), float(model.lambda_shape)));
}

}  // namespace

shred::TrainHistory train_temporal(Seq2SeqTemporalModel<float>& model, const std::vector<LatentSample>& train,
                                   const std::vector<LatentSample>& val, const TemporalTrainOptions& opts) {
  for (const auto* set : {&train, &val})
    for (const auto& s : *set)
      if (s.target.rows() != model.config().horizon || s.target.cols() != model.config().latent_dim)
        throw ShapeError("latent sample does not match the temporal model horizon");
  return run_training(model, train, val, opts, [&](Tape<float>& tape, const std::vector<const LatentSample*>& b) {
    return seq2seq_batch_loss(model, tape, b);
  });
}

double evaluate_temporal(Seq2SeqTemporalModel<float>& model, const std::vector<LatentSample>& samples) {
  double acc = 0;
  for (const auto& s : samples) {
    Tape<float> tape;
    tape.set_grad_enabled(false);
    acc += seq2seq_batch_loss(model, tape, {&s}).value()[0];
  }
  return acc / double(samples.size());
}

shred::TrainHistory train_ar(ARModel<float>& model, const std::vector<ArPair>& train, const std::vector<ArPair>& val,
                             const TemporalTrainOptions& opts) {
  return run_training(model, train, val, opts, [&](Tape<float>& tape, const std::vector<const ArPair*>& b) {
    std::vector<const Tensor<float>*> win, nxt;
    for (auto* s : b) {
      win.push_back(&s->window);
      nxt.push_back(&s->next);
    }
    auto steps = batch_steps(win);
    std::vector<Var<float>> in;
    for (auto& s : steps) in.push_back(tape.constant(std::move(s)));
    auto pred = model.step(tape, in);
    auto target = batch_steps(nxt).front();
    return ad::scale(ad::sum(ad::square(ad::sub(pred, tape.constant(std::move(target))))),
                     1.0f / float(b.size()));
  });
}

// ---- persistence ----

namespace {

ordered_json stats_json(const std::optional<LatentStats>& s) {
  if (!s) return nullptr;
  return {{"mean", s->mean}, {"std", s->std}};
}

std::optional<LatentStats> stats_from(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  LatentStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  return s;
}

void write_model(const std::string& dir, ordered_json j, const std::vector<Parameter<float>*>& params) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  j["weights_file"] = "weights.bin";
  j["weights"] = nn::save_weights((fs::path(dir) / "weights.bin").string(), params);
  std::ofstream out(fs::path(dir) / "model.json");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing model.json in " + dir);
}

ordered_json read_model(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "model.json");
  if (!in) throw IoError("cannot open " + (fs::path(dir) / "model.json").string());
  try {
    return ordered_json::parse(in);
  } catch (const std::exception& e) {
    throw IoError("malformed model.json in " + dir + ": " + e.what());
  }
}

}  // namespace

void save_temporal(const Seq2SeqTemporalModel<float>& model_in, const std::string& dir) {
  auto& model = const_cast<Seq2SeqTemporalModel<float>&>(model_in);
  const auto& c = model.config();
  ordered_json j;
  j["format"] = "lapis-model";
  j["version"] = 1;
  j["kind"] = "temporal";
  j["temporal"] = {{"architecture", "seq2seq"},
                   {"direction", to_string(c.direction)},
                   {"latent_dim", c.latent_dim},
                   {"hidden", c.hidden},
                   {"window", c.window},
                   {"horizon", c.horizon},
                   {"t_out_policy", "fixed"},
                   {"lambda_recon", model.lambda_recon},
                   {"lambda_shape", model.lambda_shape},
                   {"normalizer", stats_json(model.stats)}};
  write_model(dir, j, model.parameters());
}

void save_ar(const ARModel<float>& model_in, const std::string& dir) {
  auto& model = const_cast<ARModel<float>&>(model_in);
  const auto& c = model.config();
  ordered_json j;
  j["format"] = "lapis-model";
  j["version"] = 1;
  j["kind"] = "temporal";
  j["temporal"] = {{"architecture", "ar"},
                   {"direction", "forward"},
                   {"latent_dim", c.latent_dim},
                   {"hidden", c.hidden},
                   {"layers", c.layers},
                   {"window", c.window},
                   {"t_out_policy", "open"},
                   {"normalizer", stats_json(model.stats)}};
  write_model(dir, j, model.parameters());
}

std::string temporal_kind(const std::string& dir) {
  auto j = read_model(dir);
  try {
    if (j.at("kind") != "temporal") throw IoError("model in " + dir + " is not a temporal model");
    return j.at("temporal").at("architecture").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid model.json in " + dir + ": " + e.what());
  }
}

Seq2SeqTemporalModel<float> load_seq2seq_temporal(const std::string& dir) {
  auto j = read_model(dir);
  try {
    const auto& t = j.at("temporal");
    if (t.at("architecture") != "seq2seq") throw IoError("model in " + dir + " is not a seq2seq temporal model");
    Seq2SeqConfig c;
    c.direction = direction_from_string(t.at("direction").get<std::string>());
    c.latent_dim = t.at("latent_dim").get<std::size_t>();
    c.hidden = t.at("hidden").get<std::size_t>();
    c.window = t.at("window").get<std::size_t>();
    c.horizon = t.at("horizon").get<std::size_t>();
    Seq2SeqTemporalModel<float> m(c, 0);
    m.lambda_recon = t.at("lambda_recon").get<double>();
    m.lambda_shape = t.at("lambda_shape").get<double>();
    m.stats = stats_from(t.at("normalizer"));
    nn::load_weights((fs::path(dir) / j.at("weights_file").get<std::string>()).string(), j.at("weights"),
                     m.parameters());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid model.json in " + dir + ": " + e.what());
  }
}

ARModel<float> load_ar(const std::string& dir) {
  auto j = read_model(dir);
  try {
    const auto& t = j.at("temporal");
    if (t.at("architecture") != "ar") throw IoError("model in " + dir + " is not an AR model");
    ArConfig c;
    c.latent_dim = t.at("latent_dim").get<std::size_t>();
    c.hidden = t.at("hidden").get<std::size_t>();
    c.layers = t.at("layers").get<std::size_t>();
    c.window = t.at("window").get<std::size_t>();
    ARModel<float> m(c, 0);
    m.stats = stats_from(t.at("normalizer"));
    nn::load_weights((fs::path(dir) / j.at("weights_file").get<std::string>()).string(), j.at("weights"),
                     m.parameters());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid model.json in " + dir + ": " + e.what());
  }
}

template Tensor<float> pad_terminal(const Tensor<float>&, std::size_t);
template Tensor<double> pad_terminal(const Tensor<double>&, std::size_t);
template Var<float> recon_loss(std::span<const Var<float>>, std::span<const Tensor<float>>);
template Var<double> recon_loss(std::span<const Var<double>>, std::span<const Tensor<double>>);
template Var<float> shape_loss(std::span<const Var<float>>, std::span<const Tensor<float>>);
template Var<double> shape_loss(std::span<const Var<double>>, std::span<const Tensor<double>>);
template double recon_loss(const Tensor<float>&, const Tensor<float>&);
template double recon_loss(const Tensor<double>&, const Tensor<double>&);
template double shape_loss(const Tensor<float>&, const Tensor<float>&);
template double shape_loss(const Tensor<double>&, const Tensor<double>&);
template std::vector<Tensor<float>> batch_steps(const std::vector<const Tensor<float>*>&);
template std::vector<Tensor<double>> batch_steps(const std::vector<const Tensor<double>*>&);
template class Seq2SeqTemporalModel<float>;
template class Seq2SeqTemporalModel<double>;
template class ARModel<float>;
template class ARModel<double>;

}  // namespace lapis::temporal
