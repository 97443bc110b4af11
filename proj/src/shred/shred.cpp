#include "shred/shred.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "core/errors.hpp"
#include "nn/adam.hpp"
#include "nn/serialize.hpp"

namespace lapis::shred {

namespace fs = std::filesystem;

std::string to_string(Mode m) { return m == Mode::frame ? "frame" : "seq2seq"; }

Mode mode_from_string(const std::string& s) {
  if (s == "frame") return Mode::frame;
  if (s == "seq2seq") return Mode::seq2seq;
  throw InvalidArgument("unknown SHRED mode '" + s + "' (expected frame or seq2seq)");
}

ShredConfig ShredConfig::defaults(Mode mode, std::size_t sensors, std::size_t output_dim) {
  ShredConfig c;
  c.mode = mode;
  c.sensors = sensors;
  c.output_dim = output_dim;
  c.hidden = 64;
  c.layers = mode == Mode::frame ? 2 : 1;
  c.lag = 10;
  return c;
}

void ShredConfig::validate() const {
  if (sensors == 0 || output_dim == 0 || hidden == 0 || layers == 0)
    throw InvalidArgument("SHRED dimensions must be positive");
  if (mode == Mode::frame && lag == 0) throw InvalidArgument("lag must be at least 1");
}

template <typename T>
ShredModel<T>::ShredModel(ShredConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  encoder_ = nn::LstmStack<T>(
      "encoder", {config_.sensors, config_.hidden, config_.layers, config_.mode == Mode::seq2seq}, rng);
  typename nn::Mlp<T>::Config dc;
  dc.widths.push_back(config_.latent_dim());
  for (auto w : config_.decoder_hidden) dc.widths.push_back(w);
  dc.widths.push_back(config_.output_dim);
  dc.activation = config_.activation;
  decoder_ = nn::Mlp<T>("decoder", dc, rng);
}

template <typename T>
std::vector<Tensor<T>> ShredModel<T>::lag_steps(const Tensor<T>& series) const {
  const std::size_t rows = series.rows(), p = series.cols(), lag = config_.lag;
  std::vector<Tensor<T>> steps;
  steps.reserve(lag);
  for (std::size_t k = 0; k < lag; ++k) {
    Tensor<T> x = Tensor<T>::matrix(rows, p);
    for (std::size_t t = 0; t < rows; ++t) {
      const std::ptrdiff_t src = std::max<std::ptrdiff_t>(
          0, static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(lag) + 1 + static_cast<std::ptrdiff_t>(k));
      std::copy_n(series.row(static_cast<std::size_t>(src)).begin(), p, x.row(t).begin());
    }
    steps.push_back(std::move(x));
  }
  return steps;
}

template <typename T>
Var<T> ShredModel<T>::encode_steps(Tape<T>& tape, std::span<const Tensor<T>> steps) {
  if (config_.mode != Mode::frame) throw StateError("encode_steps requires a frame-mode model");
  if (steps.size() != config_.lag) throw ShapeError("expected one step matrix per lag");
  std::vector<Var<T>> vars;
  vars.reserve(steps.size());
  for (const auto& s : steps) {
    if (s.cols() != config_.sensors || s.rows() != steps.front().rows()) throw ShapeError("lag step shape mismatch");
    vars.push_back(tape.constant(s));
  }
  return encoder_.forward(tape, vars).back();
}

template <typename T>
Var<T> ShredModel<T>::encode(Tape<T>& tape, const Tensor<T>& series) {
  if (series.rank() != 2 || series.cols() != config_.sensors)
    throw ShapeError("sensor series must have " + std::to_string(config_.sensors) + " columns");
  if (series.rows() == 0) throw ShapeError("empty sensor series");
  if (config_.mode == Mode::frame) {
    const auto steps = lag_steps(series);
    return encode_steps(tape, steps);
  }
  auto steps = nn::rows_as_steps(tape, series);
  auto out = encoder_.forward(tape, steps);
  return ad::concat_rows<T>(out);
}

template <typename T>
Var<T> ShredModel<T>::decode(Tape<T>& tape, Var<T> latents) {
  if (latents.cols() != latent_dim()) throw ShapeError("latent width does not match the decoder");
  return decoder_.forward(tape, latents);
}

template <typename T>
Tensor<T> ShredModel<T>::encode_frame(const Tensor<T>& window) {
  if (config_.mode != Mode::frame) throw StateError("encode_frame requires a frame-mode model");
  if (window.rows() == 0 || window.cols() != config_.sensors) throw ShapeError("window must be l x p");
  Tape<T> tape;
  tape.set_grad_enabled(false);
  auto steps = nn::rows_as_steps(tape, window);
  return encoder_.forward(tape, steps).back().value();
}

template <typename T>
Tensor<T> ShredModel<T>::encode_sequence(const Tensor<T>& series) {
  if (config_.mode != Mode::seq2seq) throw StateError("encode_sequence requires a seq2seq model");
  Tape<T> tape;
  tape.set_grad_enabled(false);
  return encode(tape, series).value();
}

template <typename T>
Tensor<T> ShredModel<T>::encode(const Tensor<T>& series) {
  Tape<T> tape;
  tape.set_grad_enabled(false);
  return encode(tape, series).value();
}

template <typename T>
Tensor<T> ShredModel<T>::decode(const Tensor<T>& latents) {
  Tensor<T> z = latents;
  if (z.rank() == 1) z.reshape({1, z.size()});
  Tape<T> tape;
  tape.set_grad_enabled(false);
  return decode(tape, tape.constant(std::move(z))).value();
}

template <typename T>
std::vector<Parameter<T>*> ShredModel<T>::parameters() {
  auto out = encoder_.parameters();
  for (auto* p : decoder_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
void ShredModel<T>::freeze() {
  for (auto* p : parameters()) p->frozen = true;
  frozen_ = true;
}

template <typename T>
Var<T> shred_loss(Var<T> pred, const Tensor<T>& target, const std::vector<T>& weights) {
  if (pred.shape() != target.shape()) throw ShapeError("prediction and target shapes differ");
  auto diff = ad::sub(pred, pred.tape()->constant(target));
  auto sq = ad::square(diff);
  if (!weights.empty()) {
    if (weights.size() != target.cols()) throw ShapeError("loss weights must have one entry per cell");
    Tensor<T> w({1, weights.size()}, weights);
    sq = ad::mul_row(sq, pred.tape()->constant(std::move(w)));
  }
  return ad::scale(ad::sum(sq), T(1) / static_cast<T>(target.rows()));
}

template <typename T>
double shred_loss(const Tensor<T>& pred, const Tensor<T>& target, const std::vector<T>& weights) {
  if (pred.shape() != target.shape()) throw ShapeError("prediction and target shapes differ");
  if (!weights.empty() && weights.size() != target.cols()) throw ShapeError("loss weights must have one entry per cell");
  const std::size_t n = target.cols();
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = double(pred[i]) - double(target[i]);
    acc += (weights.empty() ? 1.0 : double(weights[i % n])) * e * e;
  }
  return acc / static_cast<double>(target.rows());
}

template <typename T>
Tensor<T> augment_training_padding(const Tensor<T>& series, std::size_t padding) {
  if (padding == 0) return series;
  if (series.rows() == 0) throw ShapeError("cannot pad an empty series");
  const std::size_t rows = series.rows(), d = series.cols();
  Tensor<T> out = Tensor<T>::matrix(rows + padding, d);
  std::copy(series.storage().begin(), series.storage().end(), out.storage().begin());
  for (std::size_t r = rows; r < rows + padding; ++r)
    std::copy_n(series.row(rows - 1).begin(), d, out.row(r).begin());
  return out;
}

std::vector<float> mask_weights(const sim::FieldSequence& field) {
  const auto fm = field.frame_mask();
  std::vector<float> w(field.frame_size(), 1.0f);
  for (std::size_t i = 0; i < fm.size(); ++i)
    if (fm[i]) w[i] = 0.0f;
  return w;
}

namespace {

struct Sample {
  Tensor<float> series;
  Tensor<float> target;
};

double mean_loss(ShredModel<float>& model, const std::vector<Sample>& samples, const std::vector<float>& w) {
  double acc = 0;
  for (const auto& s : samples) acc += shred_loss(model.reconstruct(s.series), s.target, w);
  return acc / static_cast<double>(samples.size());
}

}  // namespace

TrainHistory train_shred(ShredModel<float>& model, const sensing::EnsembleDataset& ds, const TrainOptions& opts) {
  if (!ds.normalized()) throw StateError("SHRED training expects a normalised dataset");
  if (model.frozen()) throw StateError("cannot train a frozen SHRED model");
  if (ds.layout.p() != model.config().sensors || ds.frame_size() != model.config().output_dim)
    throw ShapeError("dataset does not match the SHRED dimensions");
  std::vector<Sample> train, val;
  for (const auto& m : ds.members) {
    if (m.split == sensing::Split::truth) continue;
    Sample s{augment_training_padding(m.sensors, opts.padding), augment_training_padding(m.field.frames, opts.padding)};
    (m.split == sensing::Split::train ? train : val).push_back(std::move(s));
  }
  if (train.empty()) throw InvalidArgument("dataset has no training members");
  const std::vector<Sample>& monitor = val.empty() ? train : val;

  TrainHistory hist;
  if (opts.epochs == 0) {
    hist.best_val = mean_loss(model, monitor, opts.weights);
    return hist;
  }
  auto params = model.parameters();
  nn::Adam<float> adam(params, {.lr = opts.lr});
  hist.best_val = mean_loss(model, monitor, opts.weights);
  auto best = nn::snapshot(params);
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  auto optimize = [&](Tape<float>& tape, Var<float> loss, std::size_t epoch) {
    const double lv = loss.value()[0];
    if (!std::isfinite(lv)) throw NumericalError("SHRED training loss is not finite at epoch " + std::to_string(epoch), epoch);
    tape.backward(loss);
    try {
      adam.step();
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")", epoch);
    }
    adam.zero_grad();
    return lv;
  };

  // Frame mini-batches: every (member, frame) pair is a sample.
  const bool framewise = opts.batch > 0 && model.config().mode == Mode::frame;
  std::vector<std::vector<Tensor<float>>> member_steps;
  std::vector<std::pair<std::size_t, std::size_t>> frames;
  if (framewise) {
    for (std::size_t k = 0; k < train.size(); ++k) {
      member_steps.push_back(model.lag_steps(train[k].series));
      for (std::size_t t = 0; t < train[k].series.rows(); ++t) frames.emplace_back(k, t);
    }
  }
  const std::size_t lag = model.config().lag, p = model.config().sensors, out_dim = model.config().output_dim;

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    double total = 0;
    if (framewise) {
      std::shuffle(frames.begin(), frames.end(), rng);
      for (std::size_t b0 = 0; b0 < frames.size(); b0 += opts.batch) {
        const std::size_t n = std::min(opts.batch, frames.size() - b0);
        std::vector<Tensor<float>> steps(lag, Tensor<float>::matrix(n, p));
        Tensor<float> target = Tensor<float>::matrix(n, out_dim);
        for (std::size_t r = 0; r < n; ++r) {
          const auto [k, t] = frames[b0 + r];
          for (std::size_t j = 0; j < lag; ++j)
            std::copy_n(member_steps[k][j].row(t).begin(), p, steps[j].row(r).begin());
          std::copy_n(train[k].target.row(t).begin(), out_dim, target.row(r).begin());
        }
        Tape<float> tape;
        auto pred = model.decode(tape, model.encode_steps(tape, steps));
        total += optimize(tape, shred_loss(pred, target, opts.weights), epoch) * static_cast<double>(n);
      }
      total *= static_cast<double>(train.size()) / static_cast<double>(frames.size());
    } else {
      std::shuffle(order.begin(), order.end(), rng);
      for (auto k : order) {
        Tape<float> tape;
        auto pred = model.decode(tape, model.encode(tape, train[k].series));
        total += optimize(tape, shred_loss(pred, train[k].target, opts.weights), epoch);
      }
    }
    const double tl = total / static_cast<double>(train.size());
    const double vl = val.empty() ? mean_loss(model, train, opts.weights) : mean_loss(model, val, opts.weights);
    if (!std::isfinite(vl)) throw NumericalError("SHRED validation loss is not finite at epoch " + std::to_string(epoch), epoch);
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

void save_shred(const ShredModel<float>& model_in, const std::string& dir) {
  auto& model = const_cast<ShredModel<float>&>(model_in);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const auto& c = model.config();
  nlohmann::ordered_json j;
  j["format"] = "lapis-model";
  j["version"] = 1;
  j["kind"] = "shred";
  j["architecture"] = {{"mode", to_string(c.mode)},
                       {"sensors", c.sensors},
                       {"output_dim", c.output_dim},
                       {"hidden", c.hidden},
                       {"layers", c.layers},
                       {"lag", c.lag},
                       {"decoder_hidden", c.decoder_hidden},
                       {"activation", nn::to_string(c.activation)},
                       {"latent_dim", c.latent_dim()}};
  j["frozen"] = model.frozen();
  if (model.normalization)
    j["normalization"] = {{"min", model.normalization->min}, {"max", model.normalization->max}};
  else
    j["normalization"] = nullptr;
  j["sensor_indices"] = model.sensor_indices;
  j["weights_file"] = "weights.bin";
  j["weights"] = nn::save_weights((fs::path(dir) / "weights.bin").string(), model.parameters());
  std::ofstream out(fs::path(dir) / "model.json");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing model.json in " + dir);
}

ShredModel<float> load_shred(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "model.json");
  if (!in) throw IoError("cannot open " + (fs::path(dir) / "model.json").string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
    if (j.at("kind") != "shred") throw IoError("model in " + dir + " is not a SHRED model");
    const auto& a = j.at("architecture");
    ShredConfig c;
    c.mode = mode_from_string(a.at("mode").get<std::string>());
    c.sensors = a.at("sensors").get<std::size_t>();
    c.output_dim = a.at("output_dim").get<std::size_t>();
    c.hidden = a.at("hidden").get<std::size_t>();
    c.layers = a.at("layers").get<std::size_t>();
    c.lag = a.at("lag").get<std::size_t>();
    c.decoder_hidden = a.at("decoder_hidden").get<std::vector<std::size_t>>();
    c.activation = nn::activation_from_string(a.at("activation").get<std::string>());
    ShredModel<float> model(c, 0);
    nn::load_weights((fs::path(dir) / j.at("weights_file").get<std::string>()).string(), j.at("weights"),
                     model.parameters());
    if (!j.at("normalization").is_null()) {
      sensing::Normalization n;
      n.min = j["normalization"].at("min").get<std::vector<double>>();
      n.max = j["normalization"].at("max").get<std::vector<double>>();
      model.normalization = n;
    }
    model.sensor_indices = j.at("sensor_indices").get<std::vector<std::size_t>>();
    if (j.at("frozen").get<bool>()) model.freeze();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid model.json in " + dir + ": " + e.what());
  }
}

template class ShredModel<float>;
template class ShredModel<double>;
template Var<float> shred_loss(Var<float>, const Tensor<float>&, const std::vector<float>&);
template Var<double> shred_loss(Var<double>, const Tensor<double>&, const std::vector<double>&);
template double shred_loss(const Tensor<float>&, const Tensor<float>&, const std::vector<float>&);
template double shred_loss(const Tensor<double>&, const Tensor<double>&, const std::vector<double>&);
template Tensor<float> augment_training_padding(const Tensor<float>&, std::size_t);
template Tensor<double> augment_training_padding(const Tensor<double>&, std::size_t);

}  // namespace lapis::shred
