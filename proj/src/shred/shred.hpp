#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/autograd.hpp"
#include "nn/layers.hpp"
#include "sensing/dataset.hpp"

namespace lapis::shred {

enum class Mode { frame, seq2seq };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct ShredConfig {
  Mode mode = Mode::seq2seq;
  std::size_t sensors = 3;      // p
  std::size_t output_dim = 1;   // n, full frame width
  std::size_t hidden = 64;      // d_h
  std::size_t layers = 1;
  std::size_t lag = 10;         // frame mode only
  std::vector<std::size_t> decoder_hidden{350, 350};
  nn::Activation activation = nn::Activation::gelu;

  /// frame: 2-layer LSTM; seq2seq: 1-layer BiLSTM. Both with d_h = 64.
  static ShredConfig defaults(Mode mode, std::size_t sensors, std::size_t output_dim);
  std::size_t latent_dim() const { return mode == Mode::seq2seq ? 2 * hidden : hidden; }
  void validate() const;
};

/// LSTM encoder plus shallow MLP decoder.
template <typename T>
class ShredModel {
 public:
  ShredModel() = default;
  ShredModel(ShredConfig config, std::uint64_t seed);

  const ShredConfig& config() const { return config_; }
  std::size_t latent_dim() const { return config_.latent_dim(); }

  /// Differentiable paths. `series` is rows x p; the result is rows x d_z.
  /// Frame mode encodes the lag window ending at every row.
  Var<T> encode(Tape<T>& tape, const Tensor<T>& series);
  Var<T> decode(Tape<T>& tape, Var<T> latents);
  /// Frame mode: latents of B explicit lag windows given as `lag` step
  /// matrices of B x p, oldest step first.
  Var<T> encode_steps(Tape<T>& tape, std::span<const Tensor<T>> steps);
  /// The lag step matrices encode() builds for a series, first row replicated
  /// before the series start.
  std::vector<Tensor<T>> lag_steps(const Tensor<T>& series) const;

  /// Last hidden state over one l x p window (frame mode).
  Tensor<T> encode_frame(const Tensor<T>& window);
  /// Per-step BiLSTM output (seq2seq mode).
  Tensor<T> encode_sequence(const Tensor<T>& series);
  /// Mode dispatch: lag windows in frame mode, full pass in seq2seq.
  Tensor<T> encode(const Tensor<T>& series);
  Tensor<T> decode(const Tensor<T>& latents);
  Tensor<T> reconstruct(const Tensor<T>& series) { return decode(encode(series)); }

  std::vector<Parameter<T>*> parameters();
  void freeze();
  bool frozen() const { return frozen_; }

  nn::LstmStack<T>& encoder() { return encoder_; }
  nn::Mlp<T>& decoder() { return decoder_; }

  /// Carried with the model so deployments can map physical sensor values.
  std::optional<sensing::Normalization> normalization;
  std::vector<std::size_t> sensor_indices;

 private:
  ShredConfig config_;
  nn::LstmStack<T> encoder_;
  nn::Mlp<T> decoder_;
  bool frozen_ = false;
};

/// (1/R) sum_t sum_i w_i (pred - target)^2 over the R rows. Empty weights
/// mean w = 1.
template <typename T>
Var<T> shred_loss(Var<T> pred, const Tensor<T>& target, const std::vector<T>& weights);
template <typename T>
double shred_loss(const Tensor<T>& pred, const Tensor<T>& target, const std::vector<T>& weights);

/// Appends L copies of the last row.
template <typename T>
Tensor<T> augment_training_padding(const Tensor<T>& series, std::size_t padding);

struct TrainOptions {
  std::size_t epochs = 300;
  double lr = 1e-3;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  std::size_t padding = 0;       // training-time terminal padding L (0: off)
  std::size_t batch = 0;         // frame mode: frames per step; 0: one member per step
  std::vector<float> weights;    // per output cell; empty: all ones
  std::function<void(std::size_t epoch, double train, double val)> on_epoch;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;  // 0: initial weights
  double best_val = 0;
  bool early_stopped = false;
};

/// One member per optimizer step, or in frame mode with batch > 0 shuffled
/// mini-batches of frames drawn across members. The weights with the
/// lowest validation loss are kept. A non-finite loss throws NumericalError
/// carrying the epoch index.
TrainHistory train_shred(ShredModel<float>& model, const sensing::EnsembleDataset& ds, const TrainOptions& opts);

/// Per-cell loss weights: 0 inside the mask, 1 elsewhere.
std::vector<float> mask_weights(const sim::FieldSequence& field);

void save_shred(const ShredModel<float>& model, const std::string& dir);
ShredModel<float> load_shred(const std::string& dir);

}  // namespace lapis::shred
