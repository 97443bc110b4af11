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
#include "shred/shred.hpp"

namespace lapis::temporal {

enum class Direction { backward, forward };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

// ---- static terminal padding ----

/// L identical rows, each equal to `terminal` (1 x p or length p).
template <typename T>
Tensor<T> pad_terminal(const Tensor<T>& terminal, std::size_t padding);

/// Last latent of the frozen encoder over the pseudo-sequence, 1 x d_z.
Tensor<float> encode_padded_terminal(shred::ShredModel<float>& model, const Tensor<float>& pad);

// ---- latent normalisation ----

/// Per-dimension z-score. Standard deviations are floored at 1e-8.
struct LatentStats {
  std::vector<double> mean;
  std::vector<double> std;

  static constexpr double floor = 1e-8;
  static LatentStats fit(const std::vector<const Tensor<float>*>& trajectories);
  Tensor<float> normalize(const Tensor<float>& z) const;
  Tensor<float> denormalize(const Tensor<float>& z) const;
};

// ---- losses ----

/// Steps are B x d; losses average the per-sequence value over the batch.
/// recon: (1/T) sum_t |z^_t - z_t|^2.
template <typename T>
Var<T> recon_loss(std::span<const Var<T>> pred, std::span<const Tensor<T>> target);
/// shape: (1/(T-1)) sum_t |dz^_t - dz_t|^2 + 1/2 |Var(Z^) - Var(Z)|^2, the
/// variance taken per latent dimension over time (population).
template <typename T>
Var<T> shape_loss(std::span<const Var<T>> pred, std::span<const Tensor<T>> target);

/// Single-sequence forms on T x d tensors.
template <typename T>
double recon_loss(const Tensor<T>& pred, const Tensor<T>& target);
template <typename T>
double shape_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Per-step views of a batch of equally long T x d sequences: step t is B x d.
template <typename T>
std::vector<Tensor<T>> batch_steps(const std::vector<const Tensor<T>*>& sequences);

// ---- seq2seq generator ----

struct Seq2SeqConfig {
  std::size_t latent_dim = 1;   // d_z
  std::size_t hidden = 64;      // d_h^B, shared by every recurrent stage
  std::size_t window = 9;       // W; the observed window holds W + 1 latents
  std::size_t horizon = 1;      // T_out
  Direction direction = Direction::backward;
  void validate() const;
};

template <typename T>
class Seq2SeqTemporalModel {
 public:
  Seq2SeqTemporalModel() = default;
  Seq2SeqTemporalModel(Seq2SeqConfig config, std::uint64_t seed);

  const Seq2SeqConfig& config() const { return config_; }

  /// Fixed-width summary of the observed steps, B x d_z.
  Var<T> compress(Tape<T>& tape, std::span<const Var<T>> observed);
  /// Step t is Proj([summary ; t/(T_out-1)]); position 0 when T_out = 1.
  std::vector<Var<T>> positional(Tape<T>& tape, Var<T> summary, std::size_t steps);
  /// All T_out latents in physical-time order.
  std::vector<Var<T>> generate(Tape<T>& tape, std::span<const Var<T>> observed);

  Tensor<T> compress(const Tensor<T>& observed);
  Tensor<T> positional(const Tensor<T>& summary, std::size_t steps);
  /// Rejects any T_out other than the trained horizon.
  Tensor<T> generate(const Tensor<T>& observed, std::size_t steps);

  std::vector<Parameter<T>*> parameters();

  /// Applied by the pipeline around generate().
  std::optional<LatentStats> stats;
  double lambda_recon = 1.0;
  double lambda_shape = 0.1;

 private:
  Seq2SeqConfig config_;
  nn::LstmStack<T> compress_;
  nn::Linear<T> summary_;
  nn::Linear<T> proj_;
  nn::LstmStack<T> generator_;
  nn::LstmStack<T> refiner_;
  nn::Mlp<T> head_;
};

// ---- autoregressive model ----

struct ArConfig {
  std::size_t latent_dim = 1;
  std::size_t hidden = 64;
  std::size_t layers = 1;
  std::size_t window = 10;  // lookback W
  void validate() const;
};

template <typename T>
class ARModel {
 public:
  ARModel() = default;
  ARModel(ArConfig config, std::uint64_t seed);

  const ArConfig& config() const { return config_; }

  /// B x d_z prediction from W steps of B x d_z.
  Var<T> step(Tape<T>& tape, std::span<const Var<T>> window);
  /// W x d_z in, 1 x d_z out (normalised space).
  Tensor<T> ar_step(const Tensor<T>& window);
  /// Feeds each prediction back through the sliding window. steps x d_z;
  /// an empty tensor when steps is 0.
  Tensor<T> rollout(const Tensor<T>& seed_window, std::size_t steps);

  std::vector<Parameter<T>*> parameters();

  std::optional<LatentStats> stats;

 private:
  ArConfig config_;
  nn::LstmStack<T> core_;
  nn::Mlp<T> head_;
};

struct ArPair {
  Tensor<float> window;  // W x d_z
  Tensor<float> next;    // 1 x d_z
};

/// Every valid position of every trajectory: T_k + 1 - W pairs each.
std::vector<ArPair> build_ar_dataset(const std::vector<const Tensor<float>*>& trajectories, std::size_t window);

// ---- training ----

struct LatentSample {
  Tensor<float> observed;  // (W+1) x d_z
  Tensor<float> target;    // T_out x d_z
};

struct TemporalTrainOptions {
  std::size_t epochs = 300;
  double lr = 1e-3;
  std::size_t patience = 50;
  std::size_t batch = 1;
  std::uint64_t seed = 0;
  std::function<void(std::size_t epoch, double train, double val)> on_epoch;
};

shred::TrainHistory train_temporal(Seq2SeqTemporalModel<float>& model, const std::vector<LatentSample>& train,
                                   const std::vector<LatentSample>& val, const TemporalTrainOptions& opts);

shred::TrainHistory train_ar(ARModel<float>& model, const std::vector<ArPair>& train,
                             const std::vector<ArPair>& val, const TemporalTrainOptions& opts);

/// Mean combined loss over samples, no gradients.
double evaluate_temporal(Seq2SeqTemporalModel<float>& model, const std::vector<LatentSample>& samples);

// ---- persistence ----

void save_temporal(const Seq2SeqTemporalModel<float>& model, const std::string& dir);
Seq2SeqTemporalModel<float> load_seq2seq_temporal(const std::string& dir);
void save_ar(const ARModel<float>& model, const std::string& dir);
ARModel<float> load_ar(const std::string& dir);
/// "seq2seq" or "ar", read from model.json.
std::string temporal_kind(const std::string& dir);

}  // namespace lapis::temporal
