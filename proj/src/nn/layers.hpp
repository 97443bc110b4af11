#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "core/autograd.hpp"

namespace lapis::nn {

enum class Activation { none, tanh, gelu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);

  Var<T> forward(Tape<T>& tape, Var<T> x);
  std::vector<Parameter<T>*> parameters() { return {&weight, &bias}; }

  std::size_t in_features() const { return weight.value.rows(); }
  std::size_t out_features() const { return weight.value.cols(); }

  Parameter<T> weight;  // in x out
  Parameter<T> bias;    // 1 x out
};

/// Affine layers; every layer but the last is followed by an optional layer
/// normalization (learned gain and bias) and the activation.
template <typename T>
class Mlp {
 public:
  struct Config {
    std::vector<std::size_t> widths;  // input, hidden..., output
    Activation activation = Activation::gelu;
    bool layer_norm = false;
  };

  Mlp() = default;
  Mlp(const std::string& name, Config config, std::mt19937_64& rng);

  Var<T> forward(Tape<T>& tape, Var<T> x);
  Tensor<T> forward(const Tensor<T>& x);
  std::vector<Parameter<T>*> parameters();

  const Config& config() const { return config_; }
  std::size_t input_dim() const { return config_.widths.front(); }
  std::size_t output_dim() const { return config_.widths.back(); }

 private:
  Config config_;
  std::vector<Linear<T>> layers_;
  std::vector<Parameter<T>> gains_;
  std::vector<Parameter<T>> shifts_;
};

/// One LSTM direction. Gate layout along the 4h axis: input, forget, cell,
/// output. Weights act on the concatenation [x_t, h_{t-1}].
template <typename T>
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(const std::string& name, std::size_t input_dim, std::size_t hidden_dim,
            std::mt19937_64& rng);

  /// `seq[t]` is batch x input_dim. With `reverse` the scan runs from the
  /// last step to the first; outputs stay aligned with their input step.
  std::vector<Var<T>> forward(Tape<T>& tape, std::span<const Var<T>> seq, bool reverse);
  std::vector<Parameter<T>*> parameters() { return {&weight, &bias}; }

  std::size_t input_dim() const { return weight.value.rows() - hidden_dim(); }
  std::size_t hidden_dim() const { return weight.value.cols() / 4; }

  Parameter<T> weight;  // (input + hidden) x 4 hidden
  Parameter<T> bias;    // 1 x 4 hidden
};

template <typename T>
class LstmStack {
 public:
  struct Config {
    std::size_t input_dim = 1;
    std::size_t hidden_dim = 1;
    std::size_t num_layers = 1;
    bool bidirectional = false;
  };

  LstmStack() = default;
  LstmStack(const std::string& name, Config config, std::mt19937_64& rng);

  /// Per-step hidden states of the top layer. Bidirectional stacks emit
  /// [forward_t, backward_t] for every step.
  std::vector<Var<T>> forward(Tape<T>& tape, std::span<const Var<T>> seq);
  /// Single sequence, L x input_dim in, L x output_dim out.
  Tensor<T> forward(const Tensor<T>& seq);
  std::vector<Parameter<T>*> parameters();

  const Config& config() const { return config_; }
  std::size_t output_dim() const {
    return config_.bidirectional ? 2 * config_.hidden_dim : config_.hidden_dim;
  }

 private:
  Config config_;
  std::vector<LstmLayer<T>> forward_layers_;
  std::vector<LstmLayer<T>> backward_layers_;
};

/// Splits an L x d tensor into L single-row constants on `tape`.
template <typename T>
std::vector<Var<T>> rows_as_steps(Tape<T>& tape, const Tensor<T>& seq);

/// Stacks per-step 1 x d values back into an L x d tensor.
template <typename T>
Tensor<T> steps_to_rows(std::span<const Var<T>> steps);

}  // namespace lapis::nn
