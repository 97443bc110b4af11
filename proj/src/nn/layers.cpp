#include "nn/layers.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace lapis::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::tanh: return "tanh";
    case Activation::gelu: return "gelu";
  }
  return "none";
}

Activation activation_from_string(const std::string& s) {
  if (s == "none") return Activation::none;
  if (s == "tanh") return Activation::tanh;
  if (s == "gelu") return Activation::gelu;
  throw InvalidArgument("unknown activation '" + s + "'");
}

namespace {

template <typename T>
Tensor<T> uniform(Shape shape, T bound, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Var<T> apply(Activation a, Var<T> x) {
  switch (a) {
    case Activation::none: return x;
    case Activation::tanh: return ad::tanh(x);
    case Activation::gelu: return ad::gelu(x);
  }
  return x;
}

}  // namespace

template <typename T>
Linear<T>::Linear(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng)
    : weight(name + ".weight", uniform<T>({in, out}, T(1) / std::sqrt(T(in)), rng)),
      bias(name + ".bias", Tensor<T>({1, out})) {}

template <typename T>
Var<T> Linear<T>::forward(Tape<T>& tape, Var<T> x) {
  return ad::affine(x, tape.parameter(weight), tape.parameter(bias));
}

template <typename T>
Mlp<T>::Mlp(const std::string& name, Config config, std::mt19937_64& rng) : config_(std::move(config)) {
  if (config_.widths.size() < 2) throw InvalidArgument("mlp needs at least input and output widths");
  for (auto w : config_.widths) {
    if (w == 0) throw InvalidArgument("mlp widths must be positive");
  }
  const std::size_t n_layers = config_.widths.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::string lname = name + ".layer" + std::to_string(l);
    layers_.emplace_back(lname, config_.widths[l], config_.widths[l + 1], rng);
    if (config_.layer_norm && l + 1 < n_layers) {
      gains_.emplace_back(lname + ".norm_gain", Tensor<T>({1, config_.widths[l + 1]}, T(1)));
      shifts_.emplace_back(lname + ".norm_bias", Tensor<T>({1, config_.widths[l + 1]}));
    }
  }
}

template <typename T>
Var<T> Mlp<T>::forward(Tape<T>& tape, Var<T> x) {
  if (x.cols() != input_dim()) {
    throw ShapeError("mlp: input " + shape_string(x.shape()) + " but first layer expects width " +
                     std::to_string(input_dim()));
  }
  const std::size_t n_layers = layers_.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    x = layers_[l].forward(tape, x);
    if (l + 1 == n_layers) break;
    if (config_.layer_norm) {
      x = ad::layer_norm(x, T(1e-6));
      x = ad::mul_row(x, tape.parameter(gains_[l]));
      x = ad::add_row(x, tape.parameter(shifts_[l]));
    }
    x = apply(config_.activation, x);
  }
  return x;
}

template <typename T>
Tensor<T> Mlp<T>::forward(const Tensor<T>& x) {
  Tape<T> tape;
  tape.set_grad_enabled(false);
  Tensor<T> in = x;
  if (in.rank() == 1) in.reshape({1, in.size()});
  return forward(tape, tape.constant(std::move(in))).value();
}

template <typename T>
std::vector<Parameter<T>*> Mlp<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    out.push_back(&layers_[l].weight);
    out.push_back(&layers_[l].bias);
    if (l < gains_.size()) {
      out.push_back(&gains_[l]);
      out.push_back(&shifts_[l]);
    }
  }
  return out;
}

template <typename T>
LstmLayer<T>::LstmLayer(const std::string& name, std::size_t input_dim, std::size_t hidden_dim,
                        std::mt19937_64& rng)
    : weight(name + ".weight",
             uniform<T>({input_dim + hidden_dim, 4 * hidden_dim}, T(1) / std::sqrt(T(hidden_dim)), rng)),
      bias(name + ".bias", Tensor<T>({1, 4 * hidden_dim})) {
  for (std::size_t j = hidden_dim; j < 2 * hidden_dim; ++j) bias.value[j] = T(1);
}

template <typename T>
std::vector<Var<T>> LstmLayer<T>::forward(Tape<T>& tape, std::span<const Var<T>> seq, bool reverse) {
  const std::size_t steps = seq.size();
  if (steps == 0) throw ShapeError("lstm: empty sequence");
  const std::size_t h = hidden_dim();
  const std::size_t batch = seq[0].rows();
  Var<T> w = tape.parameter(weight);
  Var<T> b = tape.parameter(bias);
  Var<T> hidden = tape.constant(Tensor<T>::matrix(batch, h));
  Var<T> cell = hidden;
  std::vector<Var<T>> out(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = reverse ? steps - 1 - s : s;
    const Var<T>& x = seq[t];
    if (x.cols() != input_dim() || x.rows() != batch) {
      throw ShapeError("lstm: step input " + shape_string(x.shape()) + " but layer expects " +
                       std::to_string(batch) + "x" + std::to_string(input_dim()));
    }
    const Var<T> xh_parts[] = {x, hidden};
    Var<T> gates = ad::affine(ad::concat_cols<T>(xh_parts), w, b);
    Var<T> in_gate = ad::sigmoid(ad::slice_cols(gates, 0, h));
    Var<T> forget = ad::sigmoid(ad::slice_cols(gates, h, 2 * h));
    Var<T> candidate = ad::tanh(ad::slice_cols(gates, 2 * h, 3 * h));
    Var<T> out_gate = ad::sigmoid(ad::slice_cols(gates, 3 * h, 4 * h));
    cell = ad::add(ad::mul(forget, cell), ad::mul(in_gate, candidate));
    hidden = ad::mul(out_gate, ad::tanh(cell));
    out[t] = hidden;
  }
  return out;
}

template <typename T>
LstmStack<T>::LstmStack(const std::string& name, Config config, std::mt19937_64& rng)
    : config_(config) {
  if (config_.num_layers == 0 || config_.hidden_dim == 0 || config_.input_dim == 0) {
    throw InvalidArgument("lstm stack dimensions must be positive");
  }
  std::size_t in = config_.input_dim;
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string lname = name + ".layer" + std::to_string(l);
    forward_layers_.emplace_back(lname + ".fwd", in, config_.hidden_dim, rng);
    if (config_.bidirectional) backward_layers_.emplace_back(lname + ".bwd", in, config_.hidden_dim, rng);
    in = output_dim();
  }
}

template <typename T>
std::vector<Var<T>> LstmStack<T>::forward(Tape<T>& tape, std::span<const Var<T>> seq) {
  std::vector<Var<T>> current(seq.begin(), seq.end());
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    std::vector<Var<T>> fwd = forward_layers_[l].forward(tape, current, false);
    if (!config_.bidirectional) {
      current = std::move(fwd);
      continue;
    }
    std::vector<Var<T>> bwd = backward_layers_[l].forward(tape, current, true);
    for (std::size_t t = 0; t < current.size(); ++t) {
      const Var<T> parts[] = {fwd[t], bwd[t]};
      current[t] = ad::concat_cols<T>(parts);
    }
  }
  return current;
}

template <typename T>
Tensor<T> LstmStack<T>::forward(const Tensor<T>& seq) {
  Tape<T> tape;
  tape.set_grad_enabled(false);
  auto steps = rows_as_steps(tape, seq);
  auto out = forward(tape, steps);
  return steps_to_rows<T>(out);
}

template <typename T>
std::vector<Parameter<T>*> LstmStack<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (std::size_t l = 0; l < forward_layers_.size(); ++l) {
    for (auto* p : forward_layers_[l].parameters()) out.push_back(p);
    if (config_.bidirectional)
      for (auto* p : backward_layers_[l].parameters()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<Var<T>> rows_as_steps(Tape<T>& tape, const Tensor<T>& seq) {
  std::vector<Var<T>> steps;
  steps.reserve(seq.rows());
  const std::size_t d = seq.cols();
  for (std::size_t t = 0; t < seq.rows(); ++t) {
    Tensor<T> row = Tensor<T>::matrix(1, d);
    std::copy(seq.row(t).begin(), seq.row(t).end(), row.data());
    steps.push_back(tape.constant(std::move(row)));
  }
  return steps;
}

template <typename T>
Tensor<T> steps_to_rows(std::span<const Var<T>> steps) {
  std::vector<Tensor<T>> rows;
  rows.reserve(steps.size());
  for (const auto& s : steps) rows.push_back(s.value());
  return vstack(std::span<const Tensor<T>>(rows));
}

template class Linear<float>;
template class Linear<double>;
template class Mlp<float>;
template class Mlp<double>;
template class LstmLayer<float>;
template class LstmLayer<double>;
template class LstmStack<float>;
template class LstmStack<double>;
template std::vector<Var<float>> rows_as_steps(Tape<float>&, const Tensor<float>&);
template std::vector<Var<double>> rows_as_steps(Tape<double>&, const Tensor<double>&);
template Tensor<float> steps_to_rows(std::span<const Var<float>>);
template Tensor<double> steps_to_rows(std::span<const Var<double>>);

}  // namespace lapis::nn
