#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "core/autograd.hpp"

namespace lapis::testing {

using LossFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

inline double relative_error(const Tensor<double>& a, const Tensor<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
  return std::sqrt(diff) / scale;
}

/// Worst relative error between analytic and central-difference gradients
/// over all `inputs`.
inline double gradcheck(const LossFn& fn, std::vector<Tensor<double>> inputs, double step = 1e-5) {
  auto evaluate = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> tape;
    tape.set_grad_enabled(false);
    std::vector<Var<double>> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    return fn(tape, vars).value()[0];
  };
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& x : inputs) vars.push_back(tape.leaf(x));
  tape.backward(fn(tape, vars));
  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor<double> numeric(inputs[k].shape());
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + step;
      const double up = evaluate(inputs);
      inputs[k][i] = saved - step;
      const double down = evaluate(inputs);
      inputs[k][i] = saved;
      numeric[i] = (up - down) / (2 * step);
    }
    worst = std::max(worst, relative_error(tape.grad(vars[k]), numeric));
  }
  return worst;
}

/// Same check against the gradients a parameter set receives.
inline double gradcheck_parameters(const std::function<Var<double>(Tape<double>&)>& fn,
                                   const std::vector<Parameter<double>*>& params, double step = 1e-5) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    tape.backward(fn(tape));
  }
  auto evaluate = [&] {
    Tape<double> tape;
    tape.set_grad_enabled(false);
    return fn(tape).value()[0];
  };
  double worst = 0;
  for (auto* p : params) {
    Tensor<double> numeric(p->value.shape());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      const double up = evaluate();
      p->value[i] = saved - step;
      const double down = evaluate();
      p->value[i] = saved;
      numeric[i] = (up - down) / (2 * step);
    }
    worst = std::max(worst, relative_error(p->grad, numeric));
  }
  return worst;
}

}  // namespace lapis::testing
