#pragma once

#include <cstddef>
#include <vector>

#include "core/parameter.hpp"

namespace lapis::nn {

template <typename T>
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled, applied as p -= lr * wd * p
  };

  Adam() = default;
  Adam(std::vector<Parameter<T>*> params, Options options);

  /// Applies one update from the accumulated gradients. Throws
  /// NumericalError (nothing is modified) if any gradient is non-finite and
  /// StateError if a parameter is frozen.
  void step();
  void zero_grad();

  std::size_t steps() const noexcept { return t_; }
  const Options& options() const noexcept { return options_; }
  void set_lr(double lr) noexcept { options_.lr = lr; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  Options options_;
  std::size_t t_ = 0;
};

}  // namespace lapis::nn
