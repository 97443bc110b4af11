#pragma once

#include <string>
#include <utility>

#include "core/tensor.hpp"

namespace lapis {

/// A trainable array with its gradient accumulator. `frozen` parameters
/// reject optimizer updates.
template <typename T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string name_, Tensor<T> value_)
      : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T(0)); }

  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool frozen = false;
};

}  // namespace lapis
