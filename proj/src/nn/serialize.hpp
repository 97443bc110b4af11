#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "core/parameter.hpp"

namespace lapis::nn {

/// Concatenates the parameters into `path` (float32, little-endian) and
/// returns the ordered table of {name, shape, offset} describing them.
nlohmann::ordered_json save_weights(const std::string& path, const std::vector<Parameter<float>*>& params);

/// Inverse of save_weights. Names and shapes must match the table exactly.
/// Throws StateError if any target parameter is frozen.
void load_weights(const std::string& path, const nlohmann::ordered_json& table,
                  const std::vector<Parameter<float>*>& params);

template <typename T>
std::vector<Tensor<T>> snapshot(const std::vector<Parameter<T>*>& params) {
  std::vector<Tensor<T>> out;
  out.reserve(params.size());
  for (auto* p : params) out.push_back(p->value);
  return out;
}

template <typename T>
void restore(const std::vector<Parameter<T>*>& params, const std::vector<Tensor<T>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

/// Copies values between two parameter lists of identical layout.
template <typename To, typename From>
void copy_parameters(const std::vector<Parameter<To>*>& dst, const std::vector<Parameter<From>*>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value.template cast<To>();
}

}  // namespace lapis::nn
