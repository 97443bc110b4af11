#include "nn/serialize.hpp"

#include "core/binary_io.hpp"
#include "core/errors.hpp"

namespace lapis::nn {

nlohmann::ordered_json save_weights(const std::string& path, const std::vector<Parameter<float>*>& params) {
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  std::vector<float> all;
  for (auto* p : params) {
    table.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", all.size()}});
    all.insert(all.end(), p->value.storage().begin(), p->value.storage().end());
  }
  write_f32(path, all);
  return table;
}

void load_weights(const std::string& path, const nlohmann::ordered_json& table,
                  const std::vector<Parameter<float>*>& params) {
  if (table.size() != params.size())
    throw IoError("weight table lists " + std::to_string(table.size()) + " arrays, model has " +
                  std::to_string(params.size()));
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = table[i];
    if (e.at("name").get<std::string>() != params[i]->name)
      throw IoError("weight table entry " + std::to_string(i) + " is '" + e.at("name").get<std::string>() +
                    "', expected '" + params[i]->name + "'");
    if (e.at("shape").get<Shape>() != params[i]->value.shape())
      throw IoError("shape mismatch for weight '" + params[i]->name + "'");
    if (e.at("offset").get<std::size_t>() != total) throw IoError("weight table offsets are not contiguous");
    total += params[i]->value.size();
  }
  for (auto* p : params)
    if (p->frozen) throw StateError("cannot load weights into frozen parameter '" + p->name + "'");
  const auto all = read_f32(path, total);
  std::size_t off = 0;
  for (auto* p : params) {
    std::copy(all.begin() + off, all.begin() + off + p->value.size(), p->value.storage().begin());
    off += p->value.size();
  }
}

}  // namespace lapis::nn
