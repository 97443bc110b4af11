#include "sim/linear_toy.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "core/errors.hpp"

namespace lapis::sim {

LinearToy::LinearToy(std::size_t n, std::vector<double> gammas, std::vector<double> coefficients)
    : n_(n), gammas_(std::move(gammas)), coeffs_(std::move(coefficients)) {
  if (gammas_.empty() || gammas_.size() != coeffs_.size()) throw InvalidArgument("linear toy: one coefficient per mode");
  if (gammas_.size() > n_) throw InvalidArgument("linear toy: more modes than grid points");
  for (double g : gammas_)
    if (!(g > 0)) throw InvalidArgument("linear toy: decay rates must be positive");
  const double norm = std::sqrt(2.0 / static_cast<double>(n_ + 1));
  modes_.resize(gammas_.size() * n_);
  for (std::size_t j = 0; j < gammas_.size(); ++j)
    for (std::size_t i = 0; i < n_; ++i)
      modes_[j * n_ + i] =
          norm * std::sin(static_cast<double>(j + 1) * std::numbers::pi * static_cast<double>(i + 1) /
                          static_cast<double>(n_ + 1));
}

std::vector<double> LinearToy::amplitudes(double t) const {
  std::vector<double> a(gammas_.size());
  for (std::size_t j = 0; j < a.size(); ++j) a[j] = coeffs_[j] * std::exp(-gammas_[j] * t);
  return a;
}

std::vector<double> LinearToy::synthesize(const std::vector<double>& amplitudes) const {
  std::vector<double> y(n_, 0.0);
  for (std::size_t j = 0; j < amplitudes.size(); ++j)
    for (std::size_t i = 0; i < n_; ++i) y[i] += amplitudes[j] * modes_[j * n_ + i];
  return y;
}

std::vector<double> LinearToy::evaluate(double t) const { return synthesize(amplitudes(t)); }

std::vector<double> LinearToy::project(const std::vector<double>& field) const {
  if (field.size() != n_) throw ShapeError("linear toy: field size mismatch");
  std::vector<double> a(gammas_.size(), 0.0);
  for (std::size_t j = 0; j < a.size(); ++j)
    for (std::size_t i = 0; i < n_; ++i) a[j] += field[i] * modes_[j * n_ + i];
  return a;
}

LinearToy make_linear_toy(const SimConfig& cfg) {
  cfg.validate();
  std::vector<double> c = cfg.coefficients;
  if (c.empty()) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    for (std::size_t j = 0; j < cfg.gammas.size(); ++j) {
      const double m = mag(rng);
      c.push_back(sign(rng) ? m : -m);
    }
  }
  return LinearToy(cfg.nx, cfg.gammas, c);
}

FieldSequence simulate_linear_toy(const SimConfig& cfg) {
  const LinearToy toy = make_linear_toy(cfg);
  FieldSequence out;
  out.frames = Tensor<float>::matrix(cfg.num_frames, cfg.nx);
  out.grid_shape = {cfg.nx};
  out.dt_save = cfg.physical_time_between_saves();
  out.channels = {"y"};
  out.provenance.system = "linear_toy";
  out.provenance.seed = cfg.seed;
  for (std::size_t j = 0; j < toy.num_modes(); ++j) {
    out.provenance.parameters["gamma_" + std::to_string(j + 1)] = toy.gammas()[j];
    out.provenance.parameters["c_" + std::to_string(j + 1)] = toy.coefficients()[j];
  }
  for (std::size_t f = 0; f < cfg.num_frames; ++f) {
    const auto y = toy.evaluate(out.dt_save * static_cast<double>(f));
    std::copy(y.begin(), y.end(), out.frames.row(f).begin());
  }
  return out;
}

}  // namespace lapis::sim
