#pragma once

#include <cstddef>
#include <vector>

#include "sim/config.hpp"
#include "sim/field_sequence.hpp"

namespace lapis::sim {

/// Y(t) = sum_j c_j exp(-gamma_j t) phi_j with orthonormal sine modes
/// phi_j(i) = sqrt(2/(n+1)) sin(j pi (i+1)/(n+1)), j = 1..r.
class LinearToy {
 public:
  LinearToy(std::size_t n, std::vector<double> gammas, std::vector<double> coefficients);

  std::size_t grid_size() const { return n_; }
  std::size_t num_modes() const { return gammas_.size(); }
  const std::vector<double>& gammas() const { return gammas_; }
  const std::vector<double>& coefficients() const { return coeffs_; }

  double mode(std::size_t j, std::size_t i) const { return modes_[j * n_ + i]; }
  /// Mode amplitudes c_j exp(-gamma_j t).
  std::vector<double> amplitudes(double t) const;
  std::vector<double> evaluate(double t) const;
  /// Coefficients of a field in the mode basis (exact projection).
  std::vector<double> project(const std::vector<double>& field) const;
  std::vector<double> synthesize(const std::vector<double>& amplitudes) const;

 private:
  std::size_t n_;
  std::vector<double> gammas_, coeffs_, modes_;
};

/// Coefficients drawn from the seed unless given: |c_j| in [0.5, 1.5] with random sign.
LinearToy make_linear_toy(const SimConfig& cfg);
FieldSequence simulate_linear_toy(const SimConfig& cfg);

}  // namespace lapis::sim
