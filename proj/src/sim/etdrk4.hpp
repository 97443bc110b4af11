#pragma once

#include <functional>
#include <vector>

#include "sim/spectral.hpp"

namespace lapis::sim {

/// Fourth-order exponential time differencing Runge-Kutta for
/// v' = L v + N(v) with a diagonal real linear symbol L.
class Etdrk4 {
 public:
  using Nonlinear = std::function<void(const std::vector<cplx>& v, std::vector<cplx>& out)>;

  /// The phi-function coefficients are averaged over `contour_points` points
  /// on a unit circle around each h*L to avoid cancellation.
  Etdrk4(std::vector<double> symbol, double dt, int contour_points = 32);

  void step(std::vector<cplx>& v, const Nonlinear& nonlinear);

  double dt() const { return dt_; }
  const std::vector<double>& e() const { return e_; }
  const std::vector<double>& e2() const { return e2_; }

 private:
  std::vector<double> symbol_;
  double dt_;
  std::vector<double> e_, e2_, q_, f1_, f2_, f3_;
  std::vector<cplx> nv_, na_, nb_, nc_, a_, b_, c_;
};

}  // namespace lapis::sim
