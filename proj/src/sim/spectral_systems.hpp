#pragma once

#include <memory>
#include <vector>

#include "sim/config.hpp"
#include "sim/etdrk4.hpp"
#include "sim/field_sequence.hpp"
#include "sim/spectral.hpp"

namespace lapis::sim {

/// u_t + 1/2 |grad u|^2 + lap u + lap^2 u = 0 on a doubly periodic square.
class Ks2dSolver {
 public:
  Ks2dSolver(std::size_t n, double length, double dt, bool nonlinear = true);

  void set_state(const std::vector<double>& u);
  std::vector<double> state();
  std::vector<cplx>& spectrum() { return v_; }
  const Wavenumbers& wavenumbers() const { return k_; }

  void advance(std::size_t steps);
  /// Dealiased -1/2 |grad u|^2 in spectral space.
  void nonlinear_term(const std::vector<cplx>& v, std::vector<cplx>& out);

 private:
  std::size_t n_;
  Wavenumbers k_;
  Fft2d fft_;
  Etdrk4 stepper_;
  bool nonlinear_;
  std::vector<cplx> v_, tmp_;
  std::vector<double> ux_, uy_;
};

/// Vorticity form w_t + u.grad w = lap w / Re + f_w with f_w = k0 cos(k0 y),
/// velocity from the streamfunction lap psi = -w (zero-mean gauge).
class KolmogorovSolver {
 public:
  KolmogorovSolver(std::size_t n, double length, double dt, double re, double k0, bool forcing = true,
                   bool nonlinear = true);

  void set_vorticity(const std::vector<double>& w);
  std::vector<double> vorticity();
  /// Velocity components (u, v) on the grid.
  void velocity(std::vector<double>& u, std::vector<double>& v);
  std::vector<cplx>& spectrum() { return v_; }
  const Wavenumbers& wavenumbers() const { return k_; }

  void advance(std::size_t steps);

 private:
  void nonlinear_term(const std::vector<cplx>& v, std::vector<cplx>& out);

  std::size_t n_;
  Wavenumbers k_;
  Fft2d fft_;
  Etdrk4 stepper_;
  double k0_;
  bool forcing_, nonlinear_;
  std::vector<cplx> v_, tmp_, forcing_hat_;
  std::vector<double> gu_, gv_, gwx_, gwy_;
};

/// Smooth random field: Gaussian coefficients on modes 0 < max(|mx|,|my|) <= kmax,
/// scaled so that max |u| equals `amplitude`.
std::vector<double> lowpass_noise(std::size_t n, int kmax, double amplitude, std::uint64_t seed);

FieldSequence simulate_ks2d(const SimConfig& cfg);
/// Two channels per frame: vorticity, then velocity magnitude.
FieldSequence simulate_kolmogorov2d(const SimConfig& cfg);

}  // namespace lapis::sim
