#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sim/config.hpp"
#include "sim/field_sequence.hpp"

namespace lapis::sim {

/// D2Q9 two-relaxation-time lattice Boltzmann channel flow past a cylinder. Zou-He velocity
/// inlet at x = 0, zero-gradient outflow, halfway bounce-back on the channel
/// walls and the cylinder. With `periodic` set every edge wraps and there is
/// no obstacle.
class Lbm {
 public:
  static constexpr int Q = 9;
  static constexpr std::array<int, Q> cx = {0, 1, 0, -1, 0, 1, -1, -1, 1};
  static constexpr std::array<int, Q> cy = {0, 0, 1, 0, -1, 1, 1, -1, -1};
  static constexpr std::array<int, Q> opposite = {0, 3, 4, 1, 2, 7, 8, 5, 6};
  static constexpr std::array<int, Q> mirror_y = {0, 1, 4, 3, 2, 8, 7, 6, 5};
  static constexpr std::array<double, Q> weight = {4.0 / 9,  1.0 / 9,  1.0 / 9,  1.0 / 9, 1.0 / 9,
                                                   1.0 / 36, 1.0 / 36, 1.0 / 36, 1.0 / 36};

  explicit Lbm(const SimConfig& cfg);

  void step();
  void advance(std::size_t steps) {
    for (std::size_t s = 0; s < steps; ++s) step();
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double tau() const { return tau_; }
  bool solid(std::size_t x, std::size_t y) const { return solid_[y * nx_ + x] != 0; }

  /// Density and velocity of the current populations.
  void macroscopic(std::vector<double>& rho, std::vector<double>& ux, std::vector<double>& uy) const;
  double total_mass() const;
  /// Central-difference vorticity dv/dx - du/dy, zero inside solids.
  std::vector<double> vorticity() const;
  /// Transverse velocity at (x, y).
  double probe_uy(std::size_t x, std::size_t y) const;

  /// Overwrites populations with equilibrium at the given fields.
  void set_equilibrium(const std::vector<double>& rho, const std::vector<double>& ux, const std::vector<double>& uy);

 private:
  std::size_t idx(std::size_t x, std::size_t y) const { return y * nx_ + x; }
  void collide(const double* fin, double rho, double ux, double uy, double* out) const;
  void step_node(long x, long y);
  void step_run(std::size_t y, std::size_t x0, std::size_t x1);

  struct Run {
    std::size_t y, x0, x1;
  };

  std::size_t nx_, ny_;
  static constexpr double kMagic = 0.25;
  double tau_, omega_, omega_minus_;
  double u_inf_;
  bool periodic_;
  bool free_slip_;
  std::vector<double> inlet_;  // inlet speed per row
  std::vector<std::uint8_t> solid_;
  std::vector<double> f_, g_;  // Q planes of nx*ny post-collision populations
  std::vector<Run> runs_;        // interior nodes whose neighbours are all fluid
  std::vector<std::size_t> special_;  // remaining fluid nodes
};

/// Lattice relaxation time for a cylinder of radius r at the given Re, U.
double lbm_tau(double re, double u_inf, double radius);

struct KvsDiagnostics {
  std::vector<double> probe;  // transverse velocity every step after spin-up
  double tau = 0;
};

/// Vorticity snapshots block-averaged by cfg.coarsen, cylinder cells masked.
FieldSequence simulate_kvs_lbm(const SimConfig& cfg, KvsDiagnostics* diagnostics = nullptr);

/// Strouhal number f * 2r / U from zero crossings of a probe signal sampled
/// once per lattice step.
double strouhal_from_probe(const std::vector<double>& probe, double radius, double u_inf);

}  // namespace lapis::sim
