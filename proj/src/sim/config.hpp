#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lapis::sim {

enum class System { ks2d, kolmogorov2d, kvs, linear_toy };

std::string to_string(System s);
System system_from_string(const std::string& s);

struct SimConfig {
  System system = System::ks2d;
  std::size_t nx = 64;
  std::size_t ny = 64;
  double domain = 0;          // side length of the periodic box
  double dt = 0.05;
  std::size_t save_stride = 5;
  std::size_t burnin_steps = 0;
  std::size_t num_frames = 101;
  double epsilon = 0.15;      // initial perturbation amplitude
  bool nonlinear = true;
  bool forcing = true;

  // Kolmogorov
  double re = 50;
  double k0 = 4;

  // Vortex street (lattice units)
  double u_inf = 0.036;
  double radius = 16;
  double cylinder_x = 80;
  double cylinder_y = 80;
  double inlet_modulation = 0.01;
  std::size_t spinup_steps = 0;  // fixed steps before the randomised burn-in
  std::size_t coarsen = 4;
  bool obstacle = true;
  bool periodic = false;
  bool free_slip_walls = false;  // specular reflection instead of no-slip
  double kick = 0.0;             // initial transverse velocity in the wake, relative to u_inf
  /// Optional probe sampled every step, in lattice coordinates.
  long probe_x = -1;
  long probe_y = -1;

  // Linear dissipative toy
  std::vector<double> gammas;
  std::vector<double> coefficients;  // empty: drawn from the seed

  std::uint64_t seed = 0;

  static SimConfig defaults(System system);
  void validate() const;
  double physical_time_between_saves() const { return dt * static_cast<double>(save_stride); }
};

/// Configuration of ensemble member `k` drawn from `base`. Vortex-street
/// members get randomised Re, inlet speed, modulation phase and burn-in;
/// the others differ only in their seed.
SimConfig ensemble_member(const SimConfig& base, std::size_t k, std::uint64_t ensemble_seed);

/// Held-out configuration used as ground truth. Shares no seed with any
/// ensemble member.
SimConfig ground_truth_member(const SimConfig& base, std::uint64_t ensemble_seed);

}  // namespace lapis::sim
