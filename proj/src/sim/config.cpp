#include "sim/config.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "core/errors.hpp"

namespace lapis::sim {

std::string to_string(System s) {
  switch (s) {
    case System::ks2d: return "ks2d";
    case System::kolmogorov2d: return "kolmogorov2d";
    case System::kvs: return "kvs";
    case System::linear_toy: return "linear_toy";
  }
  return "?";
}

System system_from_string(const std::string& s) {
  if (s == "ks2d") return System::ks2d;
  if (s == "kolmogorov2d") return System::kolmogorov2d;
  if (s == "kvs") return System::kvs;
  if (s == "linear_toy") return System::linear_toy;
  throw InvalidArgument("unknown system '" + s + "'");
}

SimConfig SimConfig::defaults(System system) {
  SimConfig c;
  c.system = system;
  switch (system) {
    case System::ks2d:
      c.nx = c.ny = 64;
      c.domain = 16 * std::numbers::pi;
      c.dt = 0.05;
      c.save_stride = 5;
      c.num_frames = 101;
      c.epsilon = 0.15;
      break;
    case System::kolmogorov2d:
      c.nx = c.ny = 64;
      c.domain = 2 * std::numbers::pi;
      c.dt = 0.01;
      c.save_stride = 10;
      c.burnin_steps = 1000;
      c.num_frames = 101;
      c.epsilon = 0.05;
      c.re = 50;
      c.k0 = 4;
      break;
    case System::kvs:
      c.nx = 400;
      c.ny = 160;
      c.dt = 1;
      c.save_stride = 100;
      c.num_frames = 141;
      c.re = 80.6;
      c.u_inf = 0.036;
      c.radius = 16;
      c.cylinder_x = 80;
      c.cylinder_y = 80;
      c.spinup_steps = 15000;
      c.kick = 0.3;
      c.burnin_steps = 2500;
      c.epsilon = 0.01;
      break;
    case System::linear_toy:
      c.nx = 64;
      c.ny = 1;
      c.dt = 0.05;
      c.save_stride = 1;
      c.num_frames = 101;
      c.gammas = {0.05, 0.1, 0.2, 0.3, 0.5, 0.8};
      break;
  }
  return c;
}

void SimConfig::validate() const {
  if (!(dt > 0)) throw InvalidArgument("dt must be positive");
  if (save_stride < 1) throw InvalidArgument("save stride must be at least 1");
  if (num_frames < 1) throw InvalidArgument("need at least one frame");
  auto pow2 = [](std::size_t v) { return v >= 2 && (v & (v - 1)) == 0; };
  switch (system) {
    case System::ks2d:
    case System::kolmogorov2d:
      if (!pow2(nx) || !pow2(ny)) throw InvalidArgument("spectral grids must be powers of two");
      if (!(domain > 0)) throw InvalidArgument("domain size must be positive");
      if (system == System::kolmogorov2d && !(re > 0)) throw InvalidArgument("Re must be positive");
      break;
    case System::kvs:
      if (nx < 8 || ny < 8) throw InvalidArgument("lattice too small");
      if (!(u_inf > 0) || !(re > 0)) throw InvalidArgument("Re and inlet speed must be positive");
      if (nx % coarsen || ny % coarsen) throw InvalidArgument("lattice not divisible by the coarsening factor");
      break;
    case System::linear_toy:
      if (gammas.empty()) throw InvalidArgument("linear toy needs decay rates");
      for (double g : gammas)
        if (!(g > 0)) throw InvalidArgument("decay rates must be positive");
      if (!coefficients.empty() && coefficients.size() != gammas.size())
        throw InvalidArgument("one coefficient per mode required");
      if (gammas.size() > nx) throw InvalidArgument("more modes than grid points");
      break;
  }
}

namespace {
std::uint64_t mix(std::uint64_t seed, std::uint64_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), 0x5eedu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}
}  // namespace

SimConfig ensemble_member(const SimConfig& base, std::size_t k, std::uint64_t ensemble_seed) {
  SimConfig c = base;
  c.seed = mix(ensemble_seed, k);
  if (base.system == System::kvs) {
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> re(60, 130), u(0.03, 0.05);
    std::uniform_int_distribution<std::size_t> burn(1000, 4000);
    for (;;) {
      c.re = re(rng);
      c.u_inf = u(rng);
      const double nu = c.u_inf * 2 * c.radius / c.re;
      if (3 * nu + 0.5 > 0.535) break;
    }
    c.burnin_steps = burn(rng);
  }
  return c;
}

SimConfig ground_truth_member(const SimConfig& base, std::uint64_t ensemble_seed) {
  SimConfig c = base;
  c.seed = mix(ensemble_seed, 0xffffffffull);
  if (base.system == System::kvs) {
    std::mt19937_64 rng(c.seed);
    std::uniform_int_distribution<std::size_t> burn(1000, 4000);
    c.burnin_steps = burn(rng);
  }
  return c;
}

}  // namespace lapis::sim
