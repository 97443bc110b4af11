#include "sim/lbm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "core/errors.hpp"

namespace lapis::sim {

double lbm_tau(double re, double u_inf, double radius) {
  const double nu = u_inf * 2.0 * radius / re;
  return 3.0 * nu + 0.5;
}

Lbm::Lbm(const SimConfig& cfg)
    : nx_(cfg.nx), ny_(cfg.ny), u_inf_(cfg.u_inf), periodic_(cfg.periodic), free_slip_(cfg.free_slip_walls) {
  tau_ = lbm_tau(cfg.re, cfg.u_inf, cfg.radius);
  if (!(tau_ > 0.535)) {
    throw InvalidArgument("lbm: relaxation time " + std::to_string(tau_) + " must exceed 0.535");
  }
  omega_ = 1.0 / tau_;
  omega_minus_ = 1.0 / (0.5 + kMagic / (tau_ - 0.5));
  const std::size_t n = nx_ * ny_;
  solid_.assign(n, 0);
  if (cfg.obstacle && !periodic_) {
    for (std::size_t y = 0; y < ny_; ++y)
      for (std::size_t x = 0; x < nx_; ++x) {
        const double dx = static_cast<double>(x) - cfg.cylinder_x;
        const double dy = static_cast<double>(y) - cfg.cylinder_y;
        if (dx * dx + dy * dy <= cfg.radius * cfg.radius) solid_[idx(x, y)] = 1;
      }
  }
  // Small transverse modulation of the inlet profile breaks the symmetry.
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> phase(0, 2 * std::numbers::pi);
  const double ph = phase(rng);
  inlet_.resize(ny_);
  for (std::size_t y = 0; y < ny_; ++y) {
    const double s = std::sin(2 * std::numbers::pi * (static_cast<double>(y) + 0.5) / ny_ + ph);
    inlet_[y] = u_inf_ * (1.0 + cfg.inlet_modulation * s);
  }
  f_.assign(Q * n, 0.0);
  g_.assign(Q * n, 0.0);
  for (std::size_t y = 0; y < ny_; ++y) {
    std::size_t x = 0;
    while (x < nx_) {
      auto regular = [&](std::size_t xx) {
        if (solid_[idx(xx, y)]) return false;
        if (periodic_) return xx > 0 && xx + 1 < nx_ && y > 0 && y + 1 < ny_;
        if (xx == 0 || xx + 1 == nx_ || y == 0 || y + 1 == ny_) return false;
        for (int q = 1; q < Q; ++q)
          if (solid_[idx(xx - cx[q], y - cy[q])]) return false;
        return true;
      };
      if (!regular(x)) {
        if (!solid_[idx(x, y)]) special_.push_back(idx(x, y));
        ++x;
        continue;
      }
      const std::size_t x0 = x;
      while (x < nx_ && regular(x)) ++x;
      runs_.push_back({y, x0, x});
    }
  }
  std::vector<double> rho(n, 1.0), ux(n, u_inf_), uy(n, 0.0);
  for (std::size_t y = 0; y < ny_; ++y)
    for (std::size_t x = 0; x < nx_; ++x) {
      const std::size_t i = idx(x, y);
      if (solid_[i]) ux[i] = 0;
      // Optional transverse kick behind the cylinder to start shedding early.
      const double dx = static_cast<double>(x) - cfg.cylinder_x, dy = static_cast<double>(y) - cfg.cylinder_y;
      if (cfg.kick != 0 && !periodic_ && dx > cfg.radius && dx < 4 * cfg.radius && std::abs(dy) < cfg.radius)
        uy[i] = cfg.kick * u_inf_;
    }
  set_equilibrium(rho, ux, uy);
}

void Lbm::set_equilibrium(const std::vector<double>& rho, const std::vector<double>& ux,
                          const std::vector<double>& uy) {
  const std::size_t n = nx_ * ny_;
  for (std::size_t i = 0; i < n; ++i) {
    const double usq = ux[i] * ux[i] + uy[i] * uy[i];
    for (int q = 0; q < Q; ++q) {
      const double cu = cx[q] * ux[i] + cy[q] * uy[i];
      f_[q * n + i] = weight[q] * rho[i] * (1 + 3 * cu + 4.5 * cu * cu - 1.5 * usq);
    }
  }
}

void Lbm::collide(const double* fin, double rho, double ux, double uy, double* out) const {
  // Two-relaxation-time: symmetric parts relax at 1/tau (sets the viscosity),
  // antisymmetric parts at the rate fixed by the magic parameter.
  const double usq = 1.5 * (ux * ux + uy * uy);
  out[0] = fin[0] + omega_ * (weight[0] * rho * (1 - usq) - fin[0]);
  constexpr int pairs[4][2] = {{1, 3}, {2, 4}, {5, 7}, {6, 8}};
  for (const auto& pr : pairs) {
    const int a = pr[0], b = pr[1];
    const double cu = cx[a] * ux + cy[a] * uy;
    const double wr = weight[a] * rho;
    const double eq_plus = wr * (1 + 4.5 * cu * cu - usq);
    const double eq_minus = wr * 3 * cu;
    const double plus = omega_ * (0.5 * (fin[a] + fin[b]) - eq_plus);
    const double minus = omega_minus_ * (0.5 * (fin[a] - fin[b]) - eq_minus);
    out[a] = fin[a] - plus - minus;
    out[b] = fin[b] - plus + minus;
  }
}

void Lbm::step_node(long x, long y) {
  const std::size_t n = nx_ * ny_;
  const long nx = static_cast<long>(nx_), ny = static_cast<long>(ny_);
  const std::size_t i = static_cast<std::size_t>(y * nx + x);
  double fin[Q];
  // Pull streaming with halfway bounce-back off walls and solids.
  for (int q = 0; q < Q; ++q) {
    long sx = x - cx[q], sy = y - cy[q];
    if (periodic_) {
      sx = (sx + nx) % nx;
      sy = (sy + ny) % ny;
    } else {
      if (sx >= nx) sx = nx - 1;  // zero-gradient outflow
      if (sy < 0 || sy >= ny) {
        if (free_slip_) {
          // Specular reflection: the population arrives from (x - cx, y)
          // with its normal component flipped.
          const long rx = std::clamp(x - cx[q], 0L, nx - 1);
          const int mirrored = mirror_y[q];
          fin[q] = f_[mirrored * n + static_cast<std::size_t>(y * nx + rx)];
        } else {
          fin[q] = f_[opposite[q] * n + i];
        }
        continue;
      }
      if (sx < 0) {
        fin[q] = 0;  // set by the inlet condition below
        continue;
      }
    }
    const std::size_t j = static_cast<std::size_t>(sy * nx + sx);
    fin[q] = solid_[j] ? f_[opposite[q] * n + i] : f_[q * n + j];
  }
  if (!periodic_ && x == 0) {
    // Zou-He velocity inlet, prescribed (u, 0).
    const double u = inlet_[static_cast<std::size_t>(y)];
    const double rho = (fin[0] + fin[2] + fin[4] + 2 * (fin[3] + fin[6] + fin[7])) / (1 - u);
    fin[1] = fin[3] + 2.0 / 3.0 * rho * u;
    fin[5] = fin[7] - 0.5 * (fin[2] - fin[4]) + rho * u / 6.0;
    fin[8] = fin[6] + 0.5 * (fin[2] - fin[4]) + rho * u / 6.0;
  }
  double rho = 0, mx = 0, my = 0;
  for (int q = 0; q < Q; ++q) {
    rho += fin[q];
    mx += cx[q] * fin[q];
    my += cy[q] * fin[q];
  }
  double out[Q];
  collide(fin, rho, mx / rho, my / rho, out);
  for (int q = 0; q < Q; ++q) g_[q * n + i] = out[q];
}

void Lbm::step_run(std::size_t y, std::size_t x0, std::size_t x1) {
  const std::size_t n = nx_ * ny_;
  const double* __restrict src[Q];
  double* __restrict dst[Q];
  for (int q = 0; q < Q; ++q) {
    const long off = (static_cast<long>(y) - cy[q]) * static_cast<long>(nx_) - cx[q];
    src[q] = f_.data() + q * n + off;
    dst[q] = g_.data() + q * n + y * nx_;
  }
  for (std::size_t x = x0; x < x1; ++x) {
    double fin[Q], out[Q];
    for (int q = 0; q < Q; ++q) fin[q] = src[q][x];
    const double rho = fin[0] + fin[1] + fin[2] + fin[3] + fin[4] + fin[5] + fin[6] + fin[7] + fin[8];
    const double ux = (fin[1] - fin[3] + fin[5] - fin[6] - fin[7] + fin[8]) / rho;
    const double uy = (fin[2] - fin[4] + fin[5] + fin[6] - fin[7] - fin[8]) / rho;
    collide(fin, rho, ux, uy, out);
    for (int q = 0; q < Q; ++q) dst[q][x] = out[q];
  }
}

void Lbm::step() {
  for (const auto& r : runs_) step_run(r.y, r.x0, r.x1);
  for (std::size_t i : special_) step_node(static_cast<long>(i % nx_), static_cast<long>(i / nx_));
  f_.swap(g_);
}

void Lbm::macroscopic(std::vector<double>& rho, std::vector<double>& ux, std::vector<double>& uy) const {
  // Moments of the post-collision populations; collisions conserve them.
  const std::size_t n = nx_ * ny_;
  rho.assign(n, 0.0);
  ux.assign(n, 0.0);
  uy.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (solid_[i]) continue;
    double r = 0, mx = 0, my = 0;
    for (int q = 0; q < Q; ++q) {
      const double v = f_[q * n + i];
      r += v;
      mx += cx[q] * v;
      my += cy[q] * v;
    }
    rho[i] = r;
    ux[i] = mx / r;
    uy[i] = my / r;
  }
}

double Lbm::total_mass() const {
  const std::size_t n = nx_ * ny_;
  double m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (solid_[i]) continue;
    for (int q = 0; q < Q; ++q) m += f_[q * n + i];
  }
  return m;
}

double Lbm::probe_uy(std::size_t x, std::size_t y) const {
  const std::size_t n = nx_ * ny_, i = idx(x, y);
  double r = 0, my = 0;
  for (int q = 0; q < Q; ++q) {
    r += f_[q * n + i];
    my += cy[q] * f_[q * n + i];
  }
  return my / r;
}

std::vector<double> Lbm::vorticity() const {
  std::vector<double> rho, ux, uy;
  macroscopic(rho, ux, uy);
  std::vector<double> w(nx_ * ny_, 0.0);
  auto at = [&](const std::vector<double>& f, long x, long y) {
    if (periodic_) {
      x = (x + static_cast<long>(nx_)) % static_cast<long>(nx_);
      y = (y + static_cast<long>(ny_)) % static_cast<long>(ny_);
    }
    return f[static_cast<std::size_t>(y) * nx_ + static_cast<std::size_t>(x)];
  };
  const long nx = static_cast<long>(nx_), ny = static_cast<long>(ny_);
  for (long y = 0; y < ny; ++y) {
    for (long x = 0; x < nx; ++x) {
      if (solid_[static_cast<std::size_t>(y * nx + x)]) continue;
      long xl = x - 1, xr = x + 1, yd = y - 1, yu = y + 1;
      if (!periodic_) {
        // One-sided differences at the lattice edges.
        xl = std::max(xl, 0L);
        xr = std::min(xr, nx - 1);
        yd = std::max(yd, 0L);
        yu = std::min(yu, ny - 1);
      }
      const double dvdx = (at(uy, xr, y) - at(uy, xl, y)) / static_cast<double>(xr - xl);
      const double dudy = (at(ux, x, yu) - at(ux, x, yd)) / static_cast<double>(yu - yd);
      w[static_cast<std::size_t>(y * nx + x)] = dvdx - dudy;
    }
  }
  return w;
}

FieldSequence simulate_kvs_lbm(const SimConfig& cfg, KvsDiagnostics* diagnostics) {
  cfg.validate();
  Lbm lbm(cfg);
  const std::size_t c = cfg.coarsen;
  const std::size_t cnx = cfg.nx / c, cny = cfg.ny / c;
  FieldSequence out;
  out.frames = Tensor<float>::matrix(cfg.num_frames, cnx * cny);
  out.grid_shape = {cny, cnx};
  out.dt_save = static_cast<double>(cfg.save_stride);
  out.channels = {"vorticity"};
  out.provenance = {"kvs",
                    {{"re", cfg.re},
                     {"u_inf", cfg.u_inf},
                     {"radius", cfg.radius},
                     {"tau", lbm.tau()},
                     {"burnin_steps", static_cast<double>(cfg.burnin_steps)},
                     {"spinup_steps", static_cast<double>(cfg.spinup_steps)}},
                    cfg.seed};
  out.mask.assign(cnx * cny, 0);
  for (std::size_t y = 0; y < cfg.ny; ++y)
    for (std::size_t x = 0; x < cfg.nx; ++x)
      if (lbm.solid(x, y)) out.mask[(y / c) * cnx + x / c] = 1;

  const bool probing = cfg.probe_x >= 0 && cfg.probe_y >= 0;
  if (diagnostics) diagnostics->tau = lbm.tau();
  auto run = [&](std::size_t steps, std::size_t frame, bool record) {
    for (std::size_t s = 0; s < steps; ++s) {
      lbm.step();
      if (record && probing && diagnostics) {
        diagnostics->probe.push_back(
            lbm.probe_uy(static_cast<std::size_t>(cfg.probe_x), static_cast<std::size_t>(cfg.probe_y)));
      }
    }
    const double m = lbm.total_mass();
    if (!std::isfinite(m)) throw NumericalError("lbm: populations diverged before frame " + std::to_string(frame), frame);
  };
  run(cfg.spinup_steps, 0, false);
  run(cfg.burnin_steps, 0, true);
  for (std::size_t f = 0; f < cfg.num_frames; ++f) {
    if (f > 0) run(cfg.save_stride, f, true);
    const auto w = lbm.vorticity();
    auto row = out.frames.row(f);
    const double inv = 1.0 / static_cast<double>(c * c);
    for (std::size_t by = 0; by < cny; ++by) {
      for (std::size_t bx = 0; bx < cnx; ++bx) {
        double acc = 0;
        for (std::size_t y = by * c; y < (by + 1) * c; ++y)
          for (std::size_t x = bx * c; x < (bx + 1) * c; ++x) acc += w[y * cfg.nx + x];
        const std::size_t k = by * cnx + bx;
        row[k] = out.mask[k] ? 0.0f : static_cast<float>(acc * inv);
        if (!std::isfinite(row[k])) throw NumericalError("lbm: non-finite vorticity at frame " + std::to_string(f), f);
      }
    }
  }
  return out;
}

double strouhal_from_probe(const std::vector<double>& probe, double radius, double u_inf) {
  if (probe.size() < 3) throw InvalidArgument("probe signal too short");
  double mean = 0;
  for (double v : probe) mean += v;
  mean /= static_cast<double>(probe.size());
  std::vector<double> crossings;
  for (std::size_t i = 1; i < probe.size(); ++i) {
    const double a = probe[i - 1] - mean, b = probe[i] - mean;
    if (a < 0 && b >= 0) crossings.push_back(static_cast<double>(i - 1) + a / (a - b));
  }
  if (crossings.size() < 2) throw NumericalError("probe shows no oscillation", probe.size());
  const double period = (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
  return (1.0 / period) * 2.0 * radius / u_inf;
}

}  // namespace lapis::sim
