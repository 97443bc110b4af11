#include "sim/spectral_systems.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "core/errors.hpp"

namespace lapis::sim {

namespace {

std::vector<double> ks_symbol(const Wavenumbers& k) {
  std::vector<double> s(k.k2.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = k.k2[i] - k.k2[i] * k.k2[i];
  return s;
}

std::vector<double> viscous_symbol(const Wavenumbers& k, double re) {
  std::vector<double> s(k.k2.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = -k.k2[i] / re;
  return s;
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

constexpr double kBlowUp = 1e6;

}  // namespace

std::vector<double> lowpass_noise(std::size_t n, int kmax, double amplitude, std::uint64_t seed) {
  Wavenumbers k(n, n, 1.0);
  Fft2d fft(n, n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<cplx> spec(k.k2.size(), 0.0);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const int a = std::abs(k.mx[i]), b = std::abs(k.my[i]);
    const double re = normal(rng), im = normal(rng);
    if (std::max(a, b) == 0 || std::max(a, b) > kmax) continue;
    spec[i] = cplx(re, k.mx[i] == 0 ? 0.0 : im);
  }
  std::vector<double> u;
  fft.inverse(spec, u);
  // Round trip so the grid field is exactly representable in the kept modes.
  fft.forward(u, spec);
  fft.inverse(spec, u);
  const double m = max_abs(u);
  if (m > 0)
    for (auto& x : u) x *= amplitude / m;
  return u;
}

Ks2dSolver::Ks2dSolver(std::size_t n, double length, double dt, bool nonlinear)
    : n_(n), k_(n, n, length), fft_(n, n), stepper_(ks_symbol(k_), dt), nonlinear_(nonlinear) {
  v_.assign(k_.k2.size(), 0.0);
}

void Ks2dSolver::set_state(const std::vector<double>& u) {
  if (u.size() != n_ * n_) throw ShapeError("ks2d: state size mismatch");
  fft_.forward(u, v_);
}

std::vector<double> Ks2dSolver::state() {
  std::vector<double> u;
  fft_.inverse(v_, u);
  return u;
}

void Ks2dSolver::nonlinear_term(const std::vector<cplx>& v, std::vector<cplx>& out) {
  const std::size_t s = v.size();
  tmp_.resize(s);
  const cplx I(0, 1);
  for (std::size_t i = 0; i < s; ++i) tmp_[i] = I * k_.kx[i] * v[i] * k_.dealias[i];
  fft_.inverse(tmp_, ux_);
  for (std::size_t i = 0; i < s; ++i) tmp_[i] = I * k_.ky[i] * v[i] * k_.dealias[i];
  fft_.inverse(tmp_, uy_);
  for (std::size_t i = 0; i < ux_.size(); ++i) ux_[i] = -0.5 * (ux_[i] * ux_[i] + uy_[i] * uy_[i]);
  fft_.forward(ux_, out);
  for (std::size_t i = 0; i < s; ++i) out[i] *= k_.dealias[i];
}

void Ks2dSolver::advance(std::size_t steps) {
  Etdrk4::Nonlinear fn;
  if (nonlinear_) {
    fn = [this](const std::vector<cplx>& v, std::vector<cplx>& out) { nonlinear_term(v, out); };
  } else {
    fn = [](const std::vector<cplx>& v, std::vector<cplx>& out) { out.assign(v.size(), 0.0); };
  }
  for (std::size_t s = 0; s < steps; ++s) stepper_.step(v_, fn);
}

KolmogorovSolver::KolmogorovSolver(std::size_t n, double length, double dt, double re, double k0, bool forcing,
                                   bool nonlinear)
    : n_(n),
      k_(n, n, length),
      fft_(n, n),
      stepper_(viscous_symbol(k_, re), dt),
      k0_(k0),
      forcing_(forcing),
      nonlinear_(nonlinear) {
  v_.assign(k_.k2.size(), 0.0);
  std::vector<double> f(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    const double y = length * static_cast<double>(r) / static_cast<double>(n);
    for (std::size_t c = 0; c < n; ++c) f[r * n + c] = k0 * std::cos(k0 * y);
  }
  fft_.forward(f, forcing_hat_);
}

void KolmogorovSolver::set_vorticity(const std::vector<double>& w) {
  if (w.size() != n_ * n_) throw ShapeError("kolmogorov: state size mismatch");
  fft_.forward(w, v_);
  v_[0] = 0.0;  // vorticity on a periodic box has zero mean
}

std::vector<double> KolmogorovSolver::vorticity() {
  std::vector<double> w;
  fft_.inverse(v_, w);
  return w;
}

void KolmogorovSolver::velocity(std::vector<double>& u, std::vector<double>& v) {
  const cplx I(0, 1);
  tmp_.resize(v_.size());
  for (std::size_t i = 0; i < v_.size(); ++i) {
    const cplx psi = k_.k2[i] > 0 ? v_[i] / k_.k2[i] : 0.0;
    tmp_[i] = I * k_.ky[i] * psi;
  }
  fft_.inverse(tmp_, u);
  for (std::size_t i = 0; i < v_.size(); ++i) {
    const cplx psi = k_.k2[i] > 0 ? v_[i] / k_.k2[i] : 0.0;
    tmp_[i] = -I * k_.kx[i] * psi;
  }
  fft_.inverse(tmp_, v);
}

void KolmogorovSolver::nonlinear_term(const std::vector<cplx>& v, std::vector<cplx>& out) {
  const std::size_t s = v.size();
  out.assign(s, 0.0);
  if (nonlinear_) {
    const cplx I(0, 1);
    tmp_.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
      const cplx psi = k_.k2[i] > 0 ? v[i] * k_.dealias[i] / k_.k2[i] : 0.0;
      tmp_[i] = I * k_.ky[i] * psi;
    }
    fft_.inverse(tmp_, gu_);
    for (std::size_t i = 0; i < s; ++i) {
      const cplx psi = k_.k2[i] > 0 ? v[i] * k_.dealias[i] / k_.k2[i] : 0.0;
      tmp_[i] = -I * k_.kx[i] * psi;
    }
    fft_.inverse(tmp_, gv_);
    for (std::size_t i = 0; i < s; ++i) tmp_[i] = I * k_.kx[i] * v[i] * k_.dealias[i];
    fft_.inverse(tmp_, gwx_);
    for (std::size_t i = 0; i < s; ++i) tmp_[i] = I * k_.ky[i] * v[i] * k_.dealias[i];
    fft_.inverse(tmp_, gwy_);
    for (std::size_t i = 0; i < gu_.size(); ++i) gwx_[i] = -(gu_[i] * gwx_[i] + gv_[i] * gwy_[i]);
    fft_.forward(gwx_, out);
    for (std::size_t i = 0; i < s; ++i) out[i] *= k_.dealias[i];
  }
  if (forcing_)
    for (std::size_t i = 0; i < s; ++i) out[i] += forcing_hat_[i];
}

void KolmogorovSolver::advance(std::size_t steps) {
  auto fn = [this](const std::vector<cplx>& v, std::vector<cplx>& out) { nonlinear_term(v, out); };
  for (std::size_t s = 0; s < steps; ++s) stepper_.step(v_, fn);
}

FieldSequence simulate_ks2d(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.nx != cfg.ny) throw InvalidArgument("ks2d: square grids only");
  const std::size_t n = cfg.nx;
  Ks2dSolver solver(n, cfg.domain, cfg.dt, cfg.nonlinear);
  if (cfg.epsilon != 0) solver.set_state(lowpass_noise(n, 4, cfg.epsilon, cfg.seed));
  FieldSequence out;
  out.frames = Tensor<float>::matrix(cfg.num_frames, n * n);
  out.grid_shape = {n, n};
  out.dt_save = cfg.physical_time_between_saves();
  out.channels = {"u"};
  out.provenance = {"ks2d", {{"domain", cfg.domain}, {"dt", cfg.dt}, {"epsilon", cfg.epsilon}}, cfg.seed};
  for (std::size_t f = 0; f < cfg.num_frames; ++f) {
    if (f > 0) {
      try {
        solver.advance(cfg.save_stride);
      } catch (const NumericalError&) {
        throw NumericalError("ks2d: blow-up before frame " + std::to_string(f), f);
      }
    } else if (cfg.burnin_steps) {
      solver.advance(cfg.burnin_steps);
    }
    auto u = solver.state();
    if (max_abs(u) > kBlowUp || !std::all_of(u.begin(), u.end(), [](double x) { return std::isfinite(x); }))
      throw NumericalError("ks2d: blow-up at frame " + std::to_string(f), f);
    std::copy(u.begin(), u.end(), out.frames.row(f).begin());
  }
  return out;
}

FieldSequence simulate_kolmogorov2d(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.nx != cfg.ny) throw InvalidArgument("kolmogorov2d: square grids only");
  const std::size_t n = cfg.nx;
  KolmogorovSolver solver(n, cfg.domain, cfg.dt, cfg.re, cfg.k0, cfg.forcing, cfg.nonlinear);
  if (cfg.forcing || cfg.epsilon != 0) {
    // Laminar profile plus relative low-pass noise.
    const double amp = cfg.forcing ? cfg.re / cfg.k0 : 1.0;
    std::vector<double> w = lowpass_noise(n, 8, cfg.epsilon * amp, cfg.seed);
    if (cfg.forcing) {
      for (std::size_t r = 0; r < n; ++r) {
        const double y = cfg.domain * static_cast<double>(r) / static_cast<double>(n);
        for (std::size_t c = 0; c < n; ++c) w[r * n + c] += amp * std::cos(cfg.k0 * y);
      }
    }
    solver.set_vorticity(w);
  }
  FieldSequence out;
  out.frames = Tensor<float>::matrix(cfg.num_frames, 2 * n * n);
  out.grid_shape = {n, n};
  out.dt_save = cfg.physical_time_between_saves();
  out.channels = {"vorticity", "speed"};
  out.provenance = {"kolmogorov2d",
                    {{"re", cfg.re}, {"k0", cfg.k0}, {"dt", cfg.dt}, {"epsilon", cfg.epsilon}},
                    cfg.seed};
  std::vector<double> u, v;
  for (std::size_t f = 0; f < cfg.num_frames; ++f) {
    try {
      solver.advance(f == 0 ? cfg.burnin_steps : cfg.save_stride);
    } catch (const NumericalError&) {
      throw NumericalError("kolmogorov2d: blow-up before frame " + std::to_string(f), f);
    }
    auto w = solver.vorticity();
    if (max_abs(w) > kBlowUp || !std::all_of(w.begin(), w.end(), [](double x) { return std::isfinite(x); }))
      throw NumericalError("kolmogorov2d: blow-up at frame " + std::to_string(f), f);
    solver.velocity(u, v);
    auto row = out.frames.row(f);
    for (std::size_t i = 0; i < n * n; ++i) {
      row[i] = static_cast<float>(w[i]);
      row[n * n + i] = static_cast<float>(std::hypot(u[i], v[i]));
    }
  }
  return out;
}

}  // namespace lapis::sim
