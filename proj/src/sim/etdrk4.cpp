#include "sim/etdrk4.hpp"

#include <cmath>
#include <numbers>

#include "core/errors.hpp"

namespace lapis::sim {

Etdrk4::Etdrk4(std::vector<double> symbol, double dt, int contour_points)
    : symbol_(std::move(symbol)), dt_(dt) {
  if (!(dt > 0)) throw InvalidArgument("etdrk4: dt must be positive");
  if (contour_points < 1) throw InvalidArgument("etdrk4: need contour points");
  const std::size_t n = symbol_.size();
  e_.resize(n);
  e2_.resize(n);
  q_.resize(n);
  f1_.resize(n);
  f2_.resize(n);
  f3_.resize(n);
  std::vector<cplx> roots(contour_points);
  for (int j = 0; j < contour_points; ++j) {
    roots[j] = std::exp(cplx(0, std::numbers::pi * (j + 0.5) / contour_points * 2.0));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double hl = dt * symbol_[i];
    e_[i] = std::exp(hl);
    e2_[i] = std::exp(hl / 2);
    cplx q = 0, f1 = 0, f2 = 0, f3 = 0;
    for (const auto& r : roots) {
      const cplx z = hl + r;
      const cplx ez = std::exp(z);
      const cplx z3 = z * z * z;
      q += (std::exp(z / 2.0) - 1.0) / z;
      f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
      f2 += (2.0 + z + ez * (z - 2.0)) / z3;
      f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
    }
    const double m = static_cast<double>(contour_points);
    q_[i] = dt * (q / m).real();
    f1_[i] = dt * (f1 / m).real();
    f2_[i] = dt * (f2 / m).real();
    f3_[i] = dt * (f3 / m).real();
  }
}

void Etdrk4::step(std::vector<cplx>& v, const Nonlinear& nonlinear) {
  const std::size_t n = symbol_.size();
  if (v.size() != n) throw InvalidArgument("etdrk4: state size does not match symbol");
  a_.resize(n);
  b_.resize(n);
  c_.resize(n);
  nonlinear(v, nv_);
  for (std::size_t i = 0; i < n; ++i) a_[i] = e2_[i] * v[i] + q_[i] * nv_[i];
  nonlinear(a_, na_);
  for (std::size_t i = 0; i < n; ++i) b_[i] = e2_[i] * v[i] + q_[i] * na_[i];
  nonlinear(b_, nb_);
  for (std::size_t i = 0; i < n; ++i) c_[i] = e2_[i] * a_[i] + q_[i] * (2.0 * nb_[i] - nv_[i]);
  nonlinear(c_, nc_);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = e_[i] * v[i] + f1_[i] * nv_[i] + 2.0 * f2_[i] * (na_[i] + nb_[i]) + f3_[i] * nc_[i];
    if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) {
      throw NumericalError("etdrk4: non-finite spectral coefficient", i);
    }
  }
}

}  // namespace lapis::sim
