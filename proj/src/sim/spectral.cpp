#include "sim/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "core/errors.hpp"

namespace lapis::sim {

namespace {
// FFTW planning is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft2d::Fft2d(std::size_t ny, std::size_t nx) : ny_(ny), nx_(nx) {
  if (ny == 0 || nx == 0 || nx % 2 || ny % 2) throw InvalidArgument("fft grid dims must be even and positive");
  std::lock_guard<std::mutex> lock(planner_mutex());
  real_ = fftw_alloc_real(grid_size());
  auto* spec = fftw_alloc_complex(spectral_size());
  spec_ = spec;
  plan_fwd_ = fftw_plan_dft_r2c_2d(static_cast<int>(ny), static_cast<int>(nx), real_, spec, FFTW_ESTIMATE);
  plan_inv_ = fftw_plan_dft_c2r_2d(static_cast<int>(ny), static_cast<int>(nx), spec, real_, FFTW_ESTIMATE);
}

Fft2d::~Fft2d() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
  fftw_free(real_);
  fftw_free(spec_);
}

void Fft2d::forward(const std::vector<double>& field, std::vector<cplx>& spectrum) {
  std::copy(field.begin(), field.end(), real_);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  spectrum.resize(spectral_size());
  const auto* s = static_cast<const fftw_complex*>(spec_);
  for (std::size_t i = 0; i < spectral_size(); ++i) spectrum[i] = {s[i][0], s[i][1]};
}

void Fft2d::inverse(const std::vector<cplx>& spectrum, std::vector<double>& field) {
  auto* s = static_cast<fftw_complex*>(spec_);
  for (std::size_t i = 0; i < spectral_size(); ++i) {
    s[i][0] = spectrum[i].real();
    s[i][1] = spectrum[i].imag();
  }
  fftw_execute(static_cast<fftw_plan>(plan_inv_));  // c2r destroys its input, hence the copy
  field.resize(grid_size());
  const double norm = 1.0 / static_cast<double>(grid_size());
  for (std::size_t i = 0; i < grid_size(); ++i) field[i] = real_[i] * norm;
}

Wavenumbers::Wavenumbers(std::size_t ny_, std::size_t nx_, double length)
    : ny(ny_), nx(nx_), ncols(nx_ / 2 + 1) {
  const double base = 2.0 * std::numbers::pi / length;
  const std::size_t total = ny * ncols;
  kx.resize(total);
  ky.resize(total);
  k2.resize(total);
  dealias.resize(total);
  mx.resize(total);
  my.resize(total);
  for (std::size_t r = 0; r < ny; ++r) {
    const int m_y = r < ny / 2 ? static_cast<int>(r) : static_cast<int>(r) - static_cast<int>(ny);
    for (std::size_t c = 0; c < ncols; ++c) {
      const int m_x = static_cast<int>(c);
      const std::size_t i = r * ncols + c;
      mx[i] = m_x;
      my[i] = m_y;
      // Nyquist modes carry no derivative.
      kx[i] = (c == nx / 2) ? 0.0 : base * m_x;
      ky[i] = (r == ny / 2) ? 0.0 : base * m_y;
      k2[i] = std::pow(base * m_x, 2) + std::pow(base * m_y, 2);
      const bool keep = 3 * std::abs(m_x) < static_cast<int>(nx) && 3 * std::abs(m_y) < static_cast<int>(ny);
      dealias[i] = keep ? 1.0 : 0.0;
    }
  }
}

}  // namespace lapis::sim
