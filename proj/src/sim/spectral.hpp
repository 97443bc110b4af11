#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace lapis::sim {

using cplx = std::complex<double>;

/// Real-to-complex 2D transforms on an ny x nx periodic grid. Spectral
/// arrays are ny x (nx/2 + 1). The inverse is normalised.
class Fft2d {
 public:
  Fft2d(std::size_t ny, std::size_t nx);
  ~Fft2d();
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  void forward(const std::vector<double>& field, std::vector<cplx>& spectrum);
  void inverse(const std::vector<cplx>& spectrum, std::vector<double>& field);

  std::size_t ny() const { return ny_; }
  std::size_t nx() const { return nx_; }
  std::size_t spectral_size() const { return ny_ * (nx_ / 2 + 1); }
  std::size_t grid_size() const { return ny_ * nx_; }

 private:
  std::size_t ny_, nx_;
  double* real_ = nullptr;
  void* spec_ = nullptr;
  void* plan_fwd_ = nullptr;
  void* plan_inv_ = nullptr;
};

/// Wavenumbers of a spectral layout for a domain of side `length`.
struct Wavenumbers {
  Wavenumbers(std::size_t ny, std::size_t nx, double length);

  std::size_t ny, nx, ncols;
  std::vector<double> kx, ky, k2;
  /// 1 for modes kept by the two-thirds rule.
  std::vector<double> dealias;
  /// Integer mode indices for each spectral cell.
  std::vector<int> mx, my;
};

}  // namespace lapis::sim
