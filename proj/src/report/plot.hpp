#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "metrics/metrics.hpp"
#include "sim/field_sequence.hpp"

namespace lapis::report {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster.
class Image {
 public:
  Image(std::size_t width, std::size_t height, Rgb background = {255, 255, 255});

  std::size_t width() const { return w_; }
  std::size_t height() const { return h_; }
  const std::vector<std::uint8_t>& pixels() const { return px_; }
  Rgb at(std::size_t x, std::size_t y) const;

  void set(long x, long y, Rgb c);
  void fill(long x0, long y0, long x1, long y1, Rgb c);
  void blend(long x0, long y0, long x1, long y1, Rgb c, double alpha);
  void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1);
  /// Digits, sign, '.', 'e' and upper-case letters in a 5x7 bitmap font.
  void text(long x, long y, const std::string& s, Rgb c, int scale = 1);

 private:
  std::size_t w_, h_;
  std::vector<std::uint8_t> px_;
};

/// Writes an 8-bit RGB PNG without timestamps, so equal images give equal files.
void write_png(const Image& img, const std::string& path);

/// Blue-white-red ramp over t in [0, 1].
Rgb diverging(double t);
/// Dark-to-bright ramp over t in [0, 1].
Rgb sequential(double t);

/// `count` frame indices spread evenly over [0, frames), first and last included.
std::vector<std::size_t> select_frames(std::size_t frames, std::size_t count);

struct StripOptions {
  std::size_t channel = 0;
  std::size_t scale = 0;  // pixels per cell; 0 picks one from the grid size
  bool error_row = true;
};

/// Ground truth (top), reconstruction and absolute error (bottom) at the
/// given frames, one column per frame, shared colour scale from the truth.
/// The CSV holds one row per column: frame, rmse, truth min and max.
void snapshot_strip(const sim::FieldSequence& truth, const sim::FieldSequence& recon,
                    const std::vector<std::size_t>& frames, const std::string& png_path,
                    const std::string& csv_path, const StripOptions& opts = {});

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional band, same length as y
  std::vector<double> hi;
};

struct CurveOptions {
  bool log_y = false;
  std::size_t width = 640;
  std::size_t height = 400;
  /// x ranges shaded grey, e.g. the observed window.
  std::vector<std::pair<double, double>> shade;
};

/// Line plot plus a long-format CSV (series,x,y[,lo,hi]).
void curves(const std::vector<Series>& series, const std::string& png_path, const std::string& csv_path,
            const CurveOptions& opts = {});

/// Per-frame NRMSE with the observed window shaded; the CSV has one row per frame.
void frame_error_plot(const metrics::MetricsReport& report, const std::vector<std::uint8_t>& observed,
                      const std::string& png_path, const std::string& csv_path);

/// Reads an epoch,train_loss,val_loss table.
Series read_history(const std::string& csv_path, bool validation);

}  // namespace lapis::report
