#include "report/plot.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "core/errors.hpp"

namespace lapis::report {

namespace {

using Glyph = std::array<std::uint8_t, 7>;

const std::map<char, Glyph>& font() {
  static const std::map<char, Glyph> f = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {' ', {0, 0, 0, 0, 0, 0, 0}},
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
  };
  return f;
}

const std::vector<Rgb> palette = {{31, 119, 180}, {214, 39, 40},  {44, 160, 44},  {255, 127, 14},
                                  {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127}};

Rgb lerp(const std::vector<Rgb>& stops, double t) {
  if (!std::isfinite(t)) return {0, 0, 0};
  t = std::clamp(t, 0.0, 1.0) * static_cast<double>(stops.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(i);
  Rgb out;
  for (int c = 0; c < 3; ++c)
    out[c] = static_cast<std::uint8_t>(std::lround((1 - f) * stops[i][c] + f * stops[i + 1][c]));
  return out;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(10);
  return out;
}

}  // namespace

Image::Image(std::size_t width, std::size_t height, Rgb bg) : w_(width), h_(height), px_(width * height * 3) {
  if (width == 0 || height == 0) throw InvalidArgument("image dimensions must be positive");
  for (std::size_t i = 0; i < width * height; ++i) std::copy(bg.begin(), bg.end(), px_.begin() + 3 * i);
}

Rgb Image::at(std::size_t x, std::size_t y) const {
  const auto* p = &px_[3 * (y * w_ + x)];
  return {p[0], p[1], p[2]};
}

void Image::set(long x, long y, Rgb c) {
  if (x < 0 || y < 0 || x >= static_cast<long>(w_) || y >= static_cast<long>(h_)) return;
  std::copy(c.begin(), c.end(), px_.begin() + 3 * (static_cast<std::size_t>(y) * w_ + static_cast<std::size_t>(x)));
}

void Image::fill(long x0, long y0, long x1, long y1, Rgb c) {
  for (long y = y0; y < y1; ++y)
    for (long x = x0; x < x1; ++x) set(x, y, c);
}

void Image::blend(long x0, long y0, long x1, long y1, Rgb c, double alpha) {
  for (long y = std::max(y0, 0L); y < std::min(y1, static_cast<long>(h_)); ++y) {
    for (long x = std::max(x0, 0L); x < std::min(x1, static_cast<long>(w_)); ++x) {
      auto old = at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      Rgb mix;
      for (int k = 0; k < 3; ++k) mix[k] = static_cast<std::uint8_t>(std::lround((1 - alpha) * old[k] + alpha * c[k]));
      set(x, y, mix);
    }
  }
}

void Image::line(double x0, double y0, double x1, double y1, Rgb c, int thickness) {
  const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  const auto steps = static_cast<long>(std::ceil(len)) + 1;
  const int r = thickness / 2;
  for (long i = 0; i <= steps; ++i) {
    const double f = steps == 0 ? 0 : static_cast<double>(i) / static_cast<double>(steps);
    const long x = std::lround(x0 + f * (x1 - x0));
    const long y = std::lround(y0 + f * (y1 - y0));
    fill(x - r, y - r, x - r + thickness, y - r + thickness, c);
  }
}

void Image::text(long x, long y, const std::string& s, Rgb c, int scale) {
  const auto& f = font();
  for (char ch : s) {
    auto it = f.find(ch);
    if (it == f.end()) it = f.find(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    if (it != f.end()) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (it->second[row] & (0x10 >> col)) fill(x + col * scale, y + row * scale, x + (col + 1) * scale, y + (row + 1) * scale, c);
    }
    x += 6 * scale;
  }
}

void write_png(const Image& img, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("failed writing " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height());
  auto* base = const_cast<std::uint8_t*>(img.pixels().data());
  for (std::size_t y = 0; y < img.height(); ++y) rows[y] = base + y * img.width() * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(fp) != 0) throw IoError("failed closing " + path);
}

Rgb diverging(double t) {
  static const std::vector<Rgb> stops = {{5, 48, 97},   {67, 147, 195}, {247, 247, 247},
                                         {214, 96, 77}, {103, 0, 31}};
  return lerp(stops, t);
}

Rgb sequential(double t) {
  static const std::vector<Rgb> stops = {{0, 0, 4}, {87, 16, 110}, {188, 55, 84}, {249, 142, 9}, {252, 255, 164}};
  return lerp(stops, t);
}

std::vector<std::size_t> select_frames(std::size_t frames, std::size_t count) {
  if (frames == 0 || count == 0) throw InvalidArgument("select_frames needs frames and a positive count");
  count = std::min(count, frames);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count; ++k)
    out.push_back(count == 1 ? frames - 1 : k * (frames - 1) / (count - 1));
  return out;
}

void snapshot_strip(const sim::FieldSequence& truth, const sim::FieldSequence& recon,
                    const std::vector<std::size_t>& frames, const std::string& png_path,
                    const std::string& csv_path, const StripOptions& opts) {
  if (frames.empty()) throw InvalidArgument("snapshot strip needs at least one frame");
  if (truth.frame_size() != recon.frame_size() || truth.num_frames() != recon.num_frames())
    throw ShapeError("truth and reconstruction differ in shape");
  if (opts.channel >= truth.num_channels()) throw InvalidArgument("channel out of range");
  for (auto f : frames)
    if (f >= truth.num_frames()) throw InvalidArgument("frame " + std::to_string(f) + " out of range");

  const std::size_t ny = truth.grid_shape.size() == 2 ? truth.grid_shape[0] : 1;
  const std::size_t nx = truth.grid_shape.back();
  const std::size_t g = truth.grid_size();
  const std::size_t off = opts.channel * g;
  const std::size_t scale = opts.scale > 0 ? opts.scale : std::max<std::size_t>(1, 160 / std::max(nx, ny));
  const std::size_t tile_w = nx * scale;
  const std::size_t tile_h = ny == 1 ? 24 : ny * scale;
  const std::size_t rows = opts.error_row ? 3 : 2;
  const std::size_t gap = 4, label = 12;
  Image img(frames.size() * (tile_w + gap) + gap, rows * (tile_h + gap) + gap + label);

  double lo = std::numeric_limits<double>::infinity(), hi = -lo, err_hi = 0;
  for (auto f : frames) {
    for (std::size_t i = 0; i < g; ++i) {
      if (!truth.mask.empty() && truth.mask[i]) continue;
      const double t = truth.frames(f, off + i);
      lo = std::min(lo, t);
      hi = std::max(hi, t);
      err_hi = std::max(err_hi, std::abs(static_cast<double>(recon.frames(f, off + i)) - t));
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  if (err_hi == 0) err_hi = 1;

  auto csv = open_csv(csv_path);
  csv << "column,frame,rmse,truth_min,truth_max\n";
  for (std::size_t col = 0; col < frames.size(); ++col) {
    const std::size_t f = frames[col];
    const long x0 = static_cast<long>(gap + col * (tile_w + gap));
    img.text(x0, 2, std::to_string(f), {0, 0, 0});
    double se = 0, fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
    std::size_t count = 0;
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        const std::size_t i = y * nx + x;
        const bool masked = !truth.mask.empty() && truth.mask[i];
        const double t = truth.frames(f, off + i);
        const double r = recon.frames(f, off + i);
        if (!masked) {
          se += (r - t) * (r - t);
          fmin = std::min(fmin, t);
          fmax = std::max(fmax, t);
          ++count;
        }
        const std::size_t th = ny == 1 ? tile_h : scale;
        // Row 0 of the grid is drawn at the bottom.
        const long py = static_cast<long>(ny == 1 ? 0 : (ny - 1 - y) * scale);
        const long px = x0 + static_cast<long>(x * scale);
        const Rgb grey{128, 128, 128};
        for (std::size_t row = 0; row < rows; ++row) {
          const long y0 = static_cast<long>(label + gap + row * (tile_h + gap)) + py;
          Rgb c = grey;
          if (!masked) {
            if (row == 0) c = diverging((t - lo) / span);
            else if (row == 1) c = diverging((r - lo) / span);
            else c = sequential(std::abs(r - t) / err_hi);
          }
          img.fill(px, y0, px + static_cast<long>(scale), y0 + static_cast<long>(th), c);
        }
      }
    }
    csv << col << ',' << f << ',' << std::sqrt(se / static_cast<double>(std::max<std::size_t>(count, 1))) << ','
        << fmin << ',' << fmax << '\n';
  }
  if (!csv) throw IoError("failed writing " + csv_path);
  write_png(img, png_path);
}

void curves(const std::vector<Series>& series, const std::string& png_path, const std::string& csv_path,
            const CurveOptions& opts) {
  if (series.empty()) throw InvalidArgument("nothing to plot");
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("series '" + s.name + "' has mismatched x and y");
    if ((!s.lo.empty() && s.lo.size() != s.y.size()) || (!s.hi.empty() && s.hi.size() != s.y.size()))
      throw ShapeError("series '" + s.name + "' has a band of the wrong length");
  }
  const bool bands = std::any_of(series.begin(), series.end(), [](const Series& s) { return !s.lo.empty(); });
  auto csv = open_csv(csv_path);
  csv << "series,x,y" << (bands ? ",lo,hi" : "") << '\n';
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      csv << s.name << ',' << s.x[i] << ',' << s.y[i];
      if (bands) {
        if (s.lo.empty()) csv << ",,";
        else csv << ',' << s.lo[i] << ',' << s.hi[i];
      }
      csv << '\n';
    }
  }
  if (!csv) throw IoError("failed writing " + csv_path);

  auto ty = [&](double v) { return opts.log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      const double lo = s.lo.empty() ? s.y[i] : s.lo[i];
      const double hi = s.hi.empty() ? s.y[i] : s.hi[i];
      ymin = std::min(ymin, ty(lo));
      ymax = std::max(ymax, ty(hi));
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  Image img(opts.width, opts.height);
  const long left = 70, right = 20, top = 20, bottom = 30;
  const long pw = static_cast<long>(opts.width) - left - right;
  const long ph = static_cast<long>(opts.height) - top - bottom;
  auto px = [&](double x) { return static_cast<double>(left) + (x - xmin) / (xmax - xmin) * static_cast<double>(pw); };
  auto py = [&](double y) {
    return static_cast<double>(top) + (1 - (ty(y) - ymin) / (ymax - ymin)) * static_cast<double>(ph);
  };
  for (const auto& [a, b] : opts.shade)
    img.blend(std::lround(px(std::max(a, xmin))), top, std::lround(px(std::min(b, xmax))), top + ph, {160, 160, 160}, 0.35);

  const Rgb axis{0, 0, 0};
  img.line(left, top, left, top + ph, axis);
  img.line(left, top + ph, left + pw, top + ph, axis);
  auto ylabel = [&](double v) { return short_number(opts.log_y ? std::pow(10.0, v) : v); };
  img.text(4, top, ylabel(ymax), axis);
  img.text(4, top + ph - 7, ylabel(ymin), axis);
  img.text(left, top + ph + 8, short_number(xmin), axis);
  const auto xmax_label = short_number(xmax);
  img.text(left + pw - 6 * static_cast<long>(xmax_label.size()), top + ph + 8, xmax_label, axis);

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const Rgb c = palette[k % palette.size()];
    if (!s.lo.empty()) {
      for (std::size_t i = 0; i + 1 < s.x.size(); ++i) {
        const double x0 = px(s.x[i]), x1 = px(s.x[i + 1]);
        for (long x = std::lround(x0); x <= std::lround(x1); ++x) {
          const double f = x1 > x0 ? (static_cast<double>(x) - x0) / (x1 - x0) : 0;
          const double lo = py(s.lo[i] + f * (s.lo[i + 1] - s.lo[i]));
          const double hi = py(s.hi[i] + f * (s.hi[i + 1] - s.hi[i]));
          img.blend(x, std::lround(hi), x + 1, std::lround(lo) + 1, c, 0.2);
        }
      }
      if (s.x.size() == 1) img.line(px(s.x[0]), py(s.lo[0]), px(s.x[0]), py(s.hi[0]), c);
    }
    for (std::size_t i = 0; i + 1 < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || !std::isfinite(s.y[i + 1])) continue;
      img.line(px(s.x[i]), py(s.y[i]), px(s.x[i + 1]), py(s.y[i + 1]), c, 2);
    }
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) img.fill(std::lround(px(s.x[i])) - 1, std::lround(py(s.y[i])) - 1,
                                          std::lround(px(s.x[i])) + 2, std::lround(py(s.y[i])) + 2, c);
    const long ly = top + 4 + static_cast<long>(k) * 10;
    const long lx = left + pw - 6 * static_cast<long>(s.name.size()) - 20;
    img.fill(lx, ly + 2, lx + 12, ly + 5, c);
    img.text(lx + 16, ly, s.name, c);
  }
  write_png(img, png_path);
}

void frame_error_plot(const metrics::MetricsReport& report, const std::vector<std::uint8_t>& observed,
                      const std::string& png_path, const std::string& csv_path) {
  const std::size_t n = report.frame_nrmse.size();
  if (!observed.empty() && observed.size() != n) throw ShapeError("observed mask length differs from frame count");
  auto csv = open_csv(csv_path);
  csv << "frame,rmse,nrmse" << (report.frame_ssim.empty() ? "" : ",ssim") << ",observed\n";
  Series s{"NRMSE", {}, report.frame_nrmse, {}, {}};
  CurveOptions opts;
  double start = -1;
  for (std::size_t t = 0; t < n; ++t) {
    s.x.push_back(static_cast<double>(t));
    const bool obs = !observed.empty() && observed[t];
    csv << t << ',' << report.frame_rmse[t] << ',' << report.frame_nrmse[t];
    if (!report.frame_ssim.empty()) csv << ',' << report.frame_ssim[t];
    csv << ',' << (obs ? 1 : 0) << '\n';
    if (obs && start < 0) start = static_cast<double>(t);
    if (!obs && start >= 0) {
      opts.shade.push_back({start, static_cast<double>(t) - 1});
      start = -1;
    }
  }
  if (start >= 0) opts.shade.push_back({start, static_cast<double>(n) - 1});
  if (!csv) throw IoError("failed writing " + csv_path);
  std::vector<Series> all{s};
  const std::string tmp_csv = csv_path + ".series";
  curves(all, png_path, tmp_csv, opts);
  std::remove(tmp_csv.c_str());
}

Series read_history(const std::string& csv_path, bool validation) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open " + csv_path);
  Series s;
  s.name = validation ? "val" : "train";
  std::string line;
  std::getline(in, line);
  if (line.rfind("epoch,", 0) != 0) throw IoError(csv_path + " is not a training history");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string e, tr, va;
    if (!std::getline(ss, e, ',') || !std::getline(ss, tr, ',') || !std::getline(ss, va, ','))
      throw IoError("malformed row in " + csv_path);
    try {
      s.x.push_back(std::stod(e));
      s.y.push_back(std::stod(validation ? va : tr));
    } catch (const std::exception&) {
      throw IoError("malformed row in " + csv_path);
    }
  }
  return s;
}

}  // namespace lapis::report
