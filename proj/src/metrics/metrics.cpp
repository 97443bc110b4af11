#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <json.hpp>

#include "core/errors.hpp"
#include "sim/linear_toy.hpp"

namespace lapis::metrics {

namespace {

void check_pair(const Tensor<float>& pred, const Tensor<float>& truth, const Mask& mask) {
  if (!pred.same_shape(truth)) {
    throw ShapeError("metrics: prediction " + shape_string(pred.shape()) + " vs truth " + shape_string(truth.shape()));
  }
  if (!mask.empty() && mask.size() != truth.cols()) throw ShapeError("metrics: mask width does not match frames");
}

std::vector<double> gaussian_window(const SsimParams& p) {
  std::vector<double> w(p.window);
  const double c = (static_cast<double>(p.window) - 1) / 2;
  double s = 0;
  for (std::size_t i = 0; i < p.window; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2 * p.sigma * p.sigma));
    s += w[i];
  }
  for (auto& v : w) v /= s;
  return w;
}

Tensor<float> channel_frames(const sim::FieldSequence& f, std::size_t channel) {
  const std::size_t g = f.grid_size();
  Tensor<float> out = Tensor<float>::matrix(f.num_frames(), g);
  for (std::size_t t = 0; t < f.num_frames(); ++t) {
    auto src = f.frames.row(t).subspan(channel * g, g);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

Tensor<float> select_frames(const Tensor<float>& x, const std::vector<std::uint8_t>& flags, std::uint8_t want) {
  std::vector<Tensor<float>> rows;
  for (std::size_t t = 0; t < x.rows(); ++t)
    if (flags[t] == want) rows.push_back(x.slice_rows(t, t + 1));
  if (rows.empty()) return {};
  return vstack(std::span<const Tensor<float>>(rows));
}

}  // namespace

double rmse(const Tensor<float>& pred, const Tensor<float>& truth, const Mask& mask) {
  check_pair(pred, truth, mask);
  const std::size_t cols = truth.cols();
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < truth.rows(); ++t) {
    for (std::size_t i = 0; i < cols; ++i) {
      if (!mask.empty() && mask[i]) continue;
      const double d = static_cast<double>(pred(t, i)) - static_cast<double>(truth(t, i));
      acc += d * d;
      ++count;
    }
  }
  if (count == 0) throw InvalidArgument("rmse: every cell is masked");
  return std::sqrt(acc / static_cast<double>(count));
}

double data_range(const Tensor<float>& truth, const Mask& mask) {
  if (!mask.empty() && mask.size() != truth.cols()) throw ShapeError("data_range: mask width does not match frames");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t t = 0; t < truth.rows(); ++t)
    for (std::size_t i = 0; i < truth.cols(); ++i) {
      if (!mask.empty() && mask[i]) continue;
      lo = std::min<double>(lo, truth(t, i));
      hi = std::max<double>(hi, truth(t, i));
    }
  if (lo > hi) throw InvalidArgument("data_range: every cell is masked");
  return hi - lo;
}

double nrmse(const Tensor<float>& pred, const Tensor<float>& truth, const Mask& mask) {
  const double delta = data_range(truth, mask);
  if (delta == 0) throw InvalidArgument("nrmse: ground truth has zero data range");
  return rmse(pred, truth, mask) / delta;
}

double ssim(std::span<const float> pred, std::span<const float> truth, const std::vector<std::size_t>& grid,
            double dynamic_range, const Mask& mask, const SsimParams& params) {
  if (grid.empty() || grid.size() > 2) throw InvalidArgument("ssim: grid must be 1D or 2D");
  const std::size_t ny = grid.size() == 2 ? grid[0] : 1;
  const std::size_t nx = grid.back();
  if (pred.size() != ny * nx || truth.size() != ny * nx) throw ShapeError("ssim: frame size does not match grid");
  if (!mask.empty() && mask.size() != ny * nx) throw ShapeError("ssim: mask size does not match grid");
  if (!(dynamic_range > 0)) throw InvalidArgument("ssim: dynamic range must be positive");
  const std::size_t wy = grid.size() == 2 ? params.window : 1;
  const std::size_t wx = params.window;
  if (ny < wy || nx < wx) throw InvalidArgument("ssim: grid smaller than the window");
  const auto g = gaussian_window(params);
  const std::vector<double> gy = grid.size() == 2 ? g : std::vector<double>{1.0};
  const double c1 = std::pow(params.k1 * dynamic_range, 2);
  const double c2 = std::pow(params.k2 * dynamic_range, 2);
  double total = 0;
  std::size_t windows = 0;
  for (std::size_t y0 = 0; y0 + wy <= ny; ++y0) {
    for (std::size_t x0 = 0; x0 + wx <= nx; ++x0) {
      bool skip = false;
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t dy = 0; dy < wy && !skip; ++dy) {
        for (std::size_t dx = 0; dx < wx; ++dx) {
          const std::size_t i = (y0 + dy) * nx + x0 + dx;
          if (!mask.empty() && mask[i]) {
            skip = true;
            break;
          }
          const double w = gy[dy] * g[dx];
          const double a = pred[i], b = truth[i];
          mx += w * a;
          my += w * b;
          sxx += w * a * a;
          syy += w * b * b;
          sxy += w * (a * b);
        }
      }
      if (skip) continue;
      const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
      total += ((2 * (mx * my) + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  if (windows == 0) throw InvalidArgument("ssim: no unmasked window");
  return total / static_cast<double>(windows);
}

double ssim_trajectory(const Tensor<float>& pred, const Tensor<float>& truth, const std::vector<std::size_t>& grid,
                       std::size_t channel, double dynamic_range, const Mask& grid_mask, const SsimParams& params) {
  check_pair(pred, truth, {});
  std::size_t g = 1;
  for (auto d : grid) g *= d;
  double acc = 0;
  for (std::size_t t = 0; t < truth.rows(); ++t) {
    acc += ssim(pred.row(t).subspan(channel * g, g), truth.row(t).subspan(channel * g, g), grid, dynamic_range,
                grid_mask, params);
  }
  return acc / static_cast<double>(truth.rows());
}

MetricsReport evaluate(const sim::FieldSequence& pred, const sim::FieldSequence& truth,
                       const std::vector<std::uint8_t>& observed, bool with_ssim) {
  check_pair(pred.frames, truth.frames, {});
  if (!observed.empty() && observed.size() != truth.num_frames())
    throw ShapeError("evaluate: observed flags do not match frame count");
  const Mask mask = truth.frame_mask();
  const Mask& gmask = truth.mask;
  MetricsReport r;
  r.full.delta = data_range(truth.frames, mask);
  r.full.rmse = rmse(pred.frames, truth.frames, mask);
  if (r.full.delta == 0) throw InvalidArgument("evaluate: ground truth has zero data range");
  r.full.nrmse = r.full.rmse / r.full.delta;

  const std::size_t nch = truth.num_channels();
  std::vector<double> ch_delta(nch);
  for (std::size_t c = 0; c < nch; ++c) {
    const auto p = channel_frames(pred, c);
    const auto t = channel_frames(truth, c);
    MetricEntry e;
    e.delta = data_range(t, gmask);
    e.rmse = rmse(p, t, gmask);
    if (e.delta == 0) throw InvalidArgument("evaluate: channel '" + truth.channels[c] + "' has zero data range");
    e.nrmse = e.rmse / e.delta;
    ch_delta[c] = e.delta;
    if (with_ssim && truth.grid_shape.back() >= 11 && (truth.grid_shape.size() == 1 || truth.grid_shape[0] >= 11))
      e.ssim = ssim_trajectory(pred.frames, truth.frames, truth.grid_shape, c, e.delta, gmask);
    r.channels[truth.channels[c]] = e;
  }
  if (nch == 1) r.full.ssim = r.channels.begin()->second.ssim;

  auto region = [&](std::uint8_t want) -> std::optional<MetricEntry> {
    if (observed.empty()) return std::nullopt;
    const auto p = select_frames(pred.frames, observed, want);
    if (p.empty()) return std::nullopt;
    const auto t = select_frames(truth.frames, observed, want);
    MetricEntry e;
    e.delta = r.full.delta;
    e.rmse = rmse(p, t, mask);
    e.nrmse = e.rmse / e.delta;
    return e;
  };
  r.observed = region(1);
  r.generated = region(0);

  for (std::size_t t = 0; t < truth.num_frames(); ++t) {
    const auto p = pred.frames.slice_rows(t, t + 1);
    const auto g = truth.frames.slice_rows(t, t + 1);
    const double e = rmse(p, g, mask);
    r.frame_rmse.push_back(e);
    r.frame_nrmse.push_back(e / r.full.delta);
    if (r.channels.begin()->second.ssim) {
      const std::size_t gs = truth.grid_size();
      r.frame_ssim.push_back(ssim(pred.frames.row(t).subspan(0, gs), truth.frames.row(t).subspan(0, gs),
                                  truth.grid_shape, ch_delta[0], gmask));
    }
  }
  return r;
}

namespace {
nlohmann::ordered_json entry_json(const MetricEntry& e) {
  nlohmann::ordered_json j;
  j["rmse"] = e.rmse;
  j["nrmse"] = e.nrmse;
  j["delta"] = e.delta;
  if (e.ssim) j["ssim"] = *e.ssim;
  return j;
}
}  // namespace

std::string to_json(const MetricsReport& r, int indent) {
  nlohmann::ordered_json j = entry_json(r.full);
  if (r.observed) j["observed"] = entry_json(*r.observed);
  if (r.generated) j["generated"] = entry_json(*r.generated);
  nlohmann::ordered_json ch = nlohmann::ordered_json::object();
  for (const auto& [name, e] : r.channels) ch[name] = entry_json(e);
  j["channels"] = ch;
  return j.dump(indent);
}

void write_metrics_json(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << to_json(report) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

void write_frame_csv(const MetricsReport& r, const std::vector<std::uint8_t>& observed, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "frame,observed,rmse,nrmse,ssim\n" << std::setprecision(9);
  for (std::size_t t = 0; t < r.frame_rmse.size(); ++t) {
    out << t << ',' << (observed.empty() ? 0 : int(observed[t])) << ',' << r.frame_rmse[t] << ','
        << r.frame_nrmse[t] << ',';
    if (t < r.frame_ssim.size()) out << r.frame_ssim[t];
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

LinearBackwardReport validate_linear_backward(const std::vector<double>& gammas, double T,
                                              const std::vector<double>& eps, const std::vector<double>& times,
                                              std::size_t grid_points) {
  if (eps.size() != gammas.size()) throw InvalidArgument("validate_linear_backward: one perturbation per mode");
  std::vector<double> coeffs(gammas.size());
  for (std::size_t j = 0; j < coeffs.size(); ++j) coeffs[j] = 1.0 + 0.1 * static_cast<double>(j);
  const sim::LinearToy toy(grid_points, gammas, coeffs);
  const double gmax = *std::max_element(gammas.begin(), gammas.end());
  double eps_norm = 0;
  for (double e : eps) eps_norm += e * e;
  eps_norm = std::sqrt(eps_norm);

  auto terminal = toy.evaluate(T);
  const auto delta = toy.synthesize(eps);
  for (std::size_t i = 0; i < terminal.size(); ++i) terminal[i] += delta[i];
  const auto observed_amps = toy.project(terminal);

  LinearBackwardReport rep;
  rep.times = times;
  for (double t : times) {
    if (t > T) throw InvalidArgument("validate_linear_backward: time beyond T");
    std::vector<double> back(observed_amps.size());
    for (std::size_t j = 0; j < back.size(); ++j) back[j] = observed_amps[j] * std::exp(gammas[j] * (T - t));
    const auto recon = toy.synthesize(back);
    const auto truth = toy.evaluate(t);
    std::vector<double> err(recon.size());
    double norm = 0;
    for (std::size_t i = 0; i < err.size(); ++i) {
      err[i] = recon[i] - truth[i];
      norm += err[i] * err[i];
    }
    norm = std::sqrt(norm);
    const auto measured = toy.project(err);
    const double bound = std::exp(gmax * (T - t)) * eps_norm;
    for (std::size_t j = 0; j < measured.size(); ++j) {
      const double expected = std::exp(gammas[j] * (T - t)) * eps[j];
      const double denom = expected != 0 ? std::abs(expected) : bound;
      rep.max_modewise_relative_error =
          std::max(rep.max_modewise_relative_error, std::abs(measured[j] - expected) / denom);
    }
    rep.error_norm.push_back(norm);
    rep.bound.push_back(bound);
    if (norm > bound * (1 + 1e-12)) rep.bound_holds = false;
  }
  return rep;
}

}  // namespace lapis::metrics
