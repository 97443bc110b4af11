#include <doctest.h>

#include <cmath>
#include <random>

#include "json.hpp"
#include "core/errors.hpp"
#include "metrics/metrics.hpp"

using namespace lapis;
using namespace lapis::metrics;

namespace {

Tensor<float> random_frames(std::size_t t, std::size_t n, std::mt19937_64& rng, float lo = -1, float hi = 1) {
  Tensor<float> x({t, n});
  std::uniform_real_distribution<float> d(lo, hi);
  for (auto& v : x.values()) v = d(rng);
  return x;
}

}  // namespace

TEST_CASE("rmse basics and loop oracle") {
  std::mt19937_64 rng(1);
  auto a = random_frames(5, 40, rng);
  CHECK(rmse(a, a) == 0.0);
  Tensor<float> b = a;
  for (auto& v : b.values()) v += 0.5f;
  CHECK(rmse(b, a) == doctest::Approx(0.5).epsilon(1e-6));

  auto c = random_frames(5, 40, rng);
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (double(a[i]) - c[i]) * (double(a[i]) - c[i]);
  CHECK(rmse(a, c) == doctest::Approx(std::sqrt(acc / a.size())).epsilon(1e-12));
}

TEST_CASE("rmse is translation covariant") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> k(-64, 64);
  Tensor<float> p({4, 30}), t({4, 30});
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = k(rng) / 8.0f;
    t[i] = k(rng) / 8.0f;
  }
  Tensor<float> p2 = p, t2 = t;
  for (auto& v : p2.values()) v += 2.0f;
  for (auto& v : t2.values()) v += 2.0f;
  CHECK(rmse(p2, t2) == rmse(p, t));
}

TEST_CASE("data range and nrmse") {
  CHECK(data_range(Tensor<float>({3, 3}, 2.0f)) == 0.0);
  CHECK_THROWS_AS(nrmse(Tensor<float>({3, 3}, 1.0f), Tensor<float>({3, 3}, 2.0f)), InvalidArgument);
  std::mt19937_64 rng(3);
  auto unit = random_frames(3, 50, rng, 0, 1);
  CHECK(data_range(unit) <= 1.0);

  auto case_of = [](double err, double delta) {
    Tensor<float> truth({1, 2});
    truth[0] = 0;
    truth[1] = static_cast<float>(delta);
    Tensor<float> pred = truth;
    for (auto& v : pred.values()) v += static_cast<float>(err);
    return nrmse(pred, truth);
  };
  CHECK(case_of(0.727, 15.94) == doctest::Approx(0.0456).epsilon(1e-3));
  CHECK(case_of(0.179, 4.10) == doctest::Approx(0.0437).epsilon(1e-3));
  auto t = random_frames(2, 9, rng);
  CHECK(nrmse(t, t) == 0.0);
}

TEST_CASE("masked metrics equal metrics on gathered cells") {
  std::mt19937_64 rng(4);
  auto p = random_frames(6, 25, rng);
  auto t = random_frames(6, 25, rng);
  Mask m(25, 0);
  for (std::size_t i = 0; i < 25; i += 3) m[i] = 1;
  Tensor<float> pg({6, 16}), tg({6, 16});
  for (std::size_t r = 0; r < 6; ++r) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < 25; ++i)
      if (!m[i]) {
        pg(r, k) = p(r, i);
        tg(r, k) = t(r, i);
        ++k;
      }
  }
  CHECK(rmse(p, t, m) == rmse(pg, tg));
  CHECK(data_range(t, m) == data_range(tg));
  CHECK(nrmse(p, t, m) == nrmse(pg, tg));
}

TEST_CASE("ssim: identity, symmetry, bounds") {
  std::mt19937_64 rng(5);
  const std::vector<std::size_t> grid{20, 24};
  for (int trial = 0; trial < 5; ++trial) {
    auto a = random_frames(1, 480, rng);
    auto b = random_frames(1, 480, rng);
    CHECK(ssim(a.row(0), a.row(0), grid, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
    const double ab = ssim(a.row(0), b.row(0), grid, 2.0);
    CHECK(ab == ssim(b.row(0), a.row(0), grid, 2.0));
    CHECK(std::abs(ab) <= 1.0);
  }
}

TEST_CASE("ssim: anticorrelated frames score at most zero") {
  const std::vector<std::size_t> grid{16, 16};
  Tensor<float> a({1, 256}), b({1, 256});
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      // Checkerboard texture: every window has (nearly) zero local mean.
      const float sign = (x + y) % 2 ? -1.0f : 1.0f;
      a[y * 16 + x] = sign * (1.0f + 0.5f * std::sin(0.3f * x + 0.2f * y));
      b[y * 16 + x] = -a[y * 16 + x];
    }
  CHECK(ssim(a.row(0), b.row(0), grid, 2.0) <= 0.0);
}

TEST_CASE("ssim: uniform frames reduce to the luminance term") {
  const std::vector<std::size_t> grid{12, 12};
  Tensor<float> a({1, 144}, 0.25f), b({1, 144}, 0.75f);
  const double L = 1.0, c1 = std::pow(0.01 * L, 2);
  const double expected = (2 * 0.25 * 0.75 + c1) / (0.25 * 0.25 + 0.75 * 0.75 + c1);
  const double got = ssim(a.row(0), b.row(0), grid, L);
  CHECK(got < 1.0);
  CHECK(got == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("ssim: masked windows are skipped and 1D frames work") {
  std::mt19937_64 rng(6);
  const std::vector<std::size_t> grid{32, 32};
  auto a = random_frames(1, 1024, rng);
  auto b = random_frames(1, 1024, rng);
  Mask m(1024, 0);
  for (std::size_t y = 14; y < 18; ++y)
    for (std::size_t x = 14; x < 18; ++x) m[y * 32 + x] = 1;
  const double before = ssim(a.row(0), b.row(0), grid, 2.0, m);
  for (std::size_t i = 0; i < 1024; ++i)
    if (m[i]) b[i] = 100.0f;
  CHECK(ssim(a.row(0), b.row(0), grid, 2.0, m) == before);

  auto c = random_frames(1, 64, rng);
  CHECK(ssim(c.row(0), c.row(0), {64}, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(c.row(0), c.row(0), {8, 8}, 2.0), InvalidArgument);
}

TEST_CASE("evaluate: report consistency and json") {
  std::mt19937_64 rng(7);
  sim::FieldSequence truth, pred;
  truth.frames = random_frames(8, 2 * 144, rng);
  truth.grid_shape = {12, 12};
  truth.channels = {"a", "b"};
  pred = truth;
  pred.frames = random_frames(8, 2 * 144, rng);
  std::vector<std::uint8_t> obs(8, 0);
  obs[6] = obs[7] = 1;
  auto r = evaluate(pred, truth, obs);
  CHECK(r.full.nrmse == r.full.rmse / r.full.delta);
  REQUIRE(r.observed);
  REQUIRE(r.generated);
  CHECK(r.channels.size() == 2);
  CHECK(r.channels.at("a").ssim.has_value());
  CHECK(r.frame_rmse.size() == 8);
  auto j = nlohmann::json::parse(to_json(r));
  CHECK(j["nrmse"].get<double>() == j["rmse"].get<double>() / j["delta"].get<double>());
}

TEST_CASE("linear backward sensitivity") {
  auto one = validate_linear_backward({1.0}, 5.0, {1e-3}, {3.0, 5.0});
  CHECK(one.error_norm[0] == doctest::Approx(std::exp(2.0) * 1e-3).epsilon(1e-12));
  CHECK(one.error_norm[1] == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(one.max_modewise_relative_error < 1e-12);
  CHECK(one.bound_holds);

  // Two modes: the bound is attained only when the perturbation sits on the
  // fastest-decaying mode.
  const std::vector<double> g{0.4, 1.3};
  auto aligned = validate_linear_backward(g, 3.0, {0.0, 1e-2}, {0.0, 1.0, 2.0});
  auto mixed = validate_linear_backward(g, 3.0, {1e-2, 1e-2}, {0.0, 1.0, 2.0});
  auto slow = validate_linear_backward(g, 3.0, {1e-2, 0.0}, {0.0, 1.0, 2.0});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(aligned.error_norm[i] == doctest::Approx(aligned.bound[i]).epsilon(1e-12));
    CHECK(mixed.error_norm[i] < mixed.bound[i] * (1 - 1e-6));
    CHECK(slow.error_norm[i] < slow.bound[i] * (1 - 1e-6));
  }
  CHECK(aligned.bound_holds);
  CHECK(mixed.bound_holds);
}
