#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "core/errors.hpp"
#include "nn/serialize.hpp"
#include "shred/shred.hpp"
#include "support/gradcheck.hpp"
#include "temporal/temporal.hpp"

using namespace lapis;
using namespace lapis::temporal;
using lapis::testing::gradcheck_parameters;
using lapis::testing::random_tensor;

namespace {

Seq2SeqConfig small_seq2seq(std::size_t window = 3, std::size_t horizon = 5) {
  Seq2SeqConfig c;
  c.latent_dim = 6;
  c.hidden = 8;
  c.window = window;
  c.horizon = horizon;
  return c;
}

Tensor<float> to_float(const Tensor<double>& t) { return t.cast<float>(); }

}  // namespace

TEST_CASE("pad_terminal: shape and replication") {
  Tensor<double> s = Tensor<double>::from_rows({{1, 2, 3}});
  auto one = pad_terminal(s, 1);
  CHECK(one.storage() == s.storage());
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 1 + rng() % 9, l = 1 + rng() % 40;
    auto frame = random_tensor({1, p}, rng);
    auto pad = pad_terminal(frame, l);
    REQUIRE(pad.rows() == l);
    REQUIRE(pad.cols() == p);
    for (std::size_t r = 0; r < l; ++r)
      for (std::size_t j = 0; j < p; ++j) CHECK(pad(r, j) == frame[j]);
  }
  CHECK_THROWS_AS(pad_terminal(s, 0), InvalidArgument);
}

TEST_CASE("augment_training_padding: disabled and tail equality") {
  std::mt19937_64 rng(2);
  auto s = random_tensor({7, 3}, rng);
  CHECK(shred::augment_training_padding(s, 0).storage() == s.storage());
  auto a = shred::augment_training_padding(s, 4);
  REQUIRE(a.rows() == 11);
  for (std::size_t r = 6; r < 11; ++r)
    for (std::size_t j = 0; j < 3; ++j) CHECK(a(r, j) == s(6, j));
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(a[i] == s[i]);
}

TEST_CASE("encode_padded_terminal: constant trajectory and frozen requirement") {
  auto c = shred::ShredConfig::defaults(shred::Mode::seq2seq, 3, 8);
  c.hidden = 6;
  c.decoder_hidden = {10};
  shred::ShredModel<float> m(c, 3);
  Tensor<float> frame = Tensor<float>::from_rows({{0.2f, 0.7f, 0.4f}});
  auto pad = pad_terminal(frame, 12);
  CHECK_THROWS_AS(encode_padded_terminal(m, pad), StateError);
  m.freeze();
  auto z = encode_padded_terminal(m, pad);
  auto full = m.encode(pad);
  REQUIRE(z.cols() == 12);
  for (std::size_t j = 0; j < 12; ++j) CHECK(z(0, j) == full(11, j));
  auto z1 = encode_padded_terminal(m, pad_terminal(frame, 1));
  for (float v : z1.values()) CHECK(std::isfinite(v));

  // saturation: |z(L) - z(2L)| shrinks as L grows
  double previous = 1e300;
  for (std::size_t l : {8, 16, 32, 64}) {
    auto a = encode_padded_terminal(m, pad_terminal(frame, l));
    auto b = encode_padded_terminal(m, pad_terminal(frame, 2 * l));
    double d = 0;
    for (std::size_t j = 0; j < a.size(); ++j) d += (double(a[j]) - b[j]) * (double(a[j]) - b[j]);
    d = std::sqrt(d);
    CHECK(d <= previous);
    previous = d;
  }
  CHECK(previous < 1e-4);
}

TEST_CASE("latent stats: standard data, round trip, degenerate dimension") {
  std::mt19937_64 rng(4);
  auto z = to_float(random_tensor({50, 4}, rng, -3, 5));
  for (std::size_t t = 0; t < 50; ++t) z(t, 2) = 1.5f;
  auto stats = LatentStats::fit({&z});
  auto n = stats.normalize(z);
  for (std::size_t t = 0; t < 50; ++t) CHECK(n(t, 2) == 0.0f);
  auto back = stats.denormalize(n);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(back[i] == doctest::Approx(z[i]).epsilon(1e-6));
  auto again = LatentStats::fit({&n});
  auto nn2 = again.normalize(n);
  for (std::size_t i = 0; i < n.size(); ++i) CHECK(nn2[i] == doctest::Approx(n[i]).epsilon(1e-6));
}

TEST_CASE("recon_loss: trivial values and loop oracle") {
  Tensor<double> a({2, 3}, 0.0), b({2, 3}, 0.0);
  CHECK(recon_loss(a, a) == 0.0);
  b(1, 2) = 1.0;
  CHECK(recon_loss(a, b) == 0.5);
  std::mt19937_64 rng(5);
  auto x = random_tensor({9, 4}, rng), y = random_tensor({9, 4}, rng);
  double ref = 0;
  for (std::size_t t = 0; t < 9; ++t)
    for (std::size_t j = 0; j < 4; ++j) ref += (x(t, j) - y(t, j)) * (x(t, j) - y(t, j));
  CHECK(recon_loss(x, y) == doctest::Approx(ref / 9).epsilon(1e-12));
}

TEST_CASE("shape_loss: zero, shift invariance, loop oracle") {
  std::mt19937_64 rng(6);
  auto x = random_tensor({8, 5}, rng), y = random_tensor({8, 5}, rng);
  CHECK(shape_loss(x, x) == 0.0);

  // dyadic values keep every sum exact, so the invariance is bit-exact
  std::uniform_int_distribution<int> q(-64, 64);
  Tensor<double> a({8, 5}), b({8, 5});
  for (auto& v : a.values()) v = q(rng) / 8.0;
  for (auto& v : b.values()) v = q(rng) / 8.0;
  auto shifted = a;
  const double shift[] = {3.0, -2.0, 0.5, 17.0, -0.25};
  for (std::size_t t = 0; t < 8; ++t)
    for (std::size_t j = 0; j < 5; ++j) shifted(t, j) += shift[j];
  CHECK(shape_loss(shifted, b) == shape_loss(a, b));
  CHECK(shape_loss(shifted, a) == 0.0);

  double diff = 0;
  for (std::size_t t = 0; t + 1 < 8; ++t)
    for (std::size_t j = 0; j < 5; ++j) {
      const double e = (x(t + 1, j) - x(t, j)) - (y(t + 1, j) - y(t, j));
      diff += e * e;
    }
  diff /= 7;
  double var = 0;
  for (std::size_t j = 0; j < 5; ++j) {
    double mx = 0, my = 0, vx = 0, vy = 0;
    for (std::size_t t = 0; t < 8; ++t) {
      mx += x(t, j) / 8;
      my += y(t, j) / 8;
    }
    for (std::size_t t = 0; t < 8; ++t) {
      vx += (x(t, j) - mx) * (x(t, j) - mx) / 8;
      vy += (y(t, j) - my) * (y(t, j) - my) / 8;
    }
    var += (vx - vy) * (vx - vy);
  }
  CHECK(shape_loss(x, y) == doctest::Approx(diff + 0.5 * var).epsilon(1e-12));
  Tensor<double> one_x = x.slice_rows(0, 1), one_y = y.slice_rows(0, 1);
  CHECK(shape_loss(one_x, one_y) == 0.0);
}

TEST_CASE("compress: fixed width, zero weights, order sensitivity") {
  Seq2SeqTemporalModel<double> m(small_seq2seq(), 7);
  std::mt19937_64 rng(8);
  for (std::size_t w : {1, 5, 14}) {
    auto s = m.compress(random_tensor({w + 1, 6}, rng));
    CHECK(s.rows() == 1);
    CHECK(s.cols() == 6);
  }
  auto z = random_tensor({5, 6}, rng);
  auto perm = z;
  for (std::size_t j = 0; j < 6; ++j) std::swap(perm(0, j), perm(3, j));
  auto a = m.compress(z), b = m.compress(perm);
  bool differs = false;
  for (std::size_t j = 0; j < 6; ++j) differs |= a[j] != b[j];
  CHECK(differs);
  Seq2SeqTemporalModel<double> zero(small_seq2seq(), 7);
  for (auto* p : zero.parameters()) p->value.fill(0.0);
  auto summary = zero.compress(z);
  for (double v : summary.values()) CHECK(v == 0.0);
}

TEST_CASE("positional encoding: degenerate length, endpoints, affine spacing") {
  Seq2SeqTemporalModel<double> m(small_seq2seq(), 9);
  std::mt19937_64 rng(10);
  auto s = random_tensor({1, 6}, rng);
  auto params = m.parameters();
  const Parameter<double>* w = nullptr;
  const Parameter<double>* b = nullptr;
  for (auto* p : params) {
    if (p->name == "proj.weight") w = p;
    if (p->name == "proj.bias") b = p;
  }
  REQUIRE(w != nullptr);
  REQUIRE(b != nullptr);
  auto proj = [&](double pos) {
    std::vector<double> out(6);
    for (std::size_t j = 0; j < 6; ++j) {
      double acc = b->value[j];
      for (std::size_t i = 0; i < 6; ++i) acc += s[i] * w->value(i, j);
      acc += pos * w->value(6, j);
      out[j] = acc;
    }
    return out;
  };
  auto one = m.positional(s, 1);
  REQUIRE(one.rows() == 1);
  auto p0 = proj(0.0);
  for (std::size_t j = 0; j < 6; ++j) CHECK(one(0, j) == doctest::Approx(p0[j]).epsilon(1e-14));
  auto many = m.positional(s, 7);
  REQUIRE(many.rows() == 7);
  auto p1 = proj(1.0);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(many(0, j) == doctest::Approx(p0[j]).epsilon(1e-14));
    CHECK(many(6, j) == doctest::Approx(p1[j]).epsilon(1e-14));
    const double step = many(1, j) - many(0, j);
    for (std::size_t t = 1; t + 1 < 7; ++t) CHECK(many(t + 1, j) - many(t, j) == doctest::Approx(step).epsilon(1e-10));
  }
}

TEST_CASE("temporal_generate: length, determinism, horizon check") {
  for (std::size_t horizon : {1, 4, 11}) {
    Seq2SeqTemporalModel<float> m(small_seq2seq(3, horizon), 11);
    std::mt19937_64 rng(12);
    auto z = to_float(random_tensor({4, 6}, rng));
    auto a = m.generate(z, horizon);
    auto b = m.generate(z, horizon);
    CHECK(a.rows() == horizon);
    CHECK(a.cols() == 6);
    CHECK(a.storage() == b.storage());
    CHECK_THROWS_AS(m.generate(z, horizon + 1), InvalidArgument);
  }
}

TEST_CASE("seq2seq temporal model gradient check (d_z 6, d_h 8, T 12)") {
  Seq2SeqTemporalModel<double> m(small_seq2seq(3, 9), 13);
  std::mt19937_64 rng(14);
  auto obs = random_tensor({4, 6}, rng);
  auto target = random_tensor({9, 6}, rng);
  std::vector<Tensor<double>> ts;
  for (std::size_t t = 0; t < 9; ++t) ts.push_back(target.slice_rows(t, t + 1));
  double worst = gradcheck_parameters(
      [&](Tape<double>& tape) {
        auto in = nn::rows_as_steps(tape, obs);
        auto out = m.generate(tape, in);
        std::span<const Var<double>> ps(out);
        std::span<const Tensor<double>> tt(ts);
        return ad::add(recon_loss<double>(ps, tt), ad::scale(shape_loss<double>(ps, tt), 0.1));
      },
      m.parameters());
  CHECK(worst < 1e-4);
}

TEST_CASE("AR model gradient check") {
  ArConfig c;
  c.latent_dim = 6;
  c.hidden = 8;
  c.window = 5;
  ARModel<double> m(c, 15);
  std::mt19937_64 rng(16);
  auto w = random_tensor({5, 6}, rng);
  auto y = random_tensor({1, 6}, rng);
  double worst = gradcheck_parameters(
      [&](Tape<double>& tape) {
        auto in = nn::rows_as_steps(tape, w);
        return ad::sum(ad::square(ad::sub(m.step(tape, in), tape.constant(y))));
      },
      m.parameters());
  CHECK(worst < 1e-4);
}

TEST_CASE("lambda_s = 0 leaves the pure reconstruction gradient") {
  Seq2SeqTemporalModel<float> m(small_seq2seq(2, 6), 17);
  std::mt19937_64 rng(18);
  LatentSample s{to_float(random_tensor({3, 6}, rng)), to_float(random_tensor({6, 6}, rng))};
  m.lambda_shape = 0;
  auto grads = [&](bool through_train_loss) {
    for (auto* p : m.parameters()) p->zero_grad();
    Tape<float> tape;
    auto in = nn::rows_as_steps(tape, s.observed);
    auto out = m.generate(tape, in);
    std::vector<Tensor<float>> ts;
    for (std::size_t t = 0; t < 6; ++t) ts.push_back(s.target.slice_rows(t, t + 1));
    std::span<const Var<float>> ps(out);
    std::span<const Tensor<float>> tt(ts);
    Var<float> loss = recon_loss<float>(ps, tt);
    if (through_train_loss) loss = ad::add(loss, ad::scale(shape_loss<float>(ps, tt), float(m.lambda_shape)));
    tape.backward(loss);
    std::vector<Tensor<float>> g;
    for (auto* p : m.parameters()) g.push_back(p->grad);
    return g;
  };
  auto a = grads(false), b = grads(true);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].storage() == b[i].storage());
}

TEST_CASE("train_temporal: zero epochs, single-trajectory overfit, determinism") {
  Seq2SeqTemporalModel<float> m(small_seq2seq(2, 8), 19);
  std::vector<LatentSample> train;
  Tensor<float> obs({3, 6}), tgt({8, 6});
  for (std::size_t t = 0; t < 8; ++t)
    for (std::size_t j = 0; j < 6; ++j) tgt(t, j) = float(0.5 * std::sin(0.4 * t + j));
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t j = 0; j < 6; ++j) obs(t, j) = float(0.5 * std::cos(0.3 * t + j));
  train.push_back({obs, tgt});
  auto init = nn::snapshot(m.parameters());
  TemporalTrainOptions o;
  o.epochs = 0;
  train_temporal(m, train, {}, o);
  auto ps = m.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps[i]->value.storage() == init[i].storage());

  o.epochs = 800;
  o.patience = 800;
  o.lr = 3e-3;
  o.seed = 2;
  auto h = train_temporal(m, train, {}, o);
  MESSAGE("overfit combined loss " << h.best_val);
  CHECK(h.best_val < 1e-3);
  CHECK(evaluate_temporal(m, train) == doctest::Approx(h.best_val).epsilon(1e-5));

  o.epochs = 5;
  Seq2SeqTemporalModel<float> a(small_seq2seq(2, 8), 20), b(small_seq2seq(2, 8), 20);
  train_temporal(a, train, {}, o);
  train_temporal(b, train, {}, o);
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.storage() == pb[i]->value.storage());
}

TEST_CASE("ar_step and rollout") {
  ArConfig c;
  c.latent_dim = 4;
  c.hidden = 6;
  c.window = 3;
  ARModel<float> m(c, 21);
  std::mt19937_64 rng(22);
  auto seed = to_float(random_tensor({3, 4}, rng));
  CHECK(m.rollout(seed, 0).rows() == 0);
  auto one = m.rollout(seed, 1);
  auto step = m.ar_step(seed);
  CHECK(one.storage() == step.storage());
  auto short_run = m.rollout(seed, 7);
  auto long_run = m.rollout(seed, 19);
  for (std::size_t i = 0; i < short_run.size(); ++i) CHECK(short_run[i] == long_run[i]);
  CHECK_THROWS_AS(m.ar_step(to_float(random_tensor({2, 4}, rng))), ShapeError);

  ARModel<float> zero(c, 21);
  for (auto* p : zero.parameters()) p->value.fill(0.0f);
  auto params = zero.parameters();
  params.back()->value = Tensor<float>::from_rows({{1, 2, 3, 4}});
  auto z = zero.ar_step(seed);
  for (std::size_t j = 0; j < 4; ++j) CHECK(z[j] == float(j + 1));
}

TEST_CASE("build_ar_dataset: counts and contents") {
  std::mt19937_64 rng(23);
  Tensor<float> a({4, 2}), b({3, 2});
  for (auto& v : a.values()) v = float(rng() % 100);
  for (auto& v : b.values()) v = float(rng() % 100);
  CHECK(build_ar_dataset({&a}, 3).size() == 1);
  CHECK(build_ar_dataset({&b}, 3).empty());
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor<float>> trajs;
    std::size_t expected = 0;
    const std::size_t w = 1 + rng() % 6;
    for (int k = 0; k < 4; ++k) {
      const std::size_t len = 1 + rng() % 20;
      trajs.emplace_back(Shape{len, 2});
      std::size_t brute = 0;
      for (std::size_t s = 0; s + w + 1 <= len; ++s) ++brute;
      expected += brute;
    }
    std::vector<const Tensor<float>*> ptrs;
    for (auto& t : trajs) ptrs.push_back(&t);
    CHECK(build_ar_dataset(ptrs, w).size() == expected);
  }
  auto pairs = build_ar_dataset({&a}, 2);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[1].next(0, 0) == a(3, 0));
  CHECK(pairs[1].window(0, 1) == a(1, 1));
}

TEST_CASE("AR fixed point: constant trajectory is reproduced") {
  ArConfig c;
  c.latent_dim = 3;
  c.hidden = 8;
  c.window = 4;
  ARModel<float> m(c, 24);
  Tensor<float> traj({30, 3});
  for (std::size_t t = 0; t < 30; ++t) {
    traj(t, 0) = 0.5f;
    traj(t, 1) = -1.0f;
    traj(t, 2) = 0.25f;
  }
  auto pairs = build_ar_dataset({&traj}, 4);
  TemporalTrainOptions o;
  o.epochs = 300;
  o.batch = 8;
  o.lr = 3e-3;
  o.patience = 300;
  train_ar(m, pairs, {}, o);
  auto roll = m.rollout(traj.slice_rows(0, 4), 10);
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t j = 0; j < 3; ++j) CHECK(roll(t, j) == doctest::Approx(traj(0, j)).epsilon(0.02).scale(1));
}

TEST_CASE("temporal model files round trip") {
  const auto dir = (std::filesystem::temp_directory_path() / "lapis_temporal_rt").string();
  std::filesystem::remove_all(dir);
  Seq2SeqTemporalModel<float> m(small_seq2seq(4, 7), 25);
  m.stats = LatentStats{{0.5, -1, 2, 0, 0, 1}, {1, 2, 3, 1e-8, 1, 0.5}};
  m.config();
  save_temporal(m, dir);
  CHECK(temporal_kind(dir) == "seq2seq");
  auto back = load_seq2seq_temporal(dir);
  CHECK(back.config().horizon == 7);
  CHECK(back.config().window == 4);
  CHECK(back.stats->std == m.stats->std);
  auto a = m.parameters(), b = back.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value.storage() == b[i]->value.storage());
  CHECK_THROWS_AS(load_ar(dir), IoError);

  ArConfig c;
  c.latent_dim = 6;
  c.window = 3;
  c.hidden = 5;
  ARModel<float> ar(c, 26);
  save_ar(ar, dir + "_ar");
  CHECK(temporal_kind(dir + "_ar") == "ar");
  auto ar2 = load_ar(dir + "_ar");
  auto x = ar.parameters(), y = ar2.parameters();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i]->value.storage() == y[i]->value.storage());
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir + "_ar");
}
