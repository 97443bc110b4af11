#include <doctest.h>

#include <cmath>
#include <random>

#include "core/errors.hpp"
#include "nn/adam.hpp"
#include "nn/layers.hpp"
#include "support/gradcheck.hpp"

using namespace lapis;
using namespace lapis::nn;
using lapis::testing::gradcheck;
using lapis::testing::gradcheck_parameters;
using lapis::testing::random_tensor;

namespace {

template <typename Net>
void zero_all(Net& net) {
  for (auto* p : net.parameters()) p->value.fill(0.0);
}

}  // namespace

TEST_CASE("lstm: zero weights give zero hiddens") {
  std::mt19937_64 rng(1);
  LstmStack<double> lstm("l", {3, 4, 2, true}, rng);
  zero_all(lstm);
  auto out = lstm.forward(random_tensor({6, 3}, rng));
  CHECK(out.shape() == Shape{6, 8});
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("lstm: single step equals one hand-written cell step") {
  std::mt19937_64 rng(2);
  LstmStack<double> lstm("l", {3, 2, 1, false}, rng);
  auto x = random_tensor({1, 3}, rng);
  auto out = lstm.forward(x);
  const auto& W = lstm.parameters()[0]->value;
  const auto& b = lstm.parameters()[1]->value;
  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  for (std::size_t j = 0; j < 2; ++j) {
    double g[4];
    for (int q = 0; q < 4; ++q) {
      g[q] = b[q * 2 + j];
      for (std::size_t k = 0; k < 3; ++k) g[q] += x[k] * W(k, q * 2 + j);
    }
    const double c = sig(g[0]) * std::tanh(g[2]);
    CHECK(out[j] == doctest::Approx(sig(g[3]) * std::tanh(c)).epsilon(1e-12));
  }
}

TEST_CASE("lstm: output width and forget-gate bias") {
  std::mt19937_64 rng(3);
  for (std::size_t L : {1u, 2u, 9u}) {
    LstmStack<float> bi("b", {2, 5, 2, true}, rng);
    CHECK(bi.forward(Tensor<float>({L, 2}, 0.3f)).cols() == 10);
    LstmStack<float> uni("u", {2, 5, 1, false}, rng);
    CHECK(uni.forward(Tensor<float>({L, 2}, 0.3f)).cols() == 5);
  }
  LstmLayer<double> layer("x", 2, 3, rng);
  for (std::size_t j = 0; j < 12; ++j) CHECK(layer.bias.value[j] == (j >= 3 && j < 6 ? 1.0 : 0.0));
}

TEST_CASE("lstm: width mismatch is rejected") {
  std::mt19937_64 rng(4);
  LstmStack<double> lstm("l", {3, 2, 1, false}, rng);
  CHECK_THROWS_AS(lstm.forward(Tensor<double>({4, 2})), ShapeError);
}

TEST_CASE("bilstm: reversing the input swaps the direction halves") {
  std::mt19937_64 rng(5);
  LstmStack<double> lstm("l", {3, 4, 1, true}, rng);
  // A mirrored copy of the stack: backward weights in the forward slot.
  LstmStack<double> mirror("m", {3, 4, 1, true}, rng);
  auto src = lstm.parameters();
  auto dst = mirror.parameters();
  dst[0]->value = src[2]->value;
  dst[1]->value = src[3]->value;
  dst[2]->value = src[0]->value;
  dst[3]->value = src[1]->value;
  auto x = random_tensor({7, 3}, rng);
  Tensor<double> rev({7, 3});
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t k = 0; k < 3; ++k) rev(t, k) = x(6 - t, k);
  auto a = lstm.forward(x);
  auto b = mirror.forward(rev);
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t j = 0; j < 8; ++j) CHECK(a(t, j) == b(6 - t, (j + 4) % 8));
}

TEST_CASE("bilstm: two-layer gradient check") {
  std::mt19937_64 rng(6);
  LstmStack<double> lstm("l", {3, 4, 2, true}, rng);
  auto x = random_tensor({7, 3}, rng);
  auto params = lstm.parameters();
  double worst = gradcheck_parameters(
      [&](Tape<double>& tape) {
        auto steps = rows_as_steps(tape, x);
        auto out = lstm.forward(tape, steps);
        return ad::sum(ad::concat_rows<double>(out));
      },
      params);
  CHECK(worst < 1e-4);
}

TEST_CASE("lstm cell step gradient w.r.t. inputs") {
  std::mt19937_64 rng(7);
  LstmStack<double> lstm("l", {3, 4, 1, false}, rng);
  auto fn = [&](Tape<double>& tape, const std::vector<Var<double>>& v) {
    const Var<double> seq[] = {v[0]};
    auto out = lstm.forward(tape, seq);
    return ad::sum(ad::square(out[0]));
  };
  CHECK(gradcheck(fn, {random_tensor({1, 3}, rng)}) < 1e-5);
}

TEST_CASE("mlp: identity layer, zero weights and depth") {
  std::mt19937_64 rng(8);
  Mlp<double> id("m", {{3, 3}, Activation::gelu, false}, rng);
  auto ps = id.parameters();
  ps[0]->value = Tensor<double>::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  ps[1]->value.fill(0);
  auto x = random_tensor({2, 3}, rng);
  CHECK(id.forward(x).storage() == x.storage());

  Mlp<double> deep("d", {{3, 6, 5, 2}, Activation::gelu, true}, rng);
  auto dps = deep.parameters();
  for (auto* p : dps) p->value.fill(0);
  dps.back()->value = Tensor<double>::from_rows({{0.25, -1.5}});
  auto y = deep.forward(x);
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(y(r, 0) == 0.25);
    CHECK(y(r, 1) == -1.5);
  }
  CHECK_THROWS_AS(deep.forward(random_tensor({2, 4}, rng)), ShapeError);
}

TEST_CASE("mlp: three-layer gradient check") {
  std::mt19937_64 rng(9);
  for (bool norm : {false, true}) {
    Mlp<double> net("m", {{4, 6, 5, 3}, Activation::gelu, norm}, rng);
    auto x = random_tensor({3, 4}, rng);
    double worst = gradcheck_parameters(
        [&](Tape<double>& tape) { return ad::sum(ad::square(net.forward(tape, tape.constant(x)))); },
        net.parameters());
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("layer norm statistics") {
  std::mt19937_64 rng(10);
  Tape<double> tape;
  auto x = random_tensor({8, 32}, rng, -5, 5);
  auto y = ad::layer_norm(tape.constant(x), 1e-6).value();
  for (std::size_t r = 0; r < 8; ++r) {
    double m = 0, v = 0;
    for (double e : y.row(r)) m += e;
    m /= 32;
    for (double e : y.row(r)) v += (e - m) * (e - m);
    v /= 32;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1) < 1e-5);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Parameter<double> p("p", Tensor<double>({2, 2}, 0.7));
  Adam<double> opt({&p}, {});
  opt.step();
  for (double v : p.value.values()) CHECK(v == 0.7);
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam: first step with a constant gradient moves by lr") {
  Parameter<double> p("p", Tensor<double>({1, 3}, 1.0));
  Adam<double> opt({&p}, {});
  p.grad = Tensor<double>(Shape{1, 3}, std::vector<double>{0.5, -2.0, 1e3});
  opt.step();
  CHECK(p.value[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-7));
  CHECK(p.value[1] == doctest::Approx(1.0 + 1e-3).epsilon(1e-7));
  CHECK(p.value[2] == doctest::Approx(1.0 - 1e-3).epsilon(1e-7));
}

TEST_CASE("adam: quadratic bowl converges") {
  Parameter<double> p("x", Tensor<double>(Shape{1, 2}, std::vector<double>{1, 1}));
  Adam<double> opt({&p}, {.lr = 1e-2});
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    Tape<double> tape;
    tape.backward(ad::sum(ad::square(tape.parameter(p))));
    opt.step();
  }
  CHECK(std::hypot(p.value[0], p.value[1]) < 1e-3);
}

TEST_CASE("adam: NaN gradients abort without touching anything") {
  Parameter<double> a("a", Tensor<double>({1, 2}, 1.0));
  Parameter<double> b("b", Tensor<double>({1, 2}, 1.0));
  Adam<double> opt({&a, &b}, {});
  a.grad.fill(1.0);
  b.grad[1] = std::nan("");
  CHECK_THROWS_AS(opt.step(), NumericalError);
  CHECK(a.value[0] == 1.0);
  CHECK(opt.steps() == 0);
  b.grad[1] = 0;
  b.frozen = true;
  CHECK_THROWS_AS(opt.step(), StateError);
}
