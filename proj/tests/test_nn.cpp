#include <cmath>

#include "c2dn/error.hpp"
#include "c2dn/nn.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace c2dn;
using namespace c2dn::nn;

namespace {

ConvLayerParams random_conv(std::size_t in, std::size_t out, std::uint64_t seed) {
  auto layer = ConvLayerParams::for_conv(in, out, 3);
  layer.weights = support::random_tensor(out, in, 3, 3, seed);
  layer.bias = support::random_vector(out, seed + 1);
  return layer;
}

ConvLayerParams random_transpose(std::size_t in, std::size_t out,
                                 std::uint64_t seed) {
  auto layer = ConvLayerParams::for_transpose(in, out, 3);
  layer.weights = support::random_tensor(in, out, 3, 3, seed);
  layer.bias = support::random_vector(out, seed + 1);
  return layer;
}

}  // namespace

TEST_CASE("conv2d hand-computed and trivial kernels") {
  Tensor4 x(1, 1, 3, 3, 1.0);
  auto layer = ConvLayerParams::for_conv(1, 1, 3);
  layer.weights.fill(1.0);
  const Tensor4 y = conv2d(x, layer);
  const double expect[9] = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  for (std::size_t i = 0; i < 9; ++i) CHECK(y.data()[i] == expect[i]);

  const Tensor4 r = support::random_tensor(1, 1, 5, 4, 3);
  layer.weights.fill(0.0);
  layer.weights(0, 0, 1, 1) = 1.0;
  CHECK(conv2d(r, layer) == r);

  layer.weights.fill(0.0);
  layer.bias = {0.75};
  const Tensor4 flat = conv2d(r, layer);
  for (double v : flat.data()) CHECK(v == 0.75);

  auto wrong = ConvLayerParams::for_conv(2, 1, 3);
  CHECK_THROWS_AS(conv2d(r, wrong), Error);
}

TEST_CASE("conv2d is linear and its gradient is the adjoint") {
  auto layer = random_conv(2, 3, 11);
  layer.bias.assign(3, 0.0);
  const Tensor4 x = support::random_tensor(2, 2, 6, 5, 12);
  const Tensor4 z = support::random_tensor(2, 2, 6, 5, 13);
  Tensor4 combo(2, 2, 6, 5);
  for (std::size_t i = 0; i < combo.size(); ++i) {
    combo.data()[i] = 0.3 * x.data()[i] - 1.7 * z.data()[i];
  }
  const Tensor4 yx = conv2d(x, layer), yz = conv2d(z, layer);
  const Tensor4 yc = conv2d(combo, layer);
  for (std::size_t i = 0; i < yc.size(); ++i) {
    CHECK(std::abs(yc.data()[i] - (0.3 * yx.data()[i] - 1.7 * yz.data()[i])) <
          1e-10);
  }
  const Tensor4 u = support::random_tensor(2, 3, 6, 5, 14);
  const auto g = conv2d_grad(u, x, layer);
  const double lhs = dot(yx, u), rhs = dot(x, g.input);
  CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
}

TEST_CASE("conv2d gradients match finite differences") {
  auto layer = random_conv(2, 3, 21);
  Tensor4 x = support::random_tensor(1, 2, 5, 5, 22);
  const Tensor4 u = support::random_tensor(1, 3, 5, 5, 23);
  const auto g = conv2d_grad(u, x, layer);
  auto objective = [&] { return dot(conv2d(x, layer), u); };
  CHECK(support::rel_error(g.input.data(),
                           support::numeric_gradient(x.data(), objective)) < 1e-6);
  CHECK(support::rel_error(g.weights.data(),
                           support::numeric_gradient(layer.weights.data(),
                                                     objective)) < 1e-6);
  CHECK(support::rel_error(g.bias, support::numeric_gradient(
                                       std::span<double>(layer.bias),
                                       objective)) < 1e-6);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (double v : u.channel_plane(0, c)) s += v;
    CHECK(g.bias[c] == doctest::Approx(s).epsilon(1e-12));
  }
  const auto zero = conv2d_grad(Tensor4(1, 3, 5, 5), x, layer);
  for (double v : zero.input.data()) CHECK(v == 0.0);
  for (double v : zero.weights.data()) CHECK(v == 0.0);
  for (double v : zero.bias) CHECK(v == 0.0);
  CHECK_THROWS_AS(conv2d_grad(Tensor4(1, 3, 4, 5), x, layer), Error);
}

TEST_CASE("conv_transpose2d identity, flip equivalence and gradient") {
  const Tensor4 x = support::random_tensor(1, 2, 4, 4, 31);
  auto delta = ConvLayerParams::for_transpose(2, 2, 3);
  delta.weights(0, 0, 1, 1) = 1.0;
  delta.weights(1, 1, 1, 1) = 1.0;
  CHECK(conv_transpose2d(x, delta) == x);

  const auto layer = random_transpose(2, 3, 32);
  ConvLayerParams flipped;
  flipped.weights = flip_hw_swap_io(layer.weights);
  flipped.bias = layer.bias;
  const Tensor4 a = conv_transpose2d(x, layer);
  const Tensor4 b = conv2d(x, flipped);
  REQUIRE(a.same_shape(b));
  CHECK(support::max_abs_diff(a.data(), b.data()) < 1e-12);

  // Adjoint of conv2d with the same weight tensor.
  ConvLayerParams fwd;
  fwd.weights = layer.weights;
  fwd.bias.assign(layer.weights.batch(), 0.0);
  ConvLayerParams tr = layer;
  tr.bias.assign(tr.bias.size(), 0.0);
  const Tensor4 v = support::random_tensor(1, 3, 4, 4, 33);
  CHECK(dot(conv2d(v, fwd), x) ==
        doctest::Approx(dot(v, conv_transpose2d(x, tr))).epsilon(1e-12));

  auto l2 = layer;
  Tensor4 xin = x;
  const Tensor4 u = support::random_tensor(1, 3, 4, 4, 34);
  const auto g = conv_transpose2d_grad(u, xin, l2);
  auto objective = [&] { return dot(conv_transpose2d(xin, l2), u); };
  CHECK(support::rel_error(g.input.data(),
                           support::numeric_gradient(xin.data(), objective)) < 1e-6);
  CHECK(support::rel_error(g.weights.data(), support::numeric_gradient(
                                                 l2.weights.data(), objective)) <
        1e-6);
  CHECK(support::rel_error(g.bias, support::numeric_gradient(
                                       std::span<double>(l2.bias), objective)) <
        1e-6);
}

TEST_CASE("primitives preserve spatial dims for any size") {
  for (std::size_t h : {1u, 2u, 3u, 7u}) {
    for (std::size_t w : {1u, 4u, 9u}) {
      const Tensor4 x = support::random_tensor(2, 2, h, w, h * 10 + w);
      CHECK(conv2d(x, random_conv(2, 3, 1)).dims() ==
            std::array<std::size_t, 4>{2, 3, h, w});
      CHECK(conv_transpose2d(x, random_transpose(2, 1, 2)).dims() ==
            std::array<std::size_t, 4>{2, 1, h, w});
      BatchNormParams bn(2);
      CHECK(batchnorm2d(x, bn, Mode::Train).dims() == x.dims());
      CHECK(elu(x).dims() == x.dims());
    }
  }
}

TEST_CASE("batchnorm train statistics, eval mode and running stats") {
  const Tensor4 x = support::random_tensor(3, 2, 4, 5, 41, -2.0, 5.0);
  BatchNormParams bn(2);
  const Tensor4 y = batchnorm2d(x, bn, Mode::Train);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0, m_in = 0.0, v_in = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < 3; ++n) {
      for (double v : y.channel_plane(n, c)) mean += v;
      for (double v : x.channel_plane(n, c)) m_in += v;
      count += 20;
    }
    mean /= count;
    m_in /= count;
    double var = 0.0;
    for (std::size_t n = 0; n < 3; ++n) {
      for (double v : y.channel_plane(n, c)) var += (v - mean) * (v - mean);
      for (double v : x.channel_plane(n, c)) v_in += (v - m_in) * (v - m_in);
    }
    var /= count;
    v_in /= count;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(v_in / (v_in + 1e-5)).epsilon(1e-12));
    CHECK(bn.running_mean[c] == doctest::Approx(0.1 * m_in).epsilon(1e-12));
    CHECK(bn.running_var[c] == doctest::Approx(0.9 + 0.1 * v_in).epsilon(1e-12));
  }

  BatchNormParams fresh(2);
  const BatchNormParams before = fresh;
  const Tensor4 e1 = batchnorm2d(x, fresh, Mode::Eval);
  const Tensor4 e2 = batchnorm2d_eval(x, fresh);
  CHECK(e1 == e2);
  CHECK(fresh.running_mean == before.running_mean);
  CHECK(fresh.running_var == before.running_var);
  const double factor = 1.0 / std::sqrt(1.0 + 1e-5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(e1.data()[i] == doctest::Approx(x.data()[i] * factor).epsilon(1e-14));
  }

  // batch of one, single channel: statistics over H x W
  BatchNormParams one(1);
  const Tensor4 single = support::random_tensor(1, 1, 3, 3, 42);
  CHECK(batchnorm2d(single, one, Mode::Train).all_finite());
  CHECK_THROWS_AS(batchnorm2d(single, bn, Mode::Train), Error);
}

TEST_CASE("batchnorm gradient matches finite differences") {
  Tensor4 x = support::random_tensor(2, 2, 3, 3, 51);
  BatchNormParams bn(2);
  bn.gamma = {1.3, -0.7};
  bn.beta_shift = {0.2, 0.5};
  const Tensor4 u = support::random_tensor(2, 2, 3, 3, 52);
  BatchNormCache cache;
  BatchNormParams work = bn;
  batchnorm2d(x, work, Mode::Train, &cache);
  const auto g = batchnorm2d_grad(u, cache, bn);
  BatchNormParams p = bn;
  auto objective = [&] {
    BatchNormParams scratch = p;
    return dot(batchnorm2d(x, scratch, Mode::Train), u);
  };
  CHECK(support::rel_error(g.input.data(),
                           support::numeric_gradient(x.data(), objective)) < 1e-6);
  CHECK(support::rel_error(g.gamma, support::numeric_gradient(
                                        std::span<double>(p.gamma), objective)) <
        1e-6);
  CHECK(support::rel_error(g.beta_shift,
                           support::numeric_gradient(
                               std::span<double>(p.beta_shift), objective)) <
        1e-6);

  // eval-mode gradient is the per-channel scale
  BatchNormParams ev = bn;
  ev.running_mean = {0.3, -0.1};
  ev.running_var = {2.0, 0.5};
  BatchNormCache ecache;
  Tensor4 xe = x;
  batchnorm2d(xe, ev, Mode::Eval, &ecache);
  const auto ge = batchnorm2d_grad(u, ecache, ev);
  auto eval_obj = [&] { return dot(batchnorm2d_eval(xe, ev), u); };
  CHECK(support::rel_error(ge.input.data(),
                           support::numeric_gradient(xe.data(), eval_obj)) < 1e-6);
}

TEST_CASE("elu values and gradient") {
  CHECK(elu(0.0) == 0.0);
  CHECK(elu(2.0) == 2.0);
  CHECK(elu(-1.0) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(elu(-1.0) == doctest::Approx(-0.6321206).epsilon(1e-7));
  Tensor4 x = support::random_tensor(1, 2, 3, 3, 61, -2.0, 2.0);
  const Tensor4 u = support::random_tensor(1, 2, 3, 3, 62);
  const Tensor4 g = elu_grad(u, x);
  auto objective = [&] { return dot(elu(x), u); };
  CHECK(support::rel_error(g.data(), support::numeric_gradient(x.data(),
                                                               objective)) < 1e-6);
}

TEST_CASE("mse loss and gradient") {
  const Tensor4 t = support::random_tensor(2, 1, 3, 4, 71);
  const auto same = mse_loss(t, t);
  CHECK(same.loss == 0.0);
  for (double v : same.grad.data()) CHECK(v == 0.0);

  Tensor4 p = t;
  for (double& v : p.data()) v += 0.3;
  CHECK(mse_loss(p, t).loss == doctest::Approx(0.09).epsilon(1e-12));

  p = support::random_tensor(2, 1, 3, 4, 72);
  const auto lg = mse_loss(p, t);
  auto objective = [&] { return mse_loss(p, t).loss; };
  const auto num = support::numeric_gradient(p.data(), objective);
  CHECK(support::max_abs_diff(lg.grad.data(), num) < 1e-8);
  CHECK_THROWS_AS(mse_loss(Tensor4(1, 1, 2, 2), t), Error);
}

TEST_CASE("adam update rules") {
  std::vector<double> p{0.5, -1.0};
  AdamState s(2, 1e-3, 0.9, 0.999, 1e-8);
  adam_step(p, std::vector<double>{0.0, 0.0}, s);
  CHECK(p == std::vector<double>{0.5, -1.0});
  CHECK(s.step_count == 1);

  std::vector<double> q{0.0};
  AdamState t(1, 1e-3, 0.9, 0.999, 1e-8);
  adam_step(q, std::vector<double>{1.0}, t);
  CHECK(q[0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  const double after_one = q[0];
  adam_step(q, std::vector<double>{1.0}, t);
  CHECK(q[0] < after_one);
  for (double v : t.second_moment) CHECK(v >= 0.0);

  AdamState bad(2, 1e-3, 0.9, 0.999, 1e-8);
  CHECK_THROWS_AS(adam_step(q, std::vector<double>{1.0}, bad), Error);
}
