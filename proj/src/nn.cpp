#include <cmath>
#include <string>

#include "c2dn/error.hpp"
#include "c2dn/nn.hpp"

namespace c2dn::nn {
namespace {

void check_bn_channels(const Tensor4& input, const BatchNormParams& params) {
  if (input.channels() != params.channels() ||
      params.beta_shift.size() != params.channels() ||
      params.running_mean.size() != params.channels() ||
      params.running_var.size() != params.channels()) {
    throw_shape("batchnorm2d: input has " + std::to_string(input.channels()) +
                " channels, parameters have " +
                std::to_string(params.channels()));
  }
  if (!(params.epsilon > 0.0)) throw_config("batchnorm2d: epsilon must be > 0");
}

Tensor4 apply_affine(const Tensor4& input, const BatchNormParams& params,
                     const std::vector<double>& mean,
                     const std::vector<double>& inv_std, Tensor4* normalized) {
  Tensor4 out(input.batch(), input.channels(), input.height(), input.width());
  if (normalized != nullptr) *normalized = out;
  for (std::size_t n = 0; n < input.batch(); ++n) {
    for (std::size_t c = 0; c < input.channels(); ++c) {
      const auto src = input.channel_plane(n, c);
      auto dst = out.channel_plane(n, c);
      const double g = params.gamma[c];
      const double b = params.beta_shift[c];
      for (std::size_t i = 0; i < src.size(); ++i) {
        const double xhat = (src[i] - mean[c]) * inv_std[c];
        if (normalized != nullptr) normalized->channel_plane(n, c)[i] = xhat;
        dst[i] = g * xhat + b;
      }
    }
  }
  return out;
}

}  // namespace

Tensor4 batchnorm2d(const Tensor4& input, BatchNormParams& params, Mode mode,
                    BatchNormCache* cache) {
  check_bn_channels(input, params);
  const std::size_t channels = input.channels();
  std::vector<double> mean(channels, 0.0);
  std::vector<double> inv_std(channels, 0.0);

  if (mode == Mode::Eval) {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = params.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(params.running_var[c] + params.epsilon);
    }
  } else {
    const double count = static_cast<double>(input.batch() * input.plane());
    if (count == 0.0) throw_shape("batchnorm2d: empty input");
    for (std::size_t c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (std::size_t n = 0; n < input.batch(); ++n) {
        for (double v : input.channel_plane(n, c)) sum += v;
      }
      const double mu = sum / count;
      double sq = 0.0;
      for (std::size_t n = 0; n < input.batch(); ++n) {
        for (double v : input.channel_plane(n, c)) sq += (v - mu) * (v - mu);
      }
      const double var = sq / count;
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + params.epsilon);
      params.running_mean[c] =
          (1.0 - params.momentum) * params.running_mean[c] +
          params.momentum * mu;
      params.running_var[c] =
          (1.0 - params.momentum) * params.running_var[c] +
          params.momentum * var;
    }
  }

  if (cache == nullptr) return apply_affine(input, params, mean, inv_std, nullptr);
  cache->mode = mode;
  cache->inv_std = inv_std;
  return apply_affine(input, params, mean, inv_std, &cache->normalized);
}

Tensor4 batchnorm2d_eval(const Tensor4& input, const BatchNormParams& params) {
  check_bn_channels(input, params);
  std::vector<double> inv_std(params.channels());
  for (std::size_t c = 0; c < params.channels(); ++c) {
    inv_std[c] = 1.0 / std::sqrt(params.running_var[c] + params.epsilon);
  }
  return apply_affine(input, params, params.running_mean, inv_std, nullptr);
}

BatchNormGrads batchnorm2d_grad(const Tensor4& grad_out,
                                const BatchNormCache& cache,
                                const BatchNormParams& params) {
  const Tensor4& xhat = cache.normalized;
  if (!grad_out.same_shape(xhat) || xhat.channels() != params.channels()) {
    throw_shape("batchnorm2d_grad: grad_out " + grad_out.shape_string() +
                " does not match cached activation " + xhat.shape_string());
  }
  const std::size_t channels = params.channels();
  BatchNormGrads g{Tensor4(grad_out.batch(), channels, grad_out.height(),
                           grad_out.width()),
                   std::vector<double>(channels, 0.0),
                   std::vector<double>(channels, 0.0)};
  const double count = static_cast<double>(grad_out.batch() * grad_out.plane());

  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < grad_out.batch(); ++n) {
      const auto dy = grad_out.channel_plane(n, c);
      const auto xh = xhat.channel_plane(n, c);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xh[i];
      }
    }
    g.beta_shift[c] = sum_dy;
    g.gamma[c] = sum_dy_xhat;

    const double scale = params.gamma[c] * cache.inv_std[c];
    const double mean_dy = sum_dy / count;
    const double mean_dy_xhat = sum_dy_xhat / count;
    for (std::size_t n = 0; n < grad_out.batch(); ++n) {
      const auto dy = grad_out.channel_plane(n, c);
      const auto xh = xhat.channel_plane(n, c);
      auto dx = g.input.channel_plane(n, c);
      if (cache.mode == Mode::Eval) {
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = scale * dy[i];
      } else {
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dx[i] = scale * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
      }
    }
  }
  return g;
}

double elu(double x) noexcept { return x > 0.0 ? x : std::expm1(x); }

double elu_derivative(double x) noexcept {
  return x > 0.0 ? 1.0 : std::exp(x);
}

Tensor4 elu(const Tensor4& x) {
  Tensor4 y = x;
  for (double& v : y.data()) v = elu(v);
  return y;
}

Tensor4 elu_grad(const Tensor4& grad_out, const Tensor4& pre_activation) {
  if (!grad_out.same_shape(pre_activation)) {
    throw_shape("elu_grad: shape mismatch");
  }
  Tensor4 g = grad_out;
  auto gd = g.data();
  const auto pre = pre_activation.data();
  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] *= elu_derivative(pre[i]);
  return g;
}

LossAndGrad mse_loss(const Tensor4& pred, const Tensor4& target) {
  if (!pred.same_shape(target)) {
    throw_shape("mse_loss: pred " + pred.shape_string() + " vs target " +
                target.shape_string());
  }
  if (pred.size() == 0) throw_shape("mse_loss: empty tensors");
  LossAndGrad out{0.0, Tensor4(pred.batch(), pred.channels(), pred.height(),
                               pred.width())};
  const double n = static_cast<double>(pred.size());
  const auto p = pred.data();
  const auto t = target.data();
  auto g = out.grad.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    sum += d * d;
    g[i] = 2.0 * d / n;
  }
  out.loss = sum / n;
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state) {
  if (params.size() != grads.size() ||
      state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw_shape("adam_step: parameter, gradient and moment sizes differ");
  }
  if (!(state.beta1 >= 0.0 && state.beta1 < 1.0 && state.beta2 >= 0.0 &&
        state.beta2 < 1.0)) {
    throw_config("adam_step: betas must lie in [0, 1)");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace c2dn::nn
