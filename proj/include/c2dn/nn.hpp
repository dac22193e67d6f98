#pragma once

// Network primitives with hand-derived gradients. Every layer is stride 1
// with zero "same" padding, so spatial dimensions are preserved for any
// H, W >= 1.

#include <cstdint>
#include <span>
#include <vector>

#include "c2dn/tensor.hpp"

namespace c2dn::nn {

/// Convolution weights (out_ch, in_ch, k, k) and one bias per output
/// channel of the layer that uses them.
///
/// conv2d treats `weights` as mapping in_ch -> out_ch. conv_transpose2d uses
/// the same array as the adjoint of that conv2d, i.e. mapping
/// out_ch -> in_ch; its bias then has in_ch entries.
struct ConvLayerParams {
  Tensor4 weights;
  std::vector<double> bias;

  std::size_t out_channels() const noexcept { return weights.batch(); }
  std::size_t in_channels() const noexcept { return weights.channels(); }
  std::size_t kernel_size() const noexcept { return weights.height(); }

  /// Shaped for conv2d(in -> out): weights (out, in, k, k), bias (out).
  static ConvLayerParams for_conv(std::size_t in_ch, std::size_t out_ch,
                                  std::size_t kernel);
  /// Shaped for conv_transpose2d(in -> out): weights (in, out, k, k),
  /// bias (out).
  static ConvLayerParams for_transpose(std::size_t in_ch, std::size_t out_ch,
                                       std::size_t kernel);
};

struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta_shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  explicit BatchNormParams(std::size_t channels = 0)
      : gamma(channels, 1.0),
        beta_shift(channels, 0.0),
        running_mean(channels, 0.0),
        running_var(channels, 1.0) {}

  std::size_t channels() const noexcept { return gamma.size(); }
};

enum class Mode { Train, Eval };

// --- convolution -----------------------------------------------------------

Tensor4 conv2d(const Tensor4& input, const ConvLayerParams& layer);

struct ConvGrads {
  Tensor4 input;
  Tensor4 weights;
  std::vector<double> bias;
};

ConvGrads conv2d_grad(const Tensor4& grad_out, const Tensor4& input,
                      const ConvLayerParams& layer);

Tensor4 conv_transpose2d(const Tensor4& input, const ConvLayerParams& layer);

ConvGrads conv_transpose2d_grad(const Tensor4& grad_out, const Tensor4& input,
                                const ConvLayerParams& layer);

/// Kernel flipped in both spatial axes with in/out axes swapped. conv2d with
/// the result equals conv_transpose2d with the original.
Tensor4 flip_hw_swap_io(const Tensor4& weights);

// --- batch normalization ---------------------------------------------------

struct BatchNormCache {
  Mode mode = Mode::Eval;
  Tensor4 normalized;              // x_hat
  std::vector<double> inv_std;     // per channel
};

/// Train mode normalizes with batch statistics over (N, H, W) and updates
/// the running statistics in `params`. Eval mode reads the running
/// statistics only and leaves `params` untouched.
Tensor4 batchnorm2d(const Tensor4& input, BatchNormParams& params, Mode mode,
                    BatchNormCache* cache = nullptr);

/// Eval-mode overload that cannot mutate `params`.
Tensor4 batchnorm2d_eval(const Tensor4& input, const BatchNormParams& params);

struct BatchNormGrads {
  Tensor4 input;
  std::vector<double> gamma;
  std::vector<double> beta_shift;
};

BatchNormGrads batchnorm2d_grad(const Tensor4& grad_out,
                                const BatchNormCache& cache,
                                const BatchNormParams& params);

// --- activation and loss ---------------------------------------------------

double elu(double x) noexcept;
/// d elu / dx evaluated at the pre-activation x.
double elu_derivative(double x) noexcept;

Tensor4 elu(const Tensor4& x);
/// grad_out * elu'(pre_activation), elementwise.
Tensor4 elu_grad(const Tensor4& grad_out, const Tensor4& pre_activation);

struct LossAndGrad {
  double loss = 0.0;
  Tensor4 grad;
};

LossAndGrad mse_loss(const Tensor4& pred, const Tensor4& target);

// --- optimizer -------------------------------------------------------------

struct AdamState {
  std::uint64_t step_count = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n_params, double lr_, double beta1_, double beta2_,
            double eps_)
      : first_moment(n_params, 0.0),
        second_moment(n_params, 0.0),
        lr(lr_),
        beta1(beta1_),
        beta2(beta2_),
        eps(eps_) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state);

}  // namespace c2dn::nn
