// Stride-1, zero "same"-padded convolution via im2col + GEMM.
//
// Cross-correlation convention (no kernel flip):
//   out[n,o,y,x] = bias[o] + sum_{c,ky,kx} W[o,c,ky,kx] * in[n,c,y+ky-p,x+kx-p]
// with p = (k-1)/2 and out-of-range input reading as zero.

#include <Eigen/Core>
#include <string>

#include "c2dn/error.hpp"
#include "c2dn/nn.hpp"

namespace c2dn::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void check_kernel(const ConvLayerParams& layer) {
  const auto k = layer.weights.height();
  if (k == 0 || k % 2 == 0 || layer.weights.width() != k) {
    throw_shape("convolution kernel must be square with odd size, got " +
                layer.weights.shape_string());
  }
}

// col has shape (channels*k*k, h*w).
void im2col(std::span<const double> sample, std::size_t channels,
            std::size_t h, std::size_t w, std::size_t k, RowMat& col) {
  const long pad = static_cast<long>(k / 2);
  const std::size_t hw = h * w;
  col.resize(static_cast<Eigen::Index>(channels * k * k),
             static_cast<Eigen::Index>(hw));
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = sample.data() + c * hw;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = col.data() + ((c * k + ky) * k + kx) * hw;
        const long dx = static_cast<long>(kx) - pad;
        const long x_lo = std::max(0L, -dx);
        const long x_hi = std::min(static_cast<long>(w),
                                   static_cast<long>(w) - dx);
        for (std::size_t y = 0; y < h; ++y) {
          double* row = dst + y * w;
          const long sy = static_cast<long>(y) + static_cast<long>(ky) - pad;
          if (sy < 0 || sy >= static_cast<long>(h) || x_lo >= x_hi) {
            std::fill(row, row + w, 0.0);
            continue;
          }
          const double* srow = src + sy * static_cast<long>(w);
          for (long x = 0; x < x_lo; ++x) row[x] = 0.0;
          for (long x = x_lo; x < x_hi; ++x) row[x] = srow[x + dx];
          for (long x = x_hi; x < static_cast<long>(w); ++x) row[x] = 0.0;
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col back into a zeroed sample.
void col2im(const RowMat& col, std::size_t channels, std::size_t h,
            std::size_t w, std::size_t k, std::span<double> sample) {
  const long pad = static_cast<long>(k / 2);
  const std::size_t hw = h * w;
  std::fill(sample.begin(), sample.end(), 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double* dstc = sample.data() + c * hw;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = col.data() + ((c * k + ky) * k + kx) * hw;
        const long dx = static_cast<long>(kx) - pad;
        const long x_lo = std::max(0L, -dx);
        const long x_hi = std::min(static_cast<long>(w),
                                   static_cast<long>(w) - dx);
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + static_cast<long>(ky) - pad;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const double* row = src + y * w;
          double* drow = dstc + sy * static_cast<long>(w);
          for (long x = x_lo; x < x_hi; ++x) drow[x + dx] += row[x];
        }
      }
    }
  }
}

ConstMapMat weight_matrix(const ConvLayerParams& layer) {
  const auto& wt = layer.weights;
  return ConstMapMat(wt.raw(), static_cast<Eigen::Index>(wt.batch()),
                     static_cast<Eigen::Index>(wt.channels() * wt.plane()));
}

ConstMapMat sample_matrix(const Tensor4& t, std::size_t n) {
  return ConstMapMat(t.sample(n).data(),
                     static_cast<Eigen::Index>(t.channels()),
                     static_cast<Eigen::Index>(t.plane()));
}

MapMat sample_matrix(Tensor4& t, std::size_t n) {
  return MapMat(t.sample(n).data(), static_cast<Eigen::Index>(t.channels()),
                static_cast<Eigen::Index>(t.plane()));
}

void add_bias(Tensor4& out, const std::vector<double>& bias) {
  for (std::size_t n = 0; n < out.batch(); ++n) {
    for (std::size_t c = 0; c < out.channels(); ++c) {
      for (double& v : out.channel_plane(n, c)) v += bias[c];
    }
  }
}

std::vector<double> channel_sums(const Tensor4& t) {
  std::vector<double> sums(t.channels(), 0.0);
  for (std::size_t n = 0; n < t.batch(); ++n) {
    for (std::size_t c = 0; c < t.channels(); ++c) {
      double s = 0.0;
      for (double v : t.channel_plane(n, c)) s += v;
      sums[c] += s;
    }
  }
  return sums;
}

// Shared by conv2d (input has in_ch channels) and the transposed gradient.
Tensor4 correlate(const Tensor4& input, const ConvLayerParams& layer) {
  const std::size_t k = layer.kernel_size();
  Tensor4 out(input.batch(), layer.out_channels(), input.height(),
              input.width());
  const auto wmat = weight_matrix(layer);
  RowMat col;
  for (std::size_t n = 0; n < input.batch(); ++n) {
    im2col(input.sample(n), input.channels(), input.height(), input.width(),
           k, col);
    sample_matrix(out, n).noalias() = wmat * col;
  }
  return out;
}

// Adjoint of correlate() with respect to its input: input has out_ch
// channels, result has in_ch channels.
Tensor4 correlate_adjoint(const Tensor4& input, const ConvLayerParams& layer) {
  const std::size_t k = layer.kernel_size();
  const std::size_t channels = layer.in_channels();
  Tensor4 out(input.batch(), channels, input.height(), input.width());
  const auto wmat = weight_matrix(layer);
  RowMat col;
  for (std::size_t n = 0; n < input.batch(); ++n) {
    col.noalias() = wmat.transpose() * sample_matrix(input, n);
    col2im(col, channels, input.height(), input.width(), k, out.sample(n));
  }
  return out;
}

// d<correlate(x, W), g>/dW, summed over the batch.
Tensor4 correlate_weight_grad(const Tensor4& x, const Tensor4& g,
                              const ConvLayerParams& layer) {
  const std::size_t k = layer.kernel_size();
  Tensor4 grad(layer.weights.batch(), layer.weights.channels(), k, k);
  MapMat gmat(grad.raw(), static_cast<Eigen::Index>(grad.batch()),
              static_cast<Eigen::Index>(grad.channels() * k * k));
  RowMat col;
  for (std::size_t n = 0; n < x.batch(); ++n) {
    im2col(x.sample(n), x.channels(), x.height(), x.width(), k, col);
    gmat.noalias() += sample_matrix(g, n) * col.transpose();
  }
  return grad;
}

}  // namespace

ConvLayerParams ConvLayerParams::for_conv(std::size_t in_ch,
                                          std::size_t out_ch,
                                          std::size_t kernel) {
  return {Tensor4(out_ch, in_ch, kernel, kernel),
          std::vector<double>(out_ch, 0.0)};
}

ConvLayerParams ConvLayerParams::for_transpose(std::size_t in_ch,
                                               std::size_t out_ch,
                                               std::size_t kernel) {
  return {Tensor4(in_ch, out_ch, kernel, kernel),
          std::vector<double>(out_ch, 0.0)};
}

Tensor4 conv2d(const Tensor4& input, const ConvLayerParams& layer) {
  check_kernel(layer);
  if (input.channels() != layer.in_channels()) {
    throw_shape("conv2d: input has " + std::to_string(input.channels()) +
                " channels, layer expects " +
                std::to_string(layer.in_channels()));
  }
  if (layer.bias.size() != layer.out_channels()) {
    throw_shape("conv2d: bias length does not match output channels");
  }
  Tensor4 out = correlate(input, layer);
  add_bias(out, layer.bias);
  return out;
}

ConvGrads conv2d_grad(const Tensor4& grad_out, const Tensor4& input,
                      const ConvLayerParams& layer) {
  check_kernel(layer);
  if (input.channels() != layer.in_channels() ||
      grad_out.channels() != layer.out_channels() ||
      grad_out.batch() != input.batch() ||
      grad_out.height() != input.height() ||
      grad_out.width() != input.width()) {
    throw_shape("conv2d_grad: grad_out " + grad_out.shape_string() +
                " incompatible with input " + input.shape_string());
  }
  ConvGrads g;
  g.input = correlate_adjoint(grad_out, layer);
  g.weights = correlate_weight_grad(input, grad_out, layer);
  g.bias = channel_sums(grad_out);
  return g;
}

Tensor4 conv_transpose2d(const Tensor4& input, const ConvLayerParams& layer) {
  check_kernel(layer);
  if (input.channels() != layer.out_channels()) {
    throw_shape("conv_transpose2d: input has " +
                std::to_string(input.channels()) +
                " channels, layer expects " +
                std::to_string(layer.out_channels()));
  }
  if (layer.bias.size() != layer.in_channels()) {
    throw_shape("conv_transpose2d: bias length does not match output "
                "channels");
  }
  Tensor4 out = correlate_adjoint(input, layer);
  add_bias(out, layer.bias);
  return out;
}

ConvGrads conv_transpose2d_grad(const Tensor4& grad_out, const Tensor4& input,
                                const ConvLayerParams& layer) {
  check_kernel(layer);
  if (input.channels() != layer.out_channels() ||
      grad_out.channels() != layer.in_channels() ||
      grad_out.batch() != input.batch() ||
      grad_out.height() != input.height() ||
      grad_out.width() != input.width()) {
    throw_shape("conv_transpose2d_grad: grad_out " + grad_out.shape_string() +
                " incompatible with input " + input.shape_string());
  }
  ConvGrads g;
  g.input = correlate(grad_out, layer);
  g.weights = correlate_weight_grad(grad_out, input, layer);
  g.bias = channel_sums(grad_out);
  return g;
}

Tensor4 flip_hw_swap_io(const Tensor4& weights) {
  const std::size_t k = weights.height();
  Tensor4 out(weights.channels(), weights.batch(), k, weights.width());
  for (std::size_t a = 0; a < weights.batch(); ++a) {
    for (std::size_t b = 0; b < weights.channels(); ++b) {
      for (std::size_t y = 0; y < k; ++y) {
        for (std::size_t x = 0; x < weights.width(); ++x) {
          out(b, a, k - 1 - y, weights.width() - 1 - x) = weights(a, b, y, x);
        }
      }
    }
  }
  return out;
}

}  // namespace c2dn::nn
