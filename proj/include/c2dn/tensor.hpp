#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace c2dn::nn {

/// Dense (batch, channels, height, width) array of doubles, width fastest.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
          double fill = 0.0)
      : dims_{n, c, h, w}, data_(n * c * h * w, fill) {}

  std::size_t batch() const noexcept { return dims_[0]; }
  std::size_t channels() const noexcept { return dims_[1]; }
  std::size_t height() const noexcept { return dims_[2]; }
  std::size_t width() const noexcept { return dims_[3]; }
  const std::array<std::size_t, 4>& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept { return dims_[2] * dims_[3]; }

  double& operator()(std::size_t n, std::size_t c, std::size_t y,
                     std::size_t x) noexcept {
    return data_[((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x];
  }
  double operator()(std::size_t n, std::size_t c, std::size_t y,
                    std::size_t x) const noexcept {
    return data_[((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  /// Contiguous H*W plane of sample n, channel c.
  std::span<double> channel_plane(std::size_t n, std::size_t c) noexcept {
    return {data_.data() + (n * dims_[1] + c) * plane(), plane()};
  }
  std::span<const double> channel_plane(std::size_t n,
                                        std::size_t c) const noexcept {
    return {data_.data() + (n * dims_[1] + c) * plane(), plane()};
  }

  /// All channels of sample n, as one contiguous block.
  std::span<double> sample(std::size_t n) noexcept {
    const std::size_t len = dims_[1] * plane();
    return {data_.data() + n * len, len};
  }
  std::span<const double> sample(std::size_t n) const noexcept {
    const std::size_t len = dims_[1] * plane();
    return {data_.data() + n * len, len};
  }

  bool same_shape(const Tensor4& other) const noexcept {
    return dims_ == other.dims_;
  }
  void fill(double v);
  bool all_finite() const noexcept;
  std::string shape_string() const;

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  std::array<std::size_t, 4> dims_{0, 0, 0, 0};
  std::vector<double> data_;
};

/// Inner product over all elements; shapes must match.
double dot(const Tensor4& a, const Tensor4& b);

}  // namespace c2dn::nn
