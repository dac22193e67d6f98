#include "c2dn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "c2dn/error.hpp"

namespace c2dn::nn {

void Tensor4::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor4::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Tensor4::shape_string() const {
  return std::to_string(dims_[0]) + "x" + std::to_string(dims_[1]) + "x" +
         std::to_string(dims_[2]) + "x" + std::to_string(dims_[3]);
}

double dot(const Tensor4& a, const Tensor4& b) {
  if (!a.same_shape(b)) {
    throw_shape("dot: shape " + a.shape_string() + " vs " + b.shape_string());
  }
  return std::inner_product(a.data().begin(), a.data().end(),
                            b.data().begin(), 0.0);
}

}  // namespace c2dn::nn
