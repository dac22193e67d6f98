#pragma once

// Shared fixtures for the test binaries: seeded random inputs,
// brute-force oracles and finite differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "c2dn/c2.hpp"
#include "c2dn/tensor.hpp"

namespace support {

inline c2dn::nn::Tensor4 random_tensor(std::size_t n, std::size_t c,
                                       std::size_t h, std::size_t w,
                                       std::uint64_t seed, double lo = -1.0,
                                       double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  c2dn::nn::Tensor4 t(n, c, h, w);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed,
                                         double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline c2dn::C2Matrix random_symmetric(std::size_t n, std::uint64_t seed,
                                       double lo = 0.5, double hi = 1.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  c2dn::C2Matrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      m(i, j) = u(rng);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

inline c2dn::PixelSeries random_series(std::size_t p, std::size_t t,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  c2dn::PixelSeries s(p, t);
  for (double& v : s.intensities) v = u(rng);
  return s;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

/// Central differences of f at x; each coordinate is restored afterwards.
template <class F>
std::vector<double> numeric_gradient(std::span<double> x, F&& f,
                                     double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    const double step = h * std::max(1.0, std::abs(keep));
    x[i] = keep + step;
    const double up = f();
    x[i] = keep - step;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

// Eq.-level oracles written as plain loops.

inline c2dn::C2Matrix naive_c2(const c2dn::PixelSeries& s) {
  c2dn::C2Matrix out(s.n_frames);
  const auto p = static_cast<double>(s.n_pixels);
  for (std::size_t a = 0; a < s.n_frames; ++a) {
    for (std::size_t b = 0; b < s.n_frames; ++b) {
      double prod = 0.0, ma = 0.0, mb = 0.0;
      for (std::size_t k = 0; k < s.n_pixels; ++k) {
        prod += s.at(k, a) * s.at(k, b);
        ma += s.at(k, a);
        mb += s.at(k, b);
      }
      out(a, b) = (prod / p) / ((ma / p) * (mb / p));
    }
  }
  return out;
}

inline std::vector<double> naive_g2(const c2dn::C2Matrix& c2) {
  std::vector<double> g;
  for (std::size_t tau = 0; tau < c2.size(); ++tau) {
    double s = 0.0;
    for (std::size_t i = 0; i + tau < c2.size(); ++i) s += c2(i, i + tau);
    g.push_back(s / static_cast<double>(c2.size() - tau));
  }
  return g;
}

inline double max_abs_diff(std::span<const double> a,
                           std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

inline double mse(const c2dn::C2Matrix& a, const c2dn::C2Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.values().size());
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("c2dn_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace support
