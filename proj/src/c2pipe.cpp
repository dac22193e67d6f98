#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "c2dn/c2.hpp"
#include "c2dn/error.hpp"

namespace c2dn {

C2Matrix::C2Matrix(std::size_t n_frames, std::vector<double> values,
                   double frame_interval_s, std::string q_label)
    : n_(n_frames),
      frame_interval_s_(frame_interval_s),
      q_label_(std::move(q_label)),
      values_(std::move(values)) {
  if (values_.size() != n_ * n_) {
    throw_shape("C2Matrix: expected " + std::to_string(n_ * n_) +
                " values, got " + std::to_string(values_.size()));
  }
}

bool C2Matrix::is_symmetric() const noexcept {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if ((*this)(i, j) != (*this)(j, i)) return false;
    }
  }
  return true;
}

C2Matrix C2Matrix::principal_block(std::size_t start, std::size_t len) const {
  if (start + len > n_) throw_shape("principal_block: out of range");
  C2Matrix out(len, 0.0, frame_interval_s_, q_label_);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j < len; ++j) out(i, j) = (*this)(start + i, start + j);
  }
  return out;
}

G2Curve G2Curve::without_zero_lag() const {
  G2Curve out;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] == 0) continue;
    out.lags.push_back(lags[i]);
    out.values.push_back(values[i]);
    if (i < n_averaged.size()) out.n_averaged.push_back(n_averaged[i]);
  }
  return out;
}

G2Curve G2Curve::truncated(int max_lag) const {
  G2Curve out;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] > max_lag) continue;
    out.lags.push_back(lags[i]);
    out.values.push_back(values[i]);
    if (i < n_averaged.size()) out.n_averaged.push_back(n_averaged[i]);
  }
  return out;
}

namespace corr {
namespace {

void mirror_upper(C2Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = i + 1; j < m.size(); ++j) m(j, i) = m(i, j);
  }
}

}  // namespace

C2Matrix compute_c2(const PixelSeries& series) {
  const std::size_t p = series.n_pixels;
  const std::size_t t = series.n_frames;
  if (p < 2) throw_config("compute_c2: need at least 2 pixels");
  if (series.intensities.size() != p * t) {
    throw_shape("compute_c2: intensity buffer does not match P x T");
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;
  Eigen::Map<const RowMat> frames(series.intensities.data(),
                                  static_cast<Eigen::Index>(p),
                                  static_cast<Eigen::Index>(t));

  Eigen::VectorXd mean = frames.colwise().mean().transpose();
  for (std::size_t k = 0; k < t; ++k) {
    if (!(mean[static_cast<Eigen::Index>(k)] > 0.0)) {
      throw_numeric("compute_c2: frame " + std::to_string(k) +
                    " has zero mean intensity");
    }
  }

  // Only the upper triangle is accumulated; the lower one is mirrored so
  // the result is exactly symmetric.
  Eigen::MatrixXd prod = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t),
                                               static_cast<Eigen::Index>(t));
  prod.selfadjointView<Eigen::Upper>().rankUpdate(frames.transpose());

  C2Matrix out(t, 0.0, series.frame_interval_s, series.q_label);
  const double inv_p = 1.0 / static_cast<double>(p);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = i; j < t; ++j) {
      const auto ei = static_cast<Eigen::Index>(i);
      const auto ej = static_cast<Eigen::Index>(j);
      out(i, j) = prod(ei, ej) * inv_p / (mean[ei] * mean[ej]);
    }
  }
  mirror_upper(out);
  return out;
}

C2Matrix repair_diagonal(const C2Matrix& c2) {
  const std::size_t n = c2.size();
  if (n < 2) throw_shape("repair_diagonal: need at least a 2x2 matrix");
  C2Matrix out = c2;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      out(i, i) = c2(0, 1);
    } else if (i == n - 1) {
      out(i, i) = c2(i, i - 1);
    } else {
      out(i, i) = 0.5 * (c2(i, i - 1) + c2(i, i + 1));
    }
  }
  return out;
}

G2Curve extract_g2(const C2Matrix& c2) {
  const std::size_t n = c2.size();
  if (n < 2) throw_shape("extract_g2: need at least a 2x2 matrix");
  G2Curve g;
  g.lags.resize(n);
  g.values.resize(n);
  g.n_averaged.resize(n);
  for (std::size_t tau = 0; tau < n; ++tau) {
    double sum = 0.0;
    for (std::size_t i = 0; i + tau < n; ++i) sum += c2(i, i + tau);
    g.lags[tau] = static_cast<int>(tau);
    g.n_averaged[tau] = n - tau;
    g.values[tau] = sum / static_cast<double>(n - tau);
  }
  return g;
}

Standardized standardize(const C2Matrix& c2) {
  const auto v = c2.values();
  if (v.empty()) throw_shape("standardize: empty matrix");
  const double count = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / count;
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / count);
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw_numeric("standardize: zero variance");
  }
  StandardizationParams params{mean, sd};
  return {apply_standardization(c2, params), params};
}

C2Matrix apply_standardization(const C2Matrix& c2,
                               const StandardizationParams& params) {
  C2Matrix out = c2;
  for (double& x : out.values()) x = (x - params.mean) / params.std;
  return out;
}

C2Matrix destandardize(const C2Matrix& c2,
                       const StandardizationParams& params) {
  C2Matrix out = c2;
  for (double& x : out.values()) x = x * params.std + params.mean;
  return out;
}

C2Matrix reverse_age(const C2Matrix& c2) {
  const std::size_t n = c2.size();
  C2Matrix out(n, 0.0, c2.frame_interval_s(), c2.q_label());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(i, j) = c2(n - 1 - i, n - 1 - j);
  }
  return out;
}

C2Matrix subsample_frames(const C2Matrix& c2, std::size_t k) {
  if (k < 1) throw_config("subsample_frames: interval must be >= 1");
  const std::size_t m = (c2.size() + k - 1) / k;
  if (m < 2) {
    throw_shape("subsample_frames: interval " + std::to_string(k) +
                " leaves fewer than 2 frames");
  }
  C2Matrix out(m, 0.0, c2.frame_interval_s() * static_cast<double>(k),
               c2.q_label());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) out(i, j) = c2(i * k, j * k);
  }
  return out;
}

PixelSeries subsample_frames(const PixelSeries& series, std::size_t k) {
  if (k < 1) throw_config("subsample_frames: interval must be >= 1");
  const std::size_t m = (series.n_frames + k - 1) / k;
  if (m < 2) {
    throw_shape("subsample_frames: interval " + std::to_string(k) +
                " leaves fewer than 2 frames");
  }
  PixelSeries out(series.n_pixels, m,
                  series.frame_interval_s * static_cast<double>(k));
  out.q_label = series.q_label;
  for (std::size_t p = 0; p < series.n_pixels; ++p) {
    for (std::size_t t = 0; t < m; ++t) out.at(p, t) = series.at(p, t * k);
  }
  return out;
}

std::vector<std::size_t> tile_anchors(std::size_t n, std::size_t size,
                                      std::size_t stride) {
  if (size == 0 || size > n) {
    throw_shape("crop_diagonal_tiles: tile size " + std::to_string(size) +
                " exceeds matrix size " + std::to_string(n));
  }
  if (stride == 0) throw_config("crop_diagonal_tiles: stride must be >= 1");
  std::vector<std::size_t> anchors;
  for (std::size_t s = 0; s + size <= n; s += stride) anchors.push_back(s);
  if (anchors.back() != n - size) anchors.push_back(n - size);
  return anchors;
}

std::vector<C2Matrix> crop_diagonal_tiles(const C2Matrix& c2, std::size_t size,
                                          std::size_t stride) {
  std::vector<C2Matrix> tiles;
  for (std::size_t a : tile_anchors(c2.size(), size, stride)) {
    tiles.push_back(c2.principal_block(a, size));
  }
  return tiles;
}

std::vector<std::size_t> bootstrap_selection(std::size_t n_pixels,
                                             double fraction,
                                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw_config("bootstrap_pixels: fraction must lie in (0, 1]");
  }
  const auto keep = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n_pixels)));
  if (keep < 2) {
    throw_config("bootstrap_pixels: fraction " + std::to_string(fraction) +
                 " of " + std::to_string(n_pixels) +
                 " pixels leaves fewer than 2");
  }
  std::vector<std::size_t> idx(n_pixels);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `keep` slots are a uniform draw without
  // replacement.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < keep && i + 1 < n_pixels; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_pixels - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

PixelSeries bootstrap_pixels(const PixelSeries& series, double fraction,
                             std::uint64_t seed) {
  const auto idx = bootstrap_selection(series.n_pixels, fraction, seed);
  PixelSeries out(idx.size(), series.n_frames, series.frame_interval_s);
  out.q_label = series.q_label;
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(series.intensities.begin() +
                    static_cast<std::ptrdiff_t>(idx[r] * series.n_frames),
                series.n_frames,
                out.intensities.begin() +
                    static_cast<std::ptrdiff_t>(r * series.n_frames));
  }
  return out;
}

G2Curve slice_age(const C2Matrix& c2, std::size_t age,
                  std::size_t half_window) {
  const std::size_t n = c2.size();
  if (age >= n) {
    throw_config("slice_age: age " + std::to_string(age) +
                 " outside [0, " + std::to_string(n) + ")");
  }
  auto tau_max_at = [n](std::size_t a) { return 2 * std::min(a, n - 1 - a); };
  const std::size_t tau_max = tau_max_at(age);
  const std::size_t lo = age >= half_window ? age - half_window : 0;
  const std::size_t hi = std::min(n - 1, age + half_window);

  G2Curve g;
  g.lags.resize(tau_max + 1);
  g.values.resize(tau_max + 1);
  g.n_averaged.resize(tau_max + 1);
  for (std::size_t tau = 0; tau <= tau_max; ++tau) {
    const std::size_t up = (tau + 1) / 2;  // ceil(tau/2)
    const std::size_t down = tau / 2;      // floor(tau/2)
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t a = lo; a <= hi; ++a) {
      if (a < up || a + down >= n) continue;
      sum += c2(a - up, a + down);
      ++count;
    }
    g.lags[tau] = static_cast<int>(tau);
    g.values[tau] = sum / static_cast<double>(count);
    g.n_averaged[tau] = count;
  }
  return g;
}

}  // namespace corr
}  // namespace c2dn
