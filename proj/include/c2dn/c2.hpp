#pragma once

// Two-time correlation maps, per-pixel intensity series, and the
// preprocessing transforms applied to them before training or fitting.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace c2dn {

/// Square two-time correlation map C2[t1][t2], row-major.
class C2Matrix {
 public:
  C2Matrix() = default;
  explicit C2Matrix(std::size_t n_frames, double fill = 0.0,
                    double frame_interval_s = 1.0, std::string q_label = {})
      : n_(n_frames),
        frame_interval_s_(frame_interval_s),
        q_label_(std::move(q_label)),
        values_(n_frames * n_frames, fill) {}
  C2Matrix(std::size_t n_frames, std::vector<double> values,
           double frame_interval_s = 1.0, std::string q_label = {});

  std::size_t size() const noexcept { return n_; }
  double frame_interval_s() const noexcept { return frame_interval_s_; }
  void set_frame_interval_s(double s) noexcept { frame_interval_s_ = s; }
  const std::string& q_label() const noexcept { return q_label_; }
  void set_q_label(std::string q) { q_label_ = std::move(q); }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    return values_[i * n_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return values_[i * n_ + j];
  }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Exact (bitwise) symmetry.
  bool is_symmetric() const noexcept;
  /// Principal submatrix [start, start+len) x [start, start+len).
  C2Matrix principal_block(std::size_t start, std::size_t len) const;

  friend bool operator==(const C2Matrix&, const C2Matrix&) = default;

 private:
  std::size_t n_ = 0;
  double frame_interval_s_ = 1.0;
  std::string q_label_;
  std::vector<double> values_;
};

/// P x T non-negative intensities, pixel-major (row p holds all frames).
struct PixelSeries {
  std::size_t n_pixels = 0;
  std::size_t n_frames = 0;
  double frame_interval_s = 1.0;
  std::string q_label;
  std::vector<double> intensities;

  PixelSeries() = default;
  PixelSeries(std::size_t p, std::size_t t, double interval = 1.0)
      : n_pixels(p), n_frames(t), frame_interval_s(interval),
        intensities(p * t, 0.0) {}

  double& at(std::size_t p, std::size_t t) noexcept {
    return intensities[p * n_frames + t];
  }
  double at(std::size_t p, std::size_t t) const noexcept {
    return intensities[p * n_frames + t];
  }

  friend bool operator==(const PixelSeries&, const PixelSeries&) = default;
};

/// One-time correlation g2 sampled at integer frame lags.
struct G2Curve {
  std::vector<int> lags;
  std::vector<double> values;
  std::vector<std::size_t> n_averaged;

  std::size_t size() const noexcept { return lags.size(); }
  /// Copy without the tau = 0 point, if present.
  G2Curve without_zero_lag() const;
  /// Copy keeping lags <= max_lag.
  G2Curve truncated(int max_lag) const;
};

struct StandardizationParams {
  double mean = 0.0;
  double std = 1.0;
};

struct Standardized {
  C2Matrix matrix;
  StandardizationParams params;
};

namespace corr {

/// C2[t1][t2] = <I(t1) I(t2)>_p / (<I(t1)>_p <I(t2)>_p).
C2Matrix compute_c2(const PixelSeries& series);

/// Replaces each diagonal entry with the mean of its same-row neighbours.
C2Matrix repair_diagonal(const C2Matrix& c2);

/// g2(tau) = mean_i C2[i][i+tau] for tau = 0..T-1.
G2Curve extract_g2(const C2Matrix& c2);

/// Population mean/std. Throws Numeric("zero variance") on constant input.
Standardized standardize(const C2Matrix& c2);
C2Matrix apply_standardization(const C2Matrix& c2,
                               const StandardizationParams& params);
C2Matrix destandardize(const C2Matrix& c2, const StandardizationParams& params);

/// values'[i][j] = values[T-1-i][T-1-j].
C2Matrix reverse_age(const C2Matrix& c2);

/// Keeps frames 0, k, 2k, ...; frame interval is scaled by k.
C2Matrix subsample_frames(const C2Matrix& c2, std::size_t k);
PixelSeries subsample_frames(const PixelSeries& series, std::size_t k);

/// Top-left anchors used by crop_diagonal_tiles.
std::vector<std::size_t> tile_anchors(std::size_t n, std::size_t size,
                                      std::size_t stride);
std::vector<C2Matrix> crop_diagonal_tiles(const C2Matrix& c2, std::size_t size,
                                          std::size_t stride);

/// Sorted pixel indices kept by bootstrap_pixels.
std::vector<std::size_t> bootstrap_selection(std::size_t n_pixels,
                                             double fraction,
                                             std::uint64_t seed);
PixelSeries bootstrap_pixels(const PixelSeries& series, double fraction,
                             std::uint64_t seed);

/// Cut perpendicular to the main diagonal through age `age`:
///   s(tau) = C2[age - ceil(tau/2)][age + floor(tau/2)],
///   tau = 0..2*min(age, T-1-age).
/// With half_window w > 0 the cuts at ages age-w..age+w are averaged; each
/// lag of the centre cut averages over the window ages that reach it.
G2Curve slice_age(const C2Matrix& c2, std::size_t age,
                  std::size_t half_window = 0);

}  // namespace corr
}  // namespace c2dn
