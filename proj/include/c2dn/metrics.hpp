#pragma once

// Reliability metrics for denoised correlation maps.

#include <cstddef>
#include <span>
#include <vector>

#include "c2dn/c2.hpp"
#include "c2dn/fitdyn.hpp"

namespace c2dn::metrics {

/// Linear-interpolation percentile (q in [0, 100]) of an unsorted sample,
/// position q/100 * (n - 1).
double percentile(std::vector<double> values, double q);

/// P99 - P01 of all off-diagonal entries.
double estimate_beta_obs(const C2Matrix& c2);

/// Shifts larger than this in magnitude count as significant bias.
inline constexpr double kBiasBand = 0.20;

struct ContrastShift {
  double value = 0.0;
  bool exceeds_bias_band = false;
};

/// (beta_denoised - beta_raw) / beta_raw
ContrastShift contrast_shift(double beta_raw, double beta_denoised);

struct AcfResult {
  bool pass = true;
  std::vector<double> mean_acf;  // lags 0..max_lag, empty if every row skipped
  double bound = 0.0;
  double max_abs_beyond_lag0 = 0.0;
  std::size_t rows_used = 0;
};

AcfResult residual_acf_test(const C2Matrix& raw, const C2Matrix& denoised,
                            std::size_t max_lag = 20, double z = 1.96);

inline constexpr std::size_t kSsimWindow = 7;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimThreshold = 0.15;

/// Mean local SSIM over all valid 7x7 window positions. L is taken from the
/// range of `a` (1 if flat).
double ssim(const C2Matrix& a, const C2Matrix& b);
double ssim(const C2Matrix& a, const C2Matrix& b, double data_range);

/// log10(mean/var) of the entries on the tau_star off-diagonal.
double snr(const C2Matrix& c2, std::size_t tau_star);
double snr_of(std::span<const double> diagonal);

/// Smallest integer tau >= 1 with exp(-2 (tau/tau_c)^gamma) <= 1/e.
std::size_t find_tau_star(const fit::KwwParams& params);
/// Fits a KWW to `g2` first.
std::size_t find_tau_star(const G2Curve& g2);

struct ReliabilityReport {
  double beta_obs_raw = 0.0;
  double beta_obs_denoised = 0.0;
  double delta_beta_rel = 0.0;
  bool bias_flag = false;
  bool acf_pass = true;
  double acf_max_abs_beyond_lag0 = 0.0;
  double acf_bound = 0.0;
  double ssim = 0.0;
  bool ssim_reliable = false;
  double snr_raw = 0.0;
  double snr_denoised = 0.0;
  std::size_t tau_star = 1;
};

struct EvalOptions {
  std::size_t acf_max_lag = 20;
  double z = 1.96;
  double ssim_threshold = kSsimThreshold;
  std::size_t tau_star = 0;  // 0: fit a KWW to the denoised g2
};

ReliabilityReport evaluate(const C2Matrix& raw, const C2Matrix& denoised,
                           const EvalOptions& options = {});

/// Per-pixel population variance across the maps, averaged over pixels.
double ensemble_variance(std::span<const C2Matrix> maps);

struct EnsembleVarianceReport {
  std::vector<double> per_sample_variance;
  double mean_variance = 0.0;
  std::vector<double> beta_obs;
  std::vector<double> ratio_per_sample;
  double median_ratio = 0.0;
  double p10_ratio = 0.0;
  double p90_ratio = 0.0;
};

/// outputs[s][m]: model m's denoised map of sample s. Ratios use the raw
/// map's beta_obs.
EnsembleVarianceReport ensemble_report(
    const std::vector<C2Matrix>& raws,
    const std::vector<std::vector<C2Matrix>>& outputs);

}  // namespace c2dn::metrics
