#include "c2dn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "c2dn/error.hpp"

namespace c2dn::metrics {
namespace {

void require_same_shape(const C2Matrix& a, const C2Matrix& b,
                        const char* what) {
  if (a.size() != b.size()) {
    throw_shape(std::string(what) + ": shape mismatch (" +
                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                ")");
  }
}

std::vector<double> gaussian_window() {
  std::vector<double> w(kSsimWindow);
  const double c = 0.5 * static_cast<double>(kSsimWindow - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable weighted sum over every valid window position.
std::vector<double> filter_valid(std::span<const double> img, std::size_t n,
                                 const std::vector<double>& w) {
  const std::size_t k = w.size();
  const std::size_t m = n - k + 1;
  std::vector<double> rows(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < k; ++d) s += w[d] * img[i * n + j + d];
      rows[i * m + j] = s;
    }
  }
  std::vector<double> out(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < k; ++d) s += w[d] * rows[(i + d) * m + j];
      out[i * m + j] = s;
    }
  }
  return out;
}

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw_config("percentile: empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw_config("percentile: q outside [0, 100]");
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<long>(lo),
                   values.end());
  const double a = values[lo];
  if (frac == 0.0 || lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<long>(lo) + 1,
                                     values.end());
  return a + frac * (b - a);
}

double estimate_beta_obs(const C2Matrix& c2) {
  const std::size_t n = c2.size();
  if (n < 2) throw_shape("estimate_beta_obs: need T >= 2");
  std::vector<double> off;
  off.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) off.push_back(c2(i, j));
    }
  }
  return percentile(off, 99.0) - percentile(off, 1.0);
}

ContrastShift contrast_shift(double beta_raw, double beta_denoised) {
  if (!(beta_raw > 0.0)) throw_numeric("degenerate raw contrast");
  const double v = (beta_denoised - beta_raw) / beta_raw;
  return {v, std::abs(v) > kBiasBand};
}

AcfResult residual_acf_test(const C2Matrix& raw, const C2Matrix& denoised,
                            std::size_t max_lag, double z) {
  require_same_shape(raw, denoised, "residual_acf_test");
  const std::size_t n = raw.size();
  if (max_lag >= n) throw_config("residual_acf_test: max_lag must be < T");
  if (!(z > 0.0)) throw_config("residual_acf_test: z must be > 0");

  AcfResult out;
  out.bound = z / std::sqrt(static_cast<double>(n));
  std::vector<double> sum(max_lag + 1, 0.0);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      row[t] = denoised(i, t) - raw(i, t);
      mean += row[t];
    }
    mean /= static_cast<double>(n);
    double energy = 0.0;
    for (double& v : row) {
      v -= mean;
      energy += v * v;
    }
    if (!(energy > 0.0)) continue;
    ++out.rows_used;
    for (std::size_t l = 0; l <= max_lag; ++l) {
      double s = 0.0;
      for (std::size_t t = 0; t + l < n; ++t) s += row[t] * row[t + l];
      sum[l] += s / energy;
    }
  }
  if (out.rows_used == 0) return out;
  out.mean_acf.resize(max_lag + 1);
  for (std::size_t l = 0; l <= max_lag; ++l) {
    out.mean_acf[l] = sum[l] / static_cast<double>(out.rows_used);
    if (l >= 1) {
      out.max_abs_beyond_lag0 =
          std::max(out.max_abs_beyond_lag0, std::abs(out.mean_acf[l]));
    }
  }
  out.pass = out.max_abs_beyond_lag0 <= out.bound;
  return out;
}

double ssim(const C2Matrix& a, const C2Matrix& b) {
  const auto [lo, hi] = std::minmax_element(a.values().begin(), a.values().end());
  double range = a.size() > 0 ? *hi - *lo : 0.0;
  if (!(range > 0.0)) range = 1.0;
  return ssim(a, b, range);
}

double ssim(const C2Matrix& a, const C2Matrix& b, double data_range) {
  require_same_shape(a, b, "ssim");
  const std::size_t n = a.size();
  if (n < kSsimWindow) {
    throw_shape("ssim: T = " + std::to_string(n) + " is smaller than the " +
                std::to_string(kSsimWindow) + "x" +
                std::to_string(kSsimWindow) + " window");
  }
  if (!(data_range > 0.0)) throw_config("ssim: data range must be > 0");
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);

  const auto w = gaussian_window();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> aa(n * n), bb(n * n), ab(n * n);
  for (std::size_t i = 0; i < n * n; ++i) {
    aa[i] = av[i] * av[i];
    bb[i] = bv[i] * bv[i];
    ab[i] = av[i] * bv[i];
  }
  const auto mu_a = filter_valid(av, n, w);
  const auto mu_b = filter_valid(bv, n, w);
  const auto e_aa = filter_valid(aa, n, w);
  const auto e_bb = filter_valid(bb, n, w);
  const auto e_ab = filter_valid(ab, n, w);

  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double snr_of(std::span<const double> d) {
  if (d.empty()) throw_shape("snr: empty diagonal");
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d.size());
  if (!(var > 0.0)) throw_numeric("snr: degenerate diagonal (zero variance)");
  if (!(mean > 0.0)) throw_numeric("snr: diagonal mean must be > 0");
  return std::log10(mean / var);
}

double snr(const C2Matrix& c2, std::size_t tau_star) {
  if (tau_star < 1 || tau_star >= c2.size()) {
    throw_config("snr: tau_star must lie in [1, T)");
  }
  std::vector<double> d;
  d.reserve(c2.size() - tau_star);
  for (std::size_t i = 0; i + tau_star < c2.size(); ++i) {
    d.push_back(c2(i, i + tau_star));
  }
  return snr_of(d);
}

std::size_t find_tau_star(const fit::KwwParams& p) {
  if (!(p.tau_c > 0.0) || !(p.gamma > 0.0)) {
    throw_config("find_tau_star: tau_c and gamma must be > 0");
  }
  // exp(-2 (tau/tau_c)^gamma) <= 1/e  <=>  tau >= tau_c * 2^(-1/gamma)
  const double edge = p.tau_c * std::pow(2.0, -1.0 / p.gamma);
  if (!(edge < 1e15)) throw_numeric("find_tau_star: tau_c out of range");
  auto reaches = [&](double tau) {
    return std::exp(-2.0 * std::pow(tau / p.tau_c, p.gamma)) <= std::exp(-1.0);
  };
  auto tau = static_cast<std::size_t>(std::max(1.0, std::ceil(edge)));
  while (tau > 1 && reaches(static_cast<double>(tau - 1))) --tau;
  while (!reaches(static_cast<double>(tau))) ++tau;
  return tau;
}

std::size_t find_tau_star(const G2Curve& g2) {
  fit::FitOptions fo;
  fo.kind = fit::ModelKind::Kww;
  const auto res = fit::fit_g2(g2, fo);
  return find_tau_star(res.kww());
}

ReliabilityReport evaluate(const C2Matrix& raw, const C2Matrix& denoised,
                           const EvalOptions& options) {
  require_same_shape(raw, denoised, "evaluate");
  ReliabilityReport r;
  r.beta_obs_raw = estimate_beta_obs(raw);
  r.beta_obs_denoised = estimate_beta_obs(denoised);
  const auto shift = contrast_shift(r.beta_obs_raw, r.beta_obs_denoised);
  r.delta_beta_rel = shift.value;
  r.bias_flag = shift.exceeds_bias_band;

  const std::size_t max_lag = std::min(options.acf_max_lag, raw.size() - 1);
  const auto acf = residual_acf_test(raw, denoised, max_lag, options.z);
  r.acf_pass = acf.pass;
  r.acf_max_abs_beyond_lag0 = acf.max_abs_beyond_lag0;
  r.acf_bound = acf.bound;

  r.ssim = ssim(raw, denoised);
  r.ssim_reliable = r.ssim >= options.ssim_threshold;

  std::size_t tau = options.tau_star;
  if (tau == 0) tau = find_tau_star(corr::extract_g2(denoised));
  r.tau_star = std::min(tau, raw.size() - 1);
  r.snr_raw = snr(raw, r.tau_star);
  r.snr_denoised = snr(denoised, r.tau_star);
  return r;
}

double ensemble_variance(std::span<const C2Matrix> maps) {
  if (maps.size() < 2) throw_config("ensemble_variance: need at least 2 maps");
  for (const auto& m : maps) require_same_shape(maps[0], m, "ensemble_variance");
  const std::size_t count = maps[0].values().size();
  if (count == 0) throw_shape("ensemble_variance: empty maps");
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    // Welford: identical inputs give exactly zero.
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (const auto& m : maps) {
      const double x = m.values()[i];
      ++k;
      const double d = x - mean;
      mean += d / static_cast<double>(k);
      m2 += d * (x - mean);
    }
    total += m2 / static_cast<double>(k);
  }
  return total / static_cast<double>(count);
}

EnsembleVarianceReport ensemble_report(
    const std::vector<C2Matrix>& raws,
    const std::vector<std::vector<C2Matrix>>& outputs) {
  if (raws.empty()) throw_config("ensemble_report: no samples");
  if (raws.size() != outputs.size()) {
    throw_shape("ensemble_report: raw and output counts differ");
  }
  EnsembleVarianceReport rep;
  for (std::size_t s = 0; s < raws.size(); ++s) {
    const double var = ensemble_variance(outputs[s]);
    const double beta = estimate_beta_obs(raws[s]);
    if (!(beta > 0.0)) throw_numeric("ensemble_report: degenerate raw contrast");
    rep.per_sample_variance.push_back(var);
    rep.beta_obs.push_back(beta);
    rep.ratio_per_sample.push_back(var / beta);
  }
  rep.mean_variance =
      std::accumulate(rep.per_sample_variance.begin(),
                      rep.per_sample_variance.end(), 0.0) /
      static_cast<double>(raws.size());
  rep.median_ratio = percentile(rep.ratio_per_sample, 50.0);
  rep.p10_ratio = percentile(rep.ratio_per_sample, 10.0);
  rep.p90_ratio = percentile(rep.ratio_per_sample, 90.0);
  return rep;
}

}  // namespace c2dn::metrics
