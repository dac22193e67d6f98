#include "c2dn/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "c2dn/codec.hpp"
#include "c2dn/error.hpp"
#include "c2dn/io.hpp"

namespace c2dn::study {
namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string num(double v) { return fmt("%.10g", v); }

std::string condition_label(double fraction) {
  if (fraction >= 1.0) return "nominal";
  return fmt("%g", fraction * 100.0) + "%";
}

std::string condition_stem(double fraction) { return fmt("f%.3f", fraction); }

std::string g2_table(const G2Curve& raw, const G2Curve& den, const G2Curve& truth) {
  std::string out = "lag,raw,denoised,truth\n";
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out += std::to_string(raw.lags[i]) + "," + num(raw.values[i]) + "," +
           num(den.values[i]) + "," + num(truth.values[i]) + "\n";
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Maps data coordinates into a plot box.
struct Frame {
  double x0, x1, y0, y1;  // data range
  double left, top, width, height;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + (y1 - y) / (y1 - y0) * height; }
};

Frame frame_for(double x0, double x1, double y0, double y1, double left,
                double top, double width, double height) {
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  return {x0, x1, y0 - pad, y1 + pad, left, top, width, height};
}

std::string axes(const Frame& f, const std::string& xlabel) {
  std::string s;
  s += "<rect x=\"" + num(f.left) + "\" y=\"" + num(f.top) + "\" width=\"" +
       num(f.width) + "\" height=\"" + num(f.height) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.top + 10) +
       "\" text-anchor=\"end\" font-size=\"10\">" + fmt("%.4g", f.y1) + "</text>\n";
  s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.top + f.height) +
       "\" text-anchor=\"end\" font-size=\"10\">" + fmt("%.4g", f.y0) + "</text>\n";
  s += "<text x=\"" + num(f.left) + "\" y=\"" + num(f.top + f.height + 14) +
       "\" font-size=\"10\">" + fmt("%.4g", f.x0) + "</text>\n";
  s += "<text x=\"" + num(f.left + f.width) + "\" y=\"" +
       num(f.top + f.height + 14) + "\" text-anchor=\"end\" font-size=\"10\">" +
       fmt("%.4g", f.x1) + "</text>\n";
  s += "<text x=\"" + num(f.left + f.width / 2) + "\" y=\"" +
       num(f.top + f.height + 14) + "\" text-anchor=\"middle\" font-size=\"10\">" +
       xlabel + "</text>\n";
  return s;
}

std::string polyline(const Frame& f, const std::vector<double>& x,
                     const std::vector<double>& y, const std::string& style) {
  std::string pts;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(y[i])) continue;
    if (!pts.empty()) pts += ' ';
    pts += fmt("%.2f", f.px(x[i])) + "," + fmt("%.2f", f.py(y[i]));
  }
  return "<polyline fill=\"none\" " + style + " points=\"" + pts + "\"/>\n";
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') {
      out += "&lt;";
    } else if (c == '>') {
      out += "&gt;";
    } else if (c == '&') {
      out += "&amp;";
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

void BootstrapScenario::validate() const {
  dynamics.validate();
  speckle.validate();
  if (n_frames < 16) throw_config("bootstrap: n_frames must be >= 16");
  if (fractions.empty()) throw_config("bootstrap: no fractions given");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw_config("bootstrap: fractions must lie in (0, 1], got " + num(f));
    }
    if (std::llround(f * static_cast<double>(speckle.n_pixels)) < 2) {
      throw_config("bootstrap: fraction " + num(f) + " of " +
                   std::to_string(speckle.n_pixels) + " pixels leaves fewer than 2");
    }
  }
  if (replicates < 1) throw_config("bootstrap: replicates must be >= 1");
  if (!(fit_lag_fraction > 0.0 && fit_lag_fraction <= 1.0)) {
    throw_config("bootstrap: fit_lag_fraction must lie in (0, 1]");
  }
  const auto max_lag = static_cast<std::size_t>(
      std::floor(fit_lag_fraction * static_cast<double>(n_frames - 1)));
  if (max_lag < fit::parameter_count(fit_kind) + 1) {
    throw_config("bootstrap: fit_lag_fraction * (n_frames - 1) leaves too few lags for a " +
                 fit::to_string(fit_kind) + " fit");
  }
}

StudyReport bootstrap_study(const dae::Model& model,
                            const BootstrapScenario& scenario,
                            const fs::path& out_dir) {
  scenario.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw_io("bootstrap: cannot create output directory " + out_dir.string());
  }

  const std::size_t t = scenario.n_frames;
  const auto sample = synth::make_sample(scenario.dynamics, scenario.speckle, t,
                                         scenario.seed);
  const C2Matrix truth = corr::repair_diagonal(sample.c2_truth);
  const C2Matrix nominal = corr::repair_diagonal(sample.c2_raw);
  const G2Curve truth_g2 = corr::extract_g2(truth);

  StudyReport report;
  report.scenario = scenario;
  // One tau* for every condition, from the nominal raw data, so the SNR
  // columns compare the same diagonal.
  report.tau_star = std::clamp<std::size_t>(
      metrics::find_tau_star(corr::extract_g2(nominal)), 1, t - 1);
  report.truth_path = "truth.c2f";
  io::write_c2(out_dir / report.truth_path, truth, true,
               scenario.dynamics.summary() + ";" + scenario.speckle.summary());

  const int max_lag = static_cast<int>(
      std::floor(scenario.fit_lag_fraction * static_cast<double>(t - 1)));
  fit::FitOptions fo;
  fo.kind = scenario.fit_kind;
  const std::size_t amp_index = 4;

  for (std::size_t fi = 0; fi < scenario.fractions.size(); ++fi) {
    const double fraction = scenario.fractions[fi];
    ConditionRecord rec;
    rec.label = condition_label(fraction);
    rec.fraction = fraction;
    rec.n_pixels = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(scenario.speckle.n_pixels)));
    rec.replicates = fraction >= 1.0 ? 1 : scenario.replicates;

    std::vector<double> snr_r, snr_d, beta_r, beta_d, r2_r, r2_d;
    for (std::size_t rep = 0; rep < rec.replicates; ++rep) {
      C2Matrix raw = nominal;
      if (fraction < 1.0) {
        const auto seed = synth::derive_seed(scenario.seed, 1000 * (fi + 1) + rep);
        raw = corr::repair_diagonal(
            corr::compute_c2(corr::bootstrap_pixels(sample.series, fraction, seed)));
      }
      const C2Matrix den = dae::denoise(model, raw);
      snr_r.push_back(metrics::snr(raw, report.tau_star));
      snr_d.push_back(metrics::snr(den, report.tau_star));
      beta_r.push_back(metrics::estimate_beta_obs(raw));
      beta_d.push_back(metrics::estimate_beta_obs(den));

      const G2Curve g_raw = corr::extract_g2(raw);
      const G2Curve g_den = corr::extract_g2(den);
      const auto fit_raw = fit::fit_g2(g_raw.truncated(max_lag), fo);
      const auto fit_den = fit::fit_g2(g_den.truncated(max_lag), fo);
      r2_r.push_back(fit_raw.r_squared);
      r2_d.push_back(fit_den.r_squared);
      if (fo.kind == fit::ModelKind::Composite) {
        rec.amp_raw_replicates.push_back(fit_raw.params[amp_index]);
        rec.amp_denoised_replicates.push_back(fit_den.params[amp_index]);
      }

      if (rep == 0) {
        const std::string stem = condition_stem(fraction);
        rec.raw_path = "raw_" + stem + ".c2f";
        rec.denoised_path = "denoised_" + stem + ".c2f";
        rec.g2_path = "g2_" + stem + ".csv";
        rec.plot_path = "g2_" + stem + ".svg";
        const std::string prov = "bootstrap fraction=" + num(fraction);
        io::write_c2(out_dir / rec.raw_path, raw, true, prov);
        io::write_c2(out_dir / rec.denoised_path, den, true, prov + ";denoised");
        io::atomic_write(out_dir / rec.g2_path, g2_table(g_raw, g_den, truth_g2));
        io::atomic_write(out_dir / rec.plot_path,
                         g2_overlay_svg(g_raw.truncated(max_lag),
                                        g_den.truncated(max_lag),
                                        truth_g2.truncated(max_lag),
                                        "g2, " + rec.label));
        rec.fit_raw = fit_raw;
        rec.fit_denoised = fit_den;
      }
    }
    rec.snr_raw = mean_of(snr_r);
    rec.snr_denoised = mean_of(snr_d);
    rec.beta_obs_raw = mean_of(beta_r);
    rec.beta_obs_denoised = mean_of(beta_d);
    rec.delta_beta_rel =
        metrics::contrast_shift(rec.beta_obs_raw, rec.beta_obs_denoised).value;
    rec.amp_raw = mean_of(rec.amp_raw_replicates);
    rec.amp_denoised = mean_of(rec.amp_denoised_replicates);
    rec.r_squared_raw = mean_of(r2_r);
    rec.r_squared_denoised = mean_of(r2_d);
    report.records.push_back(std::move(rec));
  }

  io::atomic_write(out_dir / "study.json", codec::to_json(report).dump(2) + "\n");
  io::atomic_write(out_dir / "study.csv", study_csv(report));
  return report;
}

std::string study_csv(const StudyReport& report) {
  std::string out =
      "label,fraction,n_pixels,replicates,snr_raw,snr_denoised,beta_obs_raw,"
      "beta_obs_denoised,delta_beta_rel,amp_raw,amp_denoised,r_squared_raw,"
      "r_squared_denoised\n";
  for (const auto& r : report.records) {
    out += r.label + "," + num(r.fraction) + "," + std::to_string(r.n_pixels) + "," +
           std::to_string(r.replicates) + "," + num(r.snr_raw) + "," +
           num(r.snr_denoised) + "," + num(r.beta_obs_raw) + "," +
           num(r.beta_obs_denoised) + "," + num(r.delta_beta_rel) + "," +
           num(r.amp_raw) + "," + num(r.amp_denoised) + "," +
           num(r.r_squared_raw) + "," + num(r.r_squared_denoised) + "\n";
  }
  return out;
}

metrics::EnsembleVarianceReport ensemble_study(const std::vector<dae::Model>& models,
                                               const std::vector<C2Matrix>& raws) {
  if (models.size() < 2) throw_config("need ≥ 2 models");
  if (raws.empty()) throw_config("ensemble: no samples to denoise");
  std::vector<std::vector<C2Matrix>> outputs;
  outputs.reserve(raws.size());
  for (const auto& raw : raws) {
    std::vector<C2Matrix> per_model;
    per_model.reserve(models.size());
    for (const auto& m : models) per_model.push_back(dae::denoise(m, raw));
    outputs.push_back(std::move(per_model));
  }
  return metrics::ensemble_report(raws, outputs);
}

std::string g2_overlay_svg(const G2Curve& raw, const G2Curve& denoised,
                           const G2Curve& truth, const std::string& title) {
  std::vector<double> xr, yr, xd, yd, xt, yt;
  double lo = INFINITY, hi = -INFINITY, xmax = 1.0;
  auto collect = [&](const G2Curve& g, std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.lags[i] == 0) continue;
      x.push_back(g.lags[i]);
      y.push_back(g.values[i]);
      if (std::isfinite(g.values[i])) {
        lo = std::min(lo, g.values[i]);
        hi = std::max(hi, g.values[i]);
      }
      xmax = std::max(xmax, static_cast<double>(g.lags[i]));
    }
  };
  collect(raw, xr, yr);
  collect(denoised, xd, yd);
  collect(truth, xt, yt);
  if (!std::isfinite(lo)) lo = hi = 1.0;
  const Frame f = frame_for(1.0, xmax, lo, hi, 70, 36, 540, 300);

  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"380\" "
      "font-family=\"sans-serif\">\n<rect width=\"640\" height=\"380\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(title) + "</text>\n";
  s += axes(f, "lag (frames)");
  for (std::size_t i = 0; i < xr.size(); ++i) {
    if (!std::isfinite(yr[i])) continue;
    s += "<circle cx=\"" + fmt("%.2f", f.px(xr[i])) + "\" cy=\"" +
         fmt("%.2f", f.py(yr[i])) + "\" r=\"2.5\" fill=\"#8ec3e6\"/>\n";
  }
  s += polyline(f, xd, yd, "stroke=\"#e67e22\" stroke-width=\"2\"");
  s += polyline(f, xt, yt,
                "stroke=\"#1f4e79\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"");
  s += "<text x=\"600\" y=\"52\" text-anchor=\"end\" font-size=\"11\" "
       "fill=\"#5a9bc7\">raw</text>\n";
  s += "<text x=\"600\" y=\"66\" text-anchor=\"end\" font-size=\"11\" "
       "fill=\"#e67e22\">denoised</text>\n";
  s += "<text x=\"600\" y=\"80\" text-anchor=\"end\" font-size=\"11\" "
       "fill=\"#1f4e79\">truth</text>\n";
  s += "</svg>\n";
  return s;
}

std::string trace_svg(const fit::SliceTrace& trace) {
  const auto names = fit::parameter_names(trace.kind);
  const double panel = 110.0;
  const double height = 30.0 + panel * static_cast<double>(names.size() + 1);
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"" +
                  num(height) + "\" font-family=\"sans-serif\">\n<rect width=\"640\" height=\"" +
                  num(height) + "\" fill=\"white\"/>\n";
  std::vector<double> ages(trace.ages.begin(), trace.ages.end());
  const double a0 = ages.empty() ? 0.0 : ages.front();
  const double a1 = ages.empty() ? 1.0 : ages.back();

  auto panel_for = [&](std::size_t row, const std::string& name,
                       const std::vector<double>& y, const std::vector<double>& sig) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!std::isfinite(y[i])) continue;
      lo = std::min(lo, y[i]);
      hi = std::max(hi, y[i]);
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    const double top = 20.0 + panel * static_cast<double>(row);
    const Frame f = frame_for(a0, a1, lo, hi, 90, top, 520, panel - 40);
    std::string p = axes(f, "age");
    p += "<text x=\"14\" y=\"" + num(top + (panel - 40) / 2) +
         "\" font-size=\"11\">" + name + "</text>\n";
    if (!sig.empty()) {
      std::vector<double> up(y.size()), dn(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        up[i] = std::clamp(y[i] + sig[i], f.y0, f.y1);
        dn[i] = std::clamp(y[i] - sig[i], f.y0, f.y1);
      }
      p += polyline(f, ages, up, "stroke=\"#bbb\" stroke-width=\"1\"");
      p += polyline(f, ages, dn, "stroke=\"#bbb\" stroke-width=\"1\"");
    }
    p += polyline(f, ages, y, "stroke=\"#1f4e79\" stroke-width=\"1.5\"");
    return p;
  };

  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<double> y, sig;
    for (const auto& fr : trace.fits) {
      y.push_back(fr.params[k]);
      sig.push_back(k < fr.sigma1.size() ? fr.sigma1[k] : 0.0);
    }
    s += panel_for(k, names[k], y, sig);
  }
  std::vector<double> r2;
  for (const auto& fr : trace.fits) r2.push_back(fr.r_squared);
  s += panel_for(names.size(), "R^2", r2, {});
  s += "</svg>\n";
  return s;
}

synth::DatasetConfig desk_dataset(std::uint64_t seed) {
  using synth::DynamicsSpec;
  synth::DatasetConfig c;
  c.dynamics = {DynamicsSpec::stationary(8.0, 1.0),
                DynamicsSpec::stationary(20.0, 0.8),
                DynamicsSpec::stationary(14.0, 1.5),
                DynamicsSpec::aging(6.0, 0.3, 1.0),
                DynamicsSpec::oscillatory(15.0, 1.0, 0.4, 0.35, 0.02),
                DynamicsSpec::two_step(4.0, 1.0, 0.5, 30.0, 1.0)};
  c.speckle = {synth::SpeckleSpec{500, 1, std::nullopt}};
  c.n_frames = {128};
  c.replicates = 7;
  c.split = {0.8, 0.1, 0.1};
  c.crop_size = 64;
  c.crop_stride = 32;
  c.reverse_age = true;
  c.write_pixel_series = false;
  c.seed = seed;
  return c;
}

dae::TrainConfig desk_training(std::uint64_t shuffle_seed) {
  dae::TrainConfig t;
  t.batch_size = 4;
  t.learning_rate = 2e-3;
  t.max_epochs = 30;
  t.shuffle_seed = shuffle_seed;
  return t;
}

}  // namespace c2dn::study
