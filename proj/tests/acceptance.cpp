// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
// Criteria 5, 6, 8, 9 and 10 share one desk-scale training run; expect
// roughly 15 minutes on a single core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "c2dn/c2.hpp"
#include "c2dn/fcdae.hpp"
#include "c2dn/fitdyn.hpp"
#include "c2dn/io.hpp"
#include "c2dn/metrics.hpp"
#include "c2dn/nn.hpp"
#include "c2dn/study.hpp"
#include "c2dn/synth.hpp"
#include "support.hpp"

using namespace c2dn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string& name, Outcome& o) {
  std::printf("%s criterion %d: %s:%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.str().c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

// --- criterion 1 --------------------------------------------------------------

nn::ConvLayerParams random_layer(std::size_t in, std::size_t out, bool transpose,
                                 std::uint64_t seed) {
  auto l = transpose ? nn::ConvLayerParams::for_transpose(in, out, 3)
                     : nn::ConvLayerParams::for_conv(in, out, 3);
  l.weights = support::random_tensor(l.weights.batch(), l.weights.channels(), 3, 3, seed);
  l.bias = support::random_vector(l.bias.size(), seed + 1);
  return l;
}

void gradient_fidelity() {
  const auto t0 = Clock::now();
  Outcome o;
  double worst = 0.0;
  auto track = [&](std::span<const double> a, std::span<const double> n, double tol,
                   const std::string& what) {
    const double e = support::rel_error(a, n);
    worst = std::max(worst, e);
    o.require(e <= tol, what + " rel " + std::to_string(e));
  };

  for (bool transpose : {false, true}) {
    auto layer = random_layer(2, 3, transpose, 11);
    nn::Tensor4 x = support::random_tensor(2, 2, 5, 6, 12);
    const auto u = support::random_tensor(2, 3, 5, 6, 13);
    auto fwd = [&] {
      return nn::dot(transpose ? nn::conv_transpose2d(x, layer) : nn::conv2d(x, layer), u);
    };
    const auto g = transpose ? nn::conv_transpose2d_grad(u, x, layer) : nn::conv2d_grad(u, x, layer);
    const std::string tag = transpose ? "conv_transpose2d" : "conv2d";
    track(g.input.data(), support::numeric_gradient(x.data(), fwd), 1e-5, tag + " input");
    track(g.weights.data(), support::numeric_gradient(layer.weights.data(), fwd), 1e-5,
          tag + " weights");
    track(g.bias, support::numeric_gradient(std::span<double>(layer.bias), fwd), 1e-5,
          tag + " bias");
  }

  {
    nn::Tensor4 x = support::random_tensor(3, 2, 4, 4, 21);
    nn::BatchNormParams bn(2);
    bn.gamma = {0.8, -1.2};
    bn.beta_shift = {0.1, -0.3};
    const auto u = support::random_tensor(3, 2, 4, 4, 22);
    nn::BatchNormCache cache;
    nn::BatchNormParams scratch = bn;
    nn::batchnorm2d(x, scratch, nn::Mode::Train, &cache);
    const auto g = nn::batchnorm2d_grad(u, cache, bn);
    auto fwd = [&] {
      nn::BatchNormParams p = bn;
      return nn::dot(nn::batchnorm2d(x, p, nn::Mode::Train), u);
    };
    track(g.input.data(), support::numeric_gradient(x.data(), fwd), 1e-5, "batchnorm input");
    track(g.gamma, support::numeric_gradient(std::span<double>(bn.gamma), fwd), 1e-5,
          "batchnorm gamma");
    track(g.beta_shift, support::numeric_gradient(std::span<double>(bn.beta_shift), fwd), 1e-5,
          "batchnorm beta");
  }

  {
    nn::Tensor4 x = support::random_tensor(1, 2, 4, 4, 31, -2.0, 2.0);
    const auto u = support::random_tensor(1, 2, 4, 4, 32);
    const auto g = nn::elu_grad(u, x);
    auto fwd = [&] { return nn::dot(nn::elu(x), u); };
    track(g.data(), support::numeric_gradient(x.data(), fwd), 1e-5, "elu");
  }

  {
    nn::Tensor4 pred = support::random_tensor(2, 1, 4, 4, 41);
    const auto target = support::random_tensor(2, 1, 4, 4, 42);
    const auto lg = nn::mse_loss(pred, target);
    auto fwd = [&] { return nn::mse_loss(pred, target).loss; };
    track(lg.grad.data(), support::numeric_gradient(pred.data(), fwd), 1e-5, "mse");
  }

  double e2e = 0.0;
  {
    const dae::Model model = dae::build_model(dae::Architecture{}, 51);
    const auto x = support::random_tensor(2, 1, 8, 8, 52);
    const auto target = support::random_tensor(2, 1, 8, 8, 53);
    dae::Tape tape;
    dae::Model work = model;
    const auto lg = nn::mse_loss(dae::forward_train(work, x, tape), target);
    const auto analytic = dae::backward(model, tape, lg.grad);
    std::vector<double> flat = model.flatten_parameters();
    auto loss = [&] {
      dae::Model probe = model;
      probe.assign_parameters(flat);
      dae::Tape t;
      return nn::mse_loss(dae::forward_train(probe, x, t), target).loss;
    };
    const auto numeric = support::numeric_gradient(std::span<double>(flat), loss);
    e2e = support::rel_error(analytic, numeric);
    o.require(e2e <= 1e-4, "end-to-end rel " + std::to_string(e2e));
  }

  const double elapsed = seconds_since(t0);
  o.require(elapsed < 120.0, "runtime " + std::to_string(elapsed) + " s");
  o.detail << " worst primitive rel err " << worst << ", end-to-end " << e2e << ", " << elapsed
           << " s";
  report(1, "gradient fidelity", o);
}

// --- criterion 2 --------------------------------------------------------------

void shape_preservation() {
  Outcome o;
  const auto model = dae::build_model(dae::Architecture{}, 0);
  for (std::size_t n : {3, 32, 100, 134, 257}) {
    const auto out = dae::forward(model, support::random_tensor(1, 1, n, n, n));
    o.require(out.batch() == 1 && out.channels() == 1 && out.height() == n && out.width() == n,
              std::to_string(n) + " -> " + out.shape_string());
  }
  o.detail << " n in {3, 32, 100, 134, 257} with channels [1,4,8,16,32]";
  report(2, "shape preservation", o);
}

// --- criterion 3 --------------------------------------------------------------

void oracle_equivalence() {
  Outcome o;
  constexpr int kCases = 60;
  double worst = 0.0;
  std::mt19937_64 rng(2718);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  auto check = [&](double err, const std::string& what) {
    worst = std::max(worst, err);
    o.require(err <= 1e-12, what + " err " + std::to_string(err));
  };

  for (int c = 0; c < kCases; ++c) {
    const auto s = support::random_series(pick(2, 40), pick(1, 24), 100 + c);
    const auto fast = corr::compute_c2(s);
    check(support::max_abs_diff(fast.values(), support::naive_c2(s).values()), "compute_c2");
  }
  for (int c = 0; c < kCases; ++c) {
    const auto m = support::random_symmetric(pick(2, 40), 200 + c);
    const auto g = corr::extract_g2(m);
    const auto ref = support::naive_g2(m);
    o.require(g.size() == ref.size(), "extract_g2 length");
    check(support::max_abs_diff(g.values, ref), "extract_g2");
  }
  for (int c = 0; c < kCases; ++c) {
    const std::size_t n = pick(2, 50);
    const std::size_t size = pick(1, n);
    const std::size_t stride = pick(1, n);
    const auto m = support::random_symmetric(n, 300 + c);
    std::vector<std::size_t> anchors;
    for (std::size_t a = 0; a + size <= n; a += stride) anchors.push_back(a);
    if (anchors.back() != n - size) anchors.push_back(n - size);
    const auto tiles = corr::crop_diagonal_tiles(m, size, stride);
    o.require(tiles.size() == anchors.size(), "crop count");
    for (std::size_t t = 0; t < std::min(tiles.size(), anchors.size()); ++t) {
      double err = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
          err = std::max(err, std::abs(tiles[t](i, j) - m(anchors[t] + i, anchors[t] + j)));
        }
      }
      check(err, "crop_diagonal_tiles");
    }
  }
  for (int c = 0; c < kCases; ++c) {
    const auto s = support::random_series(pick(2, 30), pick(2, 30), 400 + c);
    const std::size_t k = pick(1, s.n_frames - 1);
    // Subsampling C2 indices must equal recomputing from every k-th frame.
    PixelSeries kept(s.n_pixels, (s.n_frames + k - 1) / k);
    for (std::size_t p = 0; p < s.n_pixels; ++p) {
      for (std::size_t t = 0; t < kept.n_frames; ++t) {
        kept.intensities[p * kept.n_frames + t] = s.at(p, t * k);
      }
    }
    const auto sub = corr::subsample_frames(corr::compute_c2(s), k);
    const auto ref = support::naive_c2(kept);
    o.require(sub.size() == ref.size(), "subsample size");
    if (sub.size() == ref.size()) check(support::max_abs_diff(sub.values(), ref.values()), "subsample_frames");
  }
  o.detail << " " << kCases << " randomized cases per operation, max abs err " << worst;
  report(3, "oracle equivalence", o);
}

// --- criterion 4 --------------------------------------------------------------

void round_trips(const fs::path& dir) {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = support::random_symmetric(17, seed, 0.9, 1.6);
    const auto st = corr::standardize(m);
    const auto back = corr::destandardize(st.matrix, st.params);
    worst = std::max(worst, support::max_abs_diff(back.values(), m.values()));
  }
  o.require(worst <= 1e-12, "standardize err " + std::to_string(worst));

  dae::Model model = dae::build_model(dae::Architecture{}, 3);
  model.encoder_bn[1].running_mean[0] = 0.125;
  model.meta.epochs_run = 4;
  dae::save_checkpoint(model, dir / "rt.fcda");
  const auto loaded = dae::load_checkpoint(dir / "rt.fcda");
  o.require(dae::encode_checkpoint(loaded) == io::read_file(dir / "rt.fcda"), "checkpoint bytes");
  o.require(loaded.flatten_parameters() == model.flatten_parameters(), "checkpoint params");

  C2Matrix c2 = support::random_symmetric(23, 9);
  c2.set_frame_interval_s(0.005);
  c2.set_q_label("q=0.0031");
  io::write_c2(dir / "rt.c2f", c2);
  o.require(io::read_c2(dir / "rt.c2f") == c2, "C2F1 values");

  const auto series = support::random_series(13, 29, 10);
  io::write_series(dir / "rt.pxs", series);
  o.require(io::read_series(dir / "rt.pxs") == series, "PXS1 values");
  o.detail << " standardize max err " << worst << "; checkpoint, C2F1, PXS1 bit-exact";
  report(4, "round trips", o);
}

// --- criterion 7 --------------------------------------------------------------

void metric_correctness() {
  Outcome o;
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed + 5000);
    std::normal_distribution<double> n(0.0, 1.0);
    C2Matrix a(400, 0.0), b(400, 0.0);
    for (double& v : b.values()) v = n(rng);
    passes += metrics::residual_acf_test(a, b).pass ? 1 : 0;
  }
  o.require(passes >= 90, "white noise passes " + std::to_string(passes));

  C2Matrix zero(64, 0.0), sine(64, 0.0);
  for (std::size_t i = 0; i < 64; ++i) {
    for (std::size_t t = 0; t < 64; ++t) sine(i, t) = std::sin(2.0 * M_PI * double(t) / 16.0);
  }
  const bool sine_fails = !metrics::residual_acf_test(zero, sine).pass;
  o.require(sine_fails, "sinusoid passed");

  const auto x = support::random_symmetric(40, 77);
  const double s = metrics::ssim(x, x);
  o.require(std::abs(s - 1.0) <= 1e-9, "ssim(x,x) " + std::to_string(s));

  C2Matrix two(20, 1.0);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) two(i, j) = 1.3;
  }
  const double gap = metrics::estimate_beta_obs(two);
  o.require(gap == 1.3 - 1.0, "two-level beta_obs " + std::to_string(gap));

  const std::vector<double> d{1.0, 2.0, 3.0};
  const double snr = metrics::snr_of(d);
  o.require(std::abs(snr - std::log10(3.0)) <= 1e-12, "snr " + std::to_string(snr));
  o.detail << " ACF white-noise passes " << passes << "/100, sinusoid rejected "
           << (sine_fails ? "yes" : "no") << ", ssim(x,x)-1 = " << s - 1.0
           << ", two-level beta_obs " << gap << ", snr([1,2,3]) " << snr;
  report(7, "metric correctness", o);
}

// --- criterion 9, fit part ---------------------------------------------------

G2Curve kww_curve(const std::vector<double>& p, int n_lags, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise > 0 ? noise : 1.0);
  G2Curve c;
  for (int tau = 0; tau <= n_lags; ++tau) {
    c.lags.push_back(tau);
    const double v = p[0] + p[1] * std::exp(-2.0 * std::pow(tau / p[2], p[3]));
    c.values.push_back(v + (noise > 0 ? n(rng) : 0.0));
    c.n_averaged.push_back(1);
  }
  return c;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

void fit_recovery(const dae::Model& model) {
  Outcome o;
  const std::vector<double> truth{1.0, 0.2, 50.0, 0.8};
  const auto clean = fit::fit_g2(kww_curve(truth, 200, 0.0, 0));
  double clean_err = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    clean_err = std::max(clean_err, std::abs(clean.params[i] - truth[i]) / std::abs(truth[i]));
  }
  o.require(clean.converged && clean_err <= 1e-6, "noise-free rel err " + std::to_string(clean_err));

  const auto noisy = fit::fit_g2(kww_curve(truth, 200, 0.01, 7));
  double noisy_err = 0.0;
  bool within_3s = true;
  for (std::size_t i = 0; i < 4; ++i) {
    const double d = std::abs(noisy.params[i] - truth[i]);
    noisy_err = std::max(noisy_err, d / std::abs(truth[i]));
    within_3s = within_3s && d <= 3.0 * noisy.sigma1[i];
  }
  o.require(noisy.converged && noisy_err <= 0.05, "noisy rel err " + std::to_string(noisy_err));
  o.require(within_3s, "noisy fit outside 3 sigma");

  const study::BootstrapScenario sc;
  const auto sample = synth::make_sample(sc.dynamics, sc.speckle, sc.n_frames, sc.seed);
  const auto raw = corr::repair_diagonal(sample.c2_raw);
  const auto den = dae::denoise(model, raw);
  fit::SliceOptions so;
  so.kind = fit::ModelKind::Composite;
  auto summarize = [&](const C2Matrix& m, double& r2, double& tau_std) {
    const auto trace = fit::fit_slices(m, so);
    std::vector<double> r, t;
    for (const auto& f : trace.fits) {
      r.push_back(f.r_squared);
      t.push_back(f.params[2]);
    }
    r2 = mean_of(r);
    tau_std = std_of(t);
  };
  double r2_raw, r2_den, std_raw, std_den;
  summarize(raw, r2_raw, std_raw);
  summarize(den, r2_den, std_den);
  o.require(r2_den > r2_raw, "mean R2 denoised not above raw");
  o.require(std_den < std_raw, "tau_c trace std denoised not below raw");
  o.detail << " self-fit rel err " << clean_err << ", noisy rel err " << noisy_err
           << "; oscillatory slices mean R2 raw " << r2_raw << " / denoised " << r2_den
           << ", tau_c std raw " << std_raw << " / denoised " << std_den;
  report(9, "fit recovery", o);
}

// --- criteria 5, 6, 8, 10 -------------------------------------------------------

std::vector<dae::TrainingPair> pairs_of(const std::vector<synth::RawTruthPair>& recs) {
  std::vector<dae::TrainingPair> out;
  for (const auto& r : recs) out.push_back(dae::make_training_pair(r.raw, r.truth));
  return out;
}

void denoising_efficacy(const dae::Model& model, const std::vector<synth::RawTruthPair>& held,
                        std::size_t n_train, std::size_t epochs, double train_s) {
  Outcome o;
  double mse_raw = 0.0, mse_den = 0.0;
  std::size_t snr_ok = 0;
  for (const auto& p : held) {
    const auto den = dae::denoise(model, p.raw);
    mse_raw += support::mse(p.raw, p.truth);
    mse_den += support::mse(den, p.truth);
    const auto rep = metrics::evaluate(p.raw, den);
    if (rep.snr_denoised >= rep.snr_raw) ++snr_ok;
  }
  mse_raw /= static_cast<double>(held.size());
  mse_den /= static_cast<double>(held.size());
  o.require(n_train >= 150 && epochs <= 30 && train_s < 1800.0, "training budget");
  o.require(mse_den <= 0.5 * mse_raw, "MSE ratio " + std::to_string(mse_den / mse_raw));
  o.require(snr_ok == held.size(), "snr improved on " + std::to_string(snr_ok) + "/" +
                                       std::to_string(held.size()));
  o.detail << " " << n_train << " training crops, " << epochs << " epochs, " << train_s
           << " s; held-out MSE raw " << mse_raw << " / denoised " << mse_den << " (ratio "
           << mse_den / mse_raw << "), snr_denoised >= snr_raw on " << snr_ok << "/" << held.size();
  report(5, "denoising efficacy", o);
}

void bootstrap_trend(const dae::Model& model, const fs::path& dir) {
  Outcome o;
  const auto rep = study::bootstrap_study(model, study::BootstrapScenario{}, dir / "bootstrap");
  std::ostringstream snrs, amps;
  bool strict = true;
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    snrs << (i ? " > " : "") << rep.records[i].snr_raw;
    amps << (i ? ", " : "") << rep.records[i].amp_denoised;
    if (i > 0) strict = strict && rep.records[i].snr_raw < rep.records[i - 1].snr_raw;
  }
  o.require(strict, "snr_raw not strictly decreasing");
  const double a_nom = rep.records.front().amp_denoised;
  const double a_min = rep.records.back().amp_denoised;
  o.require(a_min < a_nom, "amplitude at 0.05 not below nominal");
  o.detail << " snr_raw " << snrs.str() << "; fitted amp (denoised) " << amps.str();
  report(6, "bootstrap degradation trend", o);
}

void contrast_preservation(const dae::Model& model,
                           const std::vector<synth::RawTruthPair>& validation) {
  Outcome o;
  std::size_t used = 0;
  double worst = 0.0;
  for (const auto& p : validation) {
    const double b_raw = metrics::estimate_beta_obs(p.raw);
    if (b_raw <= 0.1) continue;
    const double b_den = metrics::estimate_beta_obs(dae::denoise(model, p.raw));
    const double shift = metrics::contrast_shift(b_raw, b_den).value;
    worst = std::max(worst, std::abs(shift));
    ++used;
  }
  o.require(used > 0, "no validation sample with beta_obs > 0.1");
  o.require(worst < 0.10, "max |delta beta_rel| " + std::to_string(worst));
  o.detail << " " << used << " validation samples, max |delta beta_rel| " << worst;
  report(8, "contrast preservation", o);
}

void ensemble_stability(const dae::Model& first, const std::vector<dae::TrainingPair>& train,
                        const std::vector<synth::RawTruthPair>& validation) {
  Outcome o;
  const auto cfg = study::desk_training();
  std::vector<dae::Model> models{first};
  const auto more = dae::train_ensemble(dae::Architecture{}, train, cfg, {1, 2, 3});
  models.insert(models.end(), more.begin(), more.end());

  std::vector<C2Matrix> raws;
  for (const auto& p : validation) raws.push_back(p.raw);
  const auto rep = study::ensemble_study(models, raws);
  bool nonneg = true;
  for (double v : rep.per_sample_variance) nonneg = nonneg && v >= 0.0;
  o.require(nonneg, "negative variance");
  o.require(rep.median_ratio < 0.05, "median ratio " + std::to_string(rep.median_ratio));
  o.require(rep.p10_ratio <= rep.median_ratio && rep.median_ratio <= rep.p90_ratio,
            "percentile order");

  const auto same = study::ensemble_study({first, first, first, first}, raws);
  bool zero = true;
  for (double v : same.per_sample_variance) zero = zero && v == 0.0;
  o.require(zero, "identical seeds gave nonzero variance");
  o.detail << " k=4 on " << raws.size() << " validation samples: mean variance "
           << rep.mean_variance << ", variance/beta_obs median " << rep.median_ratio << " (p10 "
           << rep.p10_ratio << ", p90 " << rep.p90_ratio << "); identical seeds variance 0: "
           << (zero ? "yes" : "no");
  report(10, "ensemble stability", o);
}

}  // namespace

int main() {
  const fs::path dir = support::scratch_dir("acceptance");
  auto guarded = [](int id, const std::function<void()>& f) {
    try {
      f();
    } catch (const std::exception& e) {
      std::printf("FAIL criterion %d: threw %s\n", id, e.what());
      ++failures;
    }
  };

  guarded(1, gradient_fidelity);
  guarded(2, shape_preservation);
  guarded(3, oracle_equivalence);
  guarded(4, [&] { round_trips(dir); });
  guarded(7, metric_correctness);

  try {
    const auto cfg = study::desk_dataset();
    synth::build_dataset(cfg, dir / "dataset");
    const auto manifest = dir / "dataset" / "manifest.tsv";
    const auto train_pairs = pairs_of(synth::load_pairs(manifest, "train"));
    const auto validation = synth::load_pairs(manifest, "validation");
    auto held = validation;
    for (auto& p : synth::load_pairs(manifest, "test")) held.push_back(std::move(p));

    const auto tcfg = study::desk_training();
    dae::Model model = dae::build_model(dae::Architecture{}, 0);
    const auto t0 = Clock::now();
    const auto losses = dae::train(model, train_pairs, tcfg);
    const double train_s = seconds_since(t0);
    std::printf("  trained %zu epochs in %.0f s, loss %.4g -> %.4g\n", losses.size(), train_s,
                losses.front(), losses.back());
    std::fflush(stdout);

    guarded(5, [&] { denoising_efficacy(model, held, train_pairs.size(), losses.size(), train_s); });
    guarded(6, [&] { bootstrap_trend(model, dir); });
    guarded(8, [&] { contrast_preservation(model, validation); });
    guarded(9, [&] { fit_recovery(model); });
    guarded(10, [&] { ensemble_stability(model, train_pairs, validation); });
  } catch (const std::exception& e) {
    std::printf("FAIL criteria 5, 6, 8, 9, 10: desk training failed: %s\n", e.what());
    failures += 5;
  }

  fs::remove_all(dir);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
