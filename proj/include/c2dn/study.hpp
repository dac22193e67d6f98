#pragma once

// Pipeline-level studies built on the core modules: the pixel-bootstrap
// degradation study, the seed-ensemble variance study, and the desk-scale
// presets shared by the CLI configs and the acceptance run.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "c2dn/c2.hpp"
#include "c2dn/fcdae.hpp"
#include "c2dn/fitdyn.hpp"
#include "c2dn/metrics.hpp"
#include "c2dn/synth.hpp"

namespace c2dn::study {

struct BootstrapScenario {
  synth::DynamicsSpec dynamics =
      synth::DynamicsSpec::oscillatory(15.0, 1.0, 0.4, 0.35, 0.02);
  synth::SpeckleSpec speckle{500, 1, std::nullopt};
  std::size_t n_frames = 64;
  std::uint64_t seed = 5;
  std::vector<double> fractions{1.0, 0.5, 0.25, 0.10, 0.05};
  /// Independent pixel draws per fraction below 1; per-condition numbers are
  /// replicate means.
  std::size_t replicates = 8;
  fit::ModelKind fit_kind = fit::ModelKind::Composite;
  /// g2 lags up to this fraction of T enter the condition fits.
  double fit_lag_fraction = 0.5;

  void validate() const;
};

struct ConditionRecord {
  std::string label;
  double fraction = 1.0;
  std::size_t n_pixels = 0;
  std::size_t replicates = 1;
  double snr_raw = 0.0;
  double snr_denoised = 0.0;
  double beta_obs_raw = 0.0;
  double beta_obs_denoised = 0.0;
  double delta_beta_rel = 0.0;
  double amp_raw = 0.0;
  double amp_denoised = 0.0;
  double r_squared_raw = 0.0;
  double r_squared_denoised = 0.0;
  std::vector<double> amp_raw_replicates;
  std::vector<double> amp_denoised_replicates;
  fit::FitResult fit_raw;       // first replicate
  fit::FitResult fit_denoised;  // first replicate
  // Relative to the study directory; first replicate.
  std::string raw_path;
  std::string denoised_path;
  std::string g2_path;
  std::string plot_path;
};

struct StudyReport {
  BootstrapScenario scenario;
  std::size_t tau_star = 1;
  std::string truth_path;
  std::vector<ConditionRecord> records;
};

/// Simulates the scenario once, then per fraction: bootstrap pixels,
/// recompute and repair C2, denoise, score. Writes truth.c2f, per-condition
/// raw/denoised maps, g2 tables and SVG overlays, study.json and study.csv.
StudyReport bootstrap_study(const dae::Model& model,
                            const BootstrapScenario& scenario,
                            const std::filesystem::path& out_dir);

std::string study_csv(const StudyReport& report);

/// Denoises every raw map with every model. Needs at least two models.
metrics::EnsembleVarianceReport ensemble_study(
    const std::vector<dae::Model>& models, const std::vector<C2Matrix>& raws);

/// Raw points, denoised line, truth dashed.
std::string g2_overlay_svg(const G2Curve& raw, const G2Curve& denoised,
                           const G2Curve& truth, const std::string& title);

/// One polyline per parameter trace against age.
std::string trace_svg(const fit::SliceTrace& trace);

// --- desk-scale presets -------------------------------------------------

/// Six dynamics families x 7 replicates at T = 128 and 500 pixels, 64x64
/// crops (stride 32) with age reversal: 34 training base samples, 204 crops.
synth::DatasetConfig desk_dataset(std::uint64_t seed = 7);

/// Batch 4, learning rate 2e-3, 30 epochs.
dae::TrainConfig desk_training(std::uint64_t shuffle_seed = 0);

}  // namespace c2dn::study
