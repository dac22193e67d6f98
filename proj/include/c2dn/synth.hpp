#pragma once

// Synthetic ground truth and noisy realizations of two-time correlation
// maps, plus the on-disk training dataset built from them.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "c2dn/c2.hpp"

namespace c2dn::synth {

enum class DynamicsKind { StationaryKww, AgingKww, Oscillatory, TwoStep };

std::string to_string(DynamicsKind kind);
DynamicsKind dynamics_kind_from_string(const std::string& name);

/// Parametric g1. Times and relaxation constants are in frames.
///
///   stationary_kww  exp(-(tau/tau_c)^gamma)
///   aging_kww       as above with tau_c(t_age) = tau_c * (1 + t_age)^aging_exponent
///   oscillatory     (1-a) exp(-(tau/tau_c)^gamma) + a exp(-damping tau) cos(omega tau)
///   two_step        w exp(-(tau/tau_c)^gamma) + (1-w) exp(-(tau/tau_c2)^gamma2)
struct DynamicsSpec {
  DynamicsKind kind = DynamicsKind::StationaryKww;
  double tau_c = 10.0;
  double gamma = 1.0;
  double aging_exponent = 0.0;
  double amplitude = 0.0;
  double omega = 0.0;
  double damping = 0.0;
  double weight = 1.0;
  double tau_c2 = 1.0;
  double gamma2 = 1.0;

  static DynamicsSpec stationary(double tau_c, double gamma);
  static DynamicsSpec aging(double tau_c0, double exponent, double gamma);
  static DynamicsSpec oscillatory(double tau_c, double gamma, double amplitude,
                                  double omega, double damping);
  static DynamicsSpec two_step(double tau_c1, double gamma1, double weight,
                               double tau_c2, double gamma2);

  void validate() const;
  std::string summary() const;
};

struct SpeckleSpec {
  std::size_t n_pixels = 1000;
  std::size_t n_modes = 1;
  /// Mean photon counts per pixel per frame; empty disables Poisson sampling.
  std::optional<double> mean_counts = 5.0;

  double beta0() const noexcept { return 1.0 / static_cast<double>(n_modes); }
  void validate() const;
  std::string summary() const;
};

double g1_value(const DynamicsSpec& spec, double t1, double t2);

/// C2 = 1 + beta0 * g1^2.
C2Matrix generate_truth_c2(const DynamicsSpec& spec, std::size_t n_frames,
                           double frame_interval_s = 1.0, double beta0 = 1.0);

struct Simulation {
  PixelSeries series;
  C2Matrix c2;
};

/// Multi-mode complex Gaussian speckle with covariance g1(t1, t2), optional
/// Poisson photon sampling, then compute_c2. Deterministic per seed.
Simulation simulate_noisy_c2(const DynamicsSpec& spec,
                             const SpeckleSpec& speckle, std::size_t n_frames,
                             std::uint64_t seed,
                             double frame_interval_s = 1.0);

struct SyntheticSample {
  C2Matrix c2_truth;
  C2Matrix c2_raw;
  PixelSeries series;
  DynamicsSpec dynamics;
  SpeckleSpec speckle;
};

SyntheticSample make_sample(const DynamicsSpec& spec,
                            const SpeckleSpec& speckle, std::size_t n_frames,
                            std::uint64_t seed, double frame_interval_s = 1.0);

/// Seed of the i-th independent stream derived from `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

// --- dataset -------------------------------------------------------------

struct DatasetConfig {
  std::vector<DynamicsSpec> dynamics;
  std::vector<SpeckleSpec> speckle;
  std::vector<std::size_t> n_frames{128};
  std::size_t replicates = 1;
  double frame_interval_s = 1.0;
  std::array<double, 3> split{0.8, 0.1, 0.1};  // train, validation, test
  std::size_t crop_size = 64;                  // 0 disables cropping
  std::size_t crop_stride = 32;
  bool reverse_age = true;
  std::vector<std::size_t> subsample_intervals;
  bool repair_diagonal = true;
  bool write_pixel_series = true;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t base_count() const;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// floor() for validation and test; the remainder goes to train.
SplitCounts split_counts(std::size_t n, const std::array<double, 3>& split);

struct ManifestRecord {
  std::string sample_id;
  std::string split;
  std::string raw_path;    // relative to the manifest directory
  std::string truth_path;
  std::size_t n_frames = 0;
  std::string spec_summary;
  std::uint64_t seed = 0;
};

struct DatasetSummary {
  std::filesystem::path manifest_path;
  std::filesystem::path base_manifest_path;
  std::size_t base_samples = 0;
  std::size_t augmented_matrices = 0;  // before cropping
  std::vector<ManifestRecord> records;
  SplitCounts base_split;
  std::size_t count(const std::string& split) const;
};

/// Writes raw/, truth/, base/, series/, manifest.tsv and base_manifest.tsv
/// under `out_dir`.
DatasetSummary build_dataset(const DatasetConfig& config,
                             const std::filesystem::path& out_dir);

std::string format_manifest(const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> parse_manifest(const std::string& text);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

struct RawTruthPair {
  std::string sample_id;
  C2Matrix raw;
  C2Matrix truth;
};

/// Loads every record of `split` ("" for all) from a manifest.
std::vector<RawTruthPair> load_pairs(const std::filesystem::path& manifest,
                                     const std::string& split);

}  // namespace c2dn::synth
