#include "c2dn/synth.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <random>

#include "c2dn/error.hpp"

namespace c2dn::synth {
namespace {

constexpr double kPsdRegularization = 1e-10;

double kww(double tau, double tau_c, double gamma) {
  if (tau == 0.0) return 1.0;
  return std::exp(-std::pow(tau / tau_c, gamma));
}

std::string fmt(const char* f, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string to_string(DynamicsKind kind) {
  switch (kind) {
    case DynamicsKind::StationaryKww: return "stationary_kww";
    case DynamicsKind::AgingKww: return "aging_kww";
    case DynamicsKind::Oscillatory: return "oscillatory";
    case DynamicsKind::TwoStep: return "two_step";
  }
  return "unknown";
}

DynamicsKind dynamics_kind_from_string(const std::string& name) {
  if (name == "stationary_kww") return DynamicsKind::StationaryKww;
  if (name == "aging_kww") return DynamicsKind::AgingKww;
  if (name == "oscillatory") return DynamicsKind::Oscillatory;
  if (name == "two_step") return DynamicsKind::TwoStep;
  throw_config("unknown dynamics kind '" + name + "'");
}

DynamicsSpec DynamicsSpec::stationary(double tau_c, double gamma) {
  DynamicsSpec s;
  s.kind = DynamicsKind::StationaryKww;
  s.tau_c = tau_c;
  s.gamma = gamma;
  return s;
}

DynamicsSpec DynamicsSpec::aging(double tau_c0, double exponent, double gamma) {
  DynamicsSpec s = stationary(tau_c0, gamma);
  s.kind = DynamicsKind::AgingKww;
  s.aging_exponent = exponent;
  return s;
}

DynamicsSpec DynamicsSpec::oscillatory(double tau_c, double gamma,
                                       double amplitude, double omega,
                                       double damping) {
  DynamicsSpec s = stationary(tau_c, gamma);
  s.kind = DynamicsKind::Oscillatory;
  s.amplitude = amplitude;
  s.omega = omega;
  s.damping = damping;
  return s;
}

DynamicsSpec DynamicsSpec::two_step(double tau_c1, double gamma1,
                                    double weight, double tau_c2,
                                    double gamma2) {
  DynamicsSpec s = stationary(tau_c1, gamma1);
  s.kind = DynamicsKind::TwoStep;
  s.weight = weight;
  s.tau_c2 = tau_c2;
  s.gamma2 = gamma2;
  return s;
}

void DynamicsSpec::validate() const {
  if (!(tau_c > 0.0)) throw_config("dynamics: tau_c must be > 0");
  if (!(gamma > 0.0 && gamma <= 2.0)) {
    throw_config("dynamics: gamma must lie in (0, 2]");
  }
  switch (kind) {
    case DynamicsKind::StationaryKww:
      break;
    case DynamicsKind::AgingKww:
      if (!std::isfinite(aging_exponent)) {
        throw_config("dynamics: aging_exponent must be finite");
      }
      break;
    case DynamicsKind::Oscillatory:
      if (!(amplitude >= 0.0 && amplitude <= 1.0)) {
        throw_config("dynamics: amplitude must lie in [0, 1]");
      }
      if (!(omega >= 0.0) || !(damping >= 0.0)) {
        throw_config("dynamics: omega and damping must be >= 0");
      }
      break;
    case DynamicsKind::TwoStep:
      if (!(weight >= 0.0 && weight <= 1.0)) {
        throw_config("dynamics: weight must lie in [0, 1]");
      }
      if (!(tau_c2 > 0.0)) throw_config("dynamics: tau_c2 must be > 0");
      if (!(gamma2 > 0.0 && gamma2 <= 2.0)) {
        throw_config("dynamics: gamma2 must lie in (0, 2]");
      }
      break;
  }
}

std::string DynamicsSpec::summary() const {
  std::string s = to_string(kind) + fmt("(tau_c=%g", tau_c) +
                  fmt(",gamma=%g", gamma);
  switch (kind) {
    case DynamicsKind::StationaryKww: break;
    case DynamicsKind::AgingKww: s += fmt(",mu=%g", aging_exponent); break;
    case DynamicsKind::Oscillatory:
      s += fmt(",a=%g", amplitude) + fmt(",omega=%g", omega) +
           fmt(",damping=%g", damping);
      break;
    case DynamicsKind::TwoStep:
      s += fmt(",w=%g", weight) + fmt(",tau_c2=%g", tau_c2) +
           fmt(",gamma2=%g", gamma2);
      break;
  }
  return s + ")";
}

void SpeckleSpec::validate() const {
  if (n_pixels < 2) throw_config("speckle: n_pixels must be >= 2");
  if (n_modes < 1) throw_config("speckle: n_modes must be >= 1");
  if (mean_counts && !(*mean_counts > 0.0)) {
    throw_config("speckle: mean_counts must be > 0");
  }
}

std::string SpeckleSpec::summary() const {
  std::string s = "P=" + std::to_string(n_pixels) +
                  ",M=" + std::to_string(n_modes);
  s += mean_counts ? fmt(",mu=%g", *mean_counts) : std::string(",mu=none");
  return s;
}

double g1_value(const DynamicsSpec& spec, double t1, double t2) {
  if (!(t1 >= 0.0 && t2 >= 0.0)) throw_config("g1_value: times must be >= 0");
  const double tau = std::abs(t2 - t1);
  switch (spec.kind) {
    case DynamicsKind::StationaryKww:
      return kww(tau, spec.tau_c, spec.gamma);
    case DynamicsKind::AgingKww: {
      const double age = 0.5 * (t1 + t2);
      const double tc = spec.tau_c * std::pow(1.0 + age, spec.aging_exponent);
      return kww(tau, tc, spec.gamma);
    }
    case DynamicsKind::Oscillatory:
      return (1.0 - spec.amplitude) * kww(tau, spec.tau_c, spec.gamma) +
             spec.amplitude * std::exp(-spec.damping * tau) *
                 std::cos(spec.omega * tau);
    case DynamicsKind::TwoStep:
      return spec.weight * kww(tau, spec.tau_c, spec.gamma) +
             (1.0 - spec.weight) * kww(tau, spec.tau_c2, spec.gamma2);
  }
  return 0.0;
}

C2Matrix generate_truth_c2(const DynamicsSpec& spec, std::size_t n_frames,
                           double frame_interval_s, double beta0) {
  spec.validate();
  if (n_frames < 2) throw_config("generate_truth_c2: need at least 2 frames");
  C2Matrix out(n_frames, 0.0, frame_interval_s);
  for (std::size_t i = 0; i < n_frames; ++i) {
    for (std::size_t j = i; j < n_frames; ++j) {
      const double g =
          g1_value(spec, static_cast<double>(i), static_cast<double>(j));
      out(i, j) = 1.0 + beta0 * g * g;
      out(j, i) = out(i, j);
    }
  }
  return out;
}

Simulation simulate_noisy_c2(const DynamicsSpec& spec,
                             const SpeckleSpec& speckle, std::size_t n_frames,
                             std::uint64_t seed, double frame_interval_s) {
  spec.validate();
  speckle.validate();
  if (n_frames < 2) throw_config("simulate_noisy_c2: need at least 2 frames");
  const auto t = static_cast<Eigen::Index>(n_frames);

  Eigen::MatrixXd cov(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < t; ++j) {
      cov(i, j) = g1_value(spec, static_cast<double>(i), static_cast<double>(j));
    }
  }
  cov.diagonal().array() += kPsdRegularization;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw_numeric("simulate_noisy_c2: g1 covariance is not positive "
                  "definite for " + spec.summary());
  }

  const std::size_t p = speckle.n_pixels;
  const std::size_t m = speckle.n_modes;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Column 2*(pixel*M + mode) holds the real part, the next column the
  // imaginary part, each scaled so E|field|^2 = g1(t, t) = 1.
  Eigen::MatrixXd z(t, static_cast<Eigen::Index>(2 * m * p));
  const double scale = std::sqrt(0.5);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index r = 0; r < t; ++r) z(r, c) = scale * normal(rng);
  }
  const Eigen::MatrixXd field = llt.matrixL() * z;

  PixelSeries series(p, n_frames, frame_interval_s);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t px = 0; px < p; ++px) {
    for (std::size_t mode = 0; mode < m; ++mode) {
      const auto col = static_cast<Eigen::Index>(2 * (px * m + mode));
      for (Eigen::Index r = 0; r < t; ++r) {
        const double re = field(r, col);
        const double im = field(r, col + 1);
        series.at(px, static_cast<std::size_t>(r)) += inv_m * (re * re + im * im);
      }
    }
  }

  if (speckle.mean_counts) {
    const double mu = *speckle.mean_counts;
    for (double& v : series.intensities) {
      const double mean = mu * v;
      if (mean > 0.0) {
        std::poisson_distribution<long> poisson(mean);
        v = static_cast<double>(poisson(rng));
      } else {
        v = 0.0;
      }
    }
  }

  Simulation sim{std::move(series), {}};
  sim.c2 = corr::compute_c2(sim.series);
  return sim;
}

SyntheticSample make_sample(const DynamicsSpec& spec,
                            const SpeckleSpec& speckle, std::size_t n_frames,
                            std::uint64_t seed, double frame_interval_s) {
  auto sim = simulate_noisy_c2(spec, speckle, n_frames, seed, frame_interval_s);
  SyntheticSample s;
  s.c2_truth =
      generate_truth_c2(spec, n_frames, frame_interval_s, speckle.beta0());
  s.c2_raw = std::move(sim.c2);
  s.series = std::move(sim.series);
  s.dynamics = spec;
  s.speckle = speckle;
  return s;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  // splitmix64 finalizer over (base, index)
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace c2dn::synth
