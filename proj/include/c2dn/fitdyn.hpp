#pragma once

// Least-squares fits of g2 curves to stretched-exponential (KWW) and
// KWW-plus-damped-cosine models.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2dn/c2.hpp"

namespace c2dn::fit {

enum class ModelKind { Kww, Composite };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
std::size_t parameter_count(ModelKind kind);
/// c_inf, beta, tau_c, gamma[, amp, damp, omega, phase]
std::vector<std::string> parameter_names(ModelKind kind);

struct KwwParams {
  double c_inf = 1.0;
  double beta = 0.0;
  double tau_c = 1.0;  // frames
  double gamma = 1.0;
};

struct CompositeParams {
  KwwParams kww;
  double amp = 0.0;
  double damp = 0.0;   // 1/frames
  double omega = 0.0;  // rad/frame
  double phase = 0.0;  // rad
};

/// c_inf + beta * exp(-2 (tau/tau_c)^gamma)
double kww_model(double tau, const KwwParams& p);
/// kww_model + amp * exp(-damp tau) * cos(omega tau + phase)
double composite_model(double tau, const CompositeParams& p);
double evaluate(ModelKind kind, std::span<const double> params, double tau);

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
  static Bounds defaults(ModelKind kind);
};

struct FitOptions {
  ModelKind kind = ModelKind::Kww;
  std::optional<std::vector<double>> init;
  std::optional<Bounds> bounds;
  std::size_t max_iterations = 200;
};

struct FitResult {
  ModelKind kind = ModelKind::Kww;
  std::vector<double> params;
  std::vector<double> covariance;  // row-major, n_params x n_params
  std::vector<double> sigma1;
  double r_squared = 0.0;
  double cost = 0.0;  // sum of squared residuals
  bool converged = false;
  std::size_t n_iterations = 0;
  std::string diagnostics;

  KwwParams kww() const;
  CompositeParams composite() const;
};

/// Initial guess from the curve shape (tau = 0 must already be removed).
std::vector<double> default_initial_guess(ModelKind kind, const G2Curve& curve);

/// Levenberg-Marquardt fit of `curve`, ignoring its tau = 0 point.
FitResult fit_g2(const G2Curve& curve, const FitOptions& options = {});

struct SliceOptions {
  ModelKind kind = ModelKind::Kww;
  std::size_t half_window = 0;
  double edge_exclusion = 0.1;  // fraction of ages dropped at each end
};

struct SliceTrace {
  ModelKind kind = ModelKind::Kww;
  std::vector<std::size_t> ages;
  std::vector<FitResult> fits;
};

/// Ages [first, last] left after edge exclusion.
std::pair<std::size_t, std::size_t> age_band(std::size_t n_frames,
                                             double edge_exclusion);

SliceTrace fit_slices(const C2Matrix& c2, const SliceOptions& options = {});

/// age_index, params..., sigma_params..., r_squared, converged
std::string trace_csv(const SliceTrace& trace);

}  // namespace c2dn::fit
