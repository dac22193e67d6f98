#include "c2dn/fitdyn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "c2dn/error.hpp"

namespace c2dn::fit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRelCostTol = 1e-10;
constexpr double kStepTol = 1e-12;
constexpr double kDampingCap = 1e16;

struct Problem {
  ModelKind kind;
  std::vector<double> x;  // lags
  std::vector<double> y;
};

Eigen::VectorXd residuals(const Problem& pr, std::span<const double> p) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(pr.x.size()));
  for (std::size_t i = 0; i < pr.x.size(); ++i) {
    r[static_cast<Eigen::Index>(i)] = evaluate(pr.kind, p, pr.x[i]) - pr.y[i];
  }
  return r;
}

void project(std::vector<double>& p, const Bounds& b) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::clamp(p[i], b.lower[i], b.upper[i]);
  }
}

// Forward differences, stepping backwards when the forward point would
// leave the box.
Eigen::MatrixXd jacobian(const Problem& pr, const std::vector<double>& p,
                         const Eigen::VectorXd& r0, const Bounds& b) {
  const auto m = static_cast<Eigen::Index>(pr.x.size());
  Eigen::MatrixXd jac(m, static_cast<Eigen::Index>(p.size()));
  std::vector<double> q = p;
  for (std::size_t j = 0; j < p.size(); ++j) {
    double h = 1e-7 * (1.0 + std::abs(p[j]));
    if (p[j] + h > b.upper[j]) h = -h;
    q[j] = p[j] + h;
    const double hs = q[j] - p[j];
    jac.col(static_cast<Eigen::Index>(j)) = (residuals(pr, q) - r0) / hs;
    q[j] = p[j];
  }
  return jac;
}

double wrap_phase(double phase) {
  const double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(phase + std::numbers::pi, two_pi);
  if (w < 0) w += two_pi;
  return w - std::numbers::pi;
}

Problem make_problem(ModelKind kind, const G2Curve& curve) {
  Problem pr{kind, {}, {}};
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve.lags[i] == 0) continue;
    pr.x.push_back(static_cast<double>(curve.lags[i]));
    pr.y.push_back(curve.values[i]);
  }
  return pr;
}

FitResult levenberg_marquardt(const Problem& pr, std::vector<double> p,
                              const Bounds& bounds,
                              std::size_t max_iterations) {
  const std::size_t np = p.size();
  project(p, bounds);
  FitResult res;
  res.kind = pr.kind;

  Eigen::VectorXd r = residuals(pr, p);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  bool done = false;
  std::size_t it = 0;

  if (!std::isfinite(cost)) {
    res.diagnostics = "non-finite cost at initial guess";
  }
  while (!done && std::isfinite(cost) && it < max_iterations) {
    ++it;
    if (cost <= 1e-30) {
      res.converged = true;
      res.diagnostics = "exact fit";
      break;
    }
    const Eigen::MatrixXd jac = jacobian(pr, p, r, bounds);
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    Eigen::VectorXd scale = a.diagonal();
    const double floor = std::max(1e-12 * scale.maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < scale.size(); ++i) {
      scale[i] = std::max(scale[i], floor);
    }

    // Parameters pinned at a bound with the gradient pointing outwards are
    // held fixed for this step; clipping them instead makes LM crawl.
    std::vector<Eigen::Index> free_idx;
    for (std::size_t i = 0; i < np; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const bool at_lo = p[i] <= bounds.lower[i] && g[k] > 0.0;
      const bool at_hi = p[i] >= bounds.upper[i] && g[k] < 0.0;
      if (!at_lo && !at_hi) free_idx.push_back(k);
    }
    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    Eigen::MatrixXd af(nf, nf);
    Eigen::VectorXd gf(nf), sf(nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
      gf[i] = g[free_idx[i]];
      sf[i] = scale[free_idx[i]];
      for (Eigen::Index j = 0; j < nf; ++j) {
        af(i, j) = a(free_idx[i], free_idx[j]);
      }
    }
    if (nf == 0) {
      res.converged = true;
      res.diagnostics = "all parameters held at bounds";
      break;
    }

    while (true) {
      Eigen::MatrixXd damped = af;
      damped.diagonal() += lambda * sf;
      const Eigen::VectorXd df = damped.ldlt().solve(-gf);
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(np));
      for (Eigen::Index i = 0; i < nf; ++i) delta[free_idx[i]] = df[i];
      if (!delta.allFinite()) {
        lambda *= 10.0;
      } else {
        std::vector<double> trial = p;
        for (std::size_t i = 0; i < np; ++i) {
          trial[i] += delta[static_cast<Eigen::Index>(i)];
        }
        project(trial, bounds);
        double step2 = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
          step2 += (trial[i] - p[i]) * (trial[i] - p[i]);
        }
        const Eigen::VectorXd r_trial = residuals(pr, trial);
        const double cost_trial = r_trial.squaredNorm();
        if (std::isfinite(cost_trial) && cost_trial < cost) {
          const double rel = (cost - cost_trial) / cost;
          p = std::move(trial);
          r = r_trial;
          cost = cost_trial;
          lambda = std::max(lambda / 10.0, 1e-15);
          if (rel < kRelCostTol) {
            res.converged = true;
            res.diagnostics = "relative cost decrease below tolerance";
            done = true;
          } else if (std::sqrt(step2) < kStepTol) {
            res.converged = true;
            res.diagnostics = "step norm below tolerance";
            done = true;
          }
          break;
        }
        if (std::sqrt(step2) < kStepTol) {
          // The box or the floating-point floor blocks any further progress.
          res.converged = true;
          res.diagnostics = "step norm below tolerance";
          done = true;
          break;
        }
        lambda *= 10.0;
      }
      if (lambda > kDampingCap) {
        const double gnorm = gf.lpNorm<Eigen::Infinity>();
        res.converged = gnorm <= 1e-6 * (1.0 + cost);
        res.diagnostics = res.converged
                              ? "damping cap reached at a stationary point"
                              : "damping cap reached; normal equations "
                                "singular or step rejected";
        done = true;
        break;
      }
    }
  }
  if (!done && it >= max_iterations && !res.converged) {
    res.diagnostics = "iteration cap reached";
  }

  res.n_iterations = it;
  res.cost = cost;
  res.params = p;

  // Covariance: s^2 (J^T J)^+ at the optimum.
  const std::size_t m = pr.x.size();
  const Eigen::MatrixXd jac = jacobian(pr, p, r, bounds);
  const Eigen::MatrixXd a = jac.transpose() * jac;
  const double s2 = m > np ? cost / static_cast<double>(m - np) : 0.0;
  Eigen::MatrixXd cov = s2 * a.completeOrthogonalDecomposition().pseudoInverse();
  cov = 0.5 * (cov + cov.transpose()).eval();
  res.covariance.assign(cov.data(), cov.data() + cov.size());
  res.sigma1.resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    const double v = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    res.sigma1[i] = std::sqrt(std::max(v, 0.0));
  }
  if (!cov.allFinite()) res.converged = false;

  double mean = 0.0;
  for (double v : pr.y) mean += v;
  mean /= static_cast<double>(m);
  double ss_tot = 0.0;
  for (double v : pr.y) ss_tot += (v - mean) * (v - mean);
  if (cost <= 1e-20) {
    res.r_squared = 1.0;
  } else if (ss_tot > 0.0) {
    res.r_squared = 1.0 - cost / ss_tot;
  } else {
    res.r_squared = 0.0;
  }
  for (double v : res.params) {
    if (!std::isfinite(v)) res.converged = false;
  }
  return res;
}

std::vector<double> kww_guess(const Problem& pr) {
  const std::size_t n = pr.y.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  double c_inf = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) c_inf += pr.y[i];
  c_inf /= static_cast<double>(tail);
  const double beta = std::max(0.0, pr.y.front() - c_inf);
  double tau_c = 0.25 * (pr.x.back() + 1.0);
  if (beta > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (pr.y[i] - c_inf <= beta / std::numbers::e) {
        tau_c = pr.x[i];
        break;
      }
    }
  }
  return {c_inf, beta, std::max(tau_c, 1e-3), 1.0};
}

// Scans damped cosines against the KWW residual; returns the best few
// (amp, damp, omega, phase) seeds ordered by residual.
std::vector<std::array<double, 4>> oscillation_seeds(
    const Problem& pr, std::span<const double> kww, std::size_t keep) {
  const std::size_t n = pr.x.size();
  std::vector<double> resid(n);
  for (std::size_t i = 0; i < n; ++i) {
    resid[i] = pr.y[i] - evaluate(ModelKind::Kww, kww, pr.x[i]);
  }
  const double span_lags = std::max(pr.x.back(), 2.0);
  const double w_lo = std::numbers::pi / span_lags;
  const double w_hi = 2.0 * std::numbers::pi / 3.0;
  const std::array<double, 4> damps{0.0, 0.5 / span_lags, 2.0 / span_lags,
                                    8.0 / span_lags};
  struct Cand {
    double sse;
    std::array<double, 4> p;
  };
  std::vector<Cand> cands;
  constexpr int kOmegaSteps = 80;
  for (int k = 0; k < kOmegaSteps; ++k) {
    const double omega =
        w_lo * std::pow(w_hi / w_lo, static_cast<double>(k) / (kOmegaSteps - 1));
    for (double d : damps) {
      double cc = 0, ss = 0, cs = 0, cr = 0, sr = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(-d * pr.x[i]);
        const double c = e * std::cos(omega * pr.x[i]);
        const double s = e * std::sin(omega * pr.x[i]);
        cc += c * c;
        ss += s * s;
        cs += c * s;
        cr += c * resid[i];
        sr += s * resid[i];
      }
      const double det = cc * ss - cs * cs;
      if (std::abs(det) < 1e-14 * (cc * ss + 1e-300)) continue;
      const double ca = (cr * ss - sr * cs) / det;
      const double sb = (sr * cc - cr * cs) / det;
      double sse = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(-d * pr.x[i]);
        const double f = ca * e * std::cos(omega * pr.x[i]) +
                         sb * e * std::sin(omega * pr.x[i]);
        sse += (resid[i] - f) * (resid[i] - f);
      }
      // amp cos(wt + phi) = amp cos(phi) cos(wt) - amp sin(phi) sin(wt)
      const double amp = std::hypot(ca, sb);
      const double phase = std::atan2(-sb, ca);
      cands.push_back({sse, {amp, d, omega, phase}});
    }
  }
  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.sse < b.sse; });
  std::vector<std::array<double, 4>> out;
  for (const auto& c : cands) {
    if (out.size() >= keep) break;
    out.push_back(c.p);
  }
  if (out.empty()) out.push_back({0.0, 0.0, w_lo, 0.0});
  return out;
}

}  // namespace

std::string to_string(ModelKind kind) {
  return kind == ModelKind::Kww ? "kww" : "composite";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "kww") return ModelKind::Kww;
  if (name == "composite") return ModelKind::Composite;
  throw_config("unknown model kind '" + name + "' (expected kww|composite)");
}

std::size_t parameter_count(ModelKind kind) {
  return kind == ModelKind::Kww ? 4 : 8;
}

std::vector<std::string> parameter_names(ModelKind kind) {
  std::vector<std::string> names{"c_inf", "beta", "tau_c", "gamma"};
  if (kind == ModelKind::Composite) {
    names.insert(names.end(), {"amp", "damp", "omega", "phase"});
  }
  return names;
}

double kww_model(double tau, const KwwParams& p) {
  if (!(tau >= 0.0)) throw_config("kww_model: tau must be >= 0");
  if (!(p.tau_c > 0.0)) throw_config("kww_model: tau_c must be > 0");
  if (tau == 0.0) return p.c_inf + p.beta;
  return p.c_inf + p.beta * std::exp(-2.0 * std::pow(tau / p.tau_c, p.gamma));
}

double composite_model(double tau, const CompositeParams& p) {
  return kww_model(tau, p.kww) +
         p.amp * std::exp(-p.damp * tau) * std::cos(p.omega * tau + p.phase);
}

double evaluate(ModelKind kind, std::span<const double> p, double tau) {
  const KwwParams k{p[0], p[1], p[2], p[3]};
  if (kind == ModelKind::Kww) return kww_model(tau, k);
  return composite_model(tau, {k, p[4], p[5], p[6], p[7]});
}

Bounds Bounds::defaults(ModelKind kind) {
  Bounds b;
  b.lower = {-kInf, 0.0, 1e-6, 0.05};
  b.upper = {kInf, kInf, 1e6, 2.0};
  if (kind == ModelKind::Composite) {
    b.lower.insert(b.lower.end(), {0.0, 0.0, 0.0, -kInf});
    b.upper.insert(b.upper.end(), {kInf, kInf, std::numbers::pi, kInf});
  }
  return b;
}

KwwParams FitResult::kww() const {
  return {params.at(0), params.at(1), params.at(2), params.at(3)};
}

CompositeParams FitResult::composite() const {
  if (params.size() < 8) throw_config("FitResult: not a composite fit");
  return {kww(), params[4], params[5], params[6], params[7]};
}

std::vector<double> default_initial_guess(ModelKind kind,
                                          const G2Curve& curve) {
  const Problem pr = make_problem(kind, curve);
  if (pr.x.empty()) throw_config("default_initial_guess: empty curve");
  auto p = kww_guess(pr);
  if (kind == ModelKind::Composite) {
    const auto seed = oscillation_seeds(pr, p, 1).front();
    p.insert(p.end(), seed.begin(), seed.end());
  }
  return p;
}

FitResult fit_g2(const G2Curve& curve, const FitOptions& options) {
  const Problem pr = make_problem(options.kind, curve);
  const std::size_t np = parameter_count(options.kind);
  if (pr.x.size() < np + 1) {
    throw_config("fit_g2: " + std::to_string(pr.x.size()) +
                 " points (excluding tau=0) for " + std::to_string(np) +
                 " parameters");
  }
  Bounds bounds = Bounds::defaults(options.kind);
  if (options.bounds) {
    bounds = *options.bounds;
  } else if (options.kind == ModelKind::Composite) {
    // A cosine slower than half a period over the window is indistinguishable
    // from an offset; keep omega where the data can pin it down.
    bounds.lower[6] = std::numbers::pi / std::max(pr.x.back(), 2.0);
  }
  if (bounds.lower.size() != np || bounds.upper.size() != np) {
    throw_config("fit_g2: bounds have the wrong length");
  }
  if (options.init) {
    if (options.init->size() != np) {
      throw_config("fit_g2: initial guess has the wrong length");
    }
    return levenberg_marquardt(pr, *options.init, bounds,
                               options.max_iterations);
  }

  Problem kww_pr = pr;
  kww_pr.kind = ModelKind::Kww;
  const Bounds kb = options.kind == ModelKind::Kww
                        ? bounds
                        : Bounds{{bounds.lower.begin(), bounds.lower.begin() + 4},
                                 {bounds.upper.begin(), bounds.upper.begin() + 4}};
  FitResult kww_fit =
      levenberg_marquardt(kww_pr, kww_guess(kww_pr), kb, options.max_iterations);
  if (options.kind == ModelKind::Kww) return kww_fit;

  // Composite: start from the KWW optimum plus the best damped-cosine seeds.
  FitResult best;
  bool have = false;
  for (const auto& seed : oscillation_seeds(pr, kww_fit.params, 3)) {
    std::vector<double> init = kww_fit.params;
    init.insert(init.end(), seed.begin(), seed.end());
    FitResult r = levenberg_marquardt(pr, init, bounds, options.max_iterations);
    const bool better = !have || (r.converged && !best.converged) ||
                        (r.converged == best.converged && r.cost < best.cost);
    if (better) {
      best = std::move(r);
      have = true;
    }
  }
  best.params[7] = wrap_phase(best.params[7]);
  return best;
}

std::pair<std::size_t, std::size_t> age_band(std::size_t n_frames,
                                             double edge_exclusion) {
  if (!(edge_exclusion >= 0.0 && edge_exclusion < 0.5)) {
    throw_config("fit_slices: edge exclusion must lie in [0, 0.5)");
  }
  const auto cut = static_cast<std::size_t>(
      std::floor(edge_exclusion * static_cast<double>(n_frames)));
  if (2 * cut >= n_frames) throw_config("fit_slices: age band is empty");
  return {cut, n_frames - 1 - cut};
}

SliceTrace fit_slices(const C2Matrix& c2, const SliceOptions& options) {
  if (c2.size() < 16) throw_config("fit_slices: need at least 16 frames");
  const auto [first, last] = age_band(c2.size(), options.edge_exclusion);
  const std::size_t np = parameter_count(options.kind);
  SliceTrace trace;
  trace.kind = options.kind;
  for (std::size_t a = first; a <= last; ++a) {
    const std::size_t tau_max = 2 * std::min(a, c2.size() - 1 - a);
    if (tau_max < np + 1) continue;
    const G2Curve slice =
        corr::slice_age(c2, a, options.half_window).without_zero_lag();
    FitOptions fo;
    fo.kind = options.kind;
    trace.ages.push_back(a);
    trace.fits.push_back(fit_g2(slice, fo));
  }
  if (trace.ages.empty()) throw_config("fit_slices: no slice has enough lags");
  return trace;
}

std::string trace_csv(const SliceTrace& trace) {
  const auto names = parameter_names(trace.kind);
  std::string out = "age_index";
  for (const auto& n : names) out += "," + n;
  for (const auto& n : names) out += ",sigma_" + n;
  out += ",r_squared,converged\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.ages.size(); ++i) {
    const auto& f = trace.fits[i];
    out += std::to_string(trace.ages[i]);
    for (double v : f.params) {
      std::snprintf(buf, sizeof buf, ",%.10g", v);
      out += buf;
    }
    for (double v : f.sigma1) {
      std::snprintf(buf, sizeof buf, ",%.10g", v);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.10g,%d\n", f.r_squared,
                  f.converged ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace c2dn::fit
