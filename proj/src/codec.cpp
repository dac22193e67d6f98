#include "c2dn/codec.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "c2dn/error.hpp"

namespace c2dn::codec {
namespace {

std::string child(const std::string& path, const std::string& key) {
  std::string escaped;
  for (char c : key) {
    if (c == '~') {
      escaped += "~0";
    } else if (c == '/') {
      escaped += "~1";
    } else {
      escaped += c;
    }
  }
  return path + "/" + escaped;
}

std::string child(const std::string& path, std::size_t index) {
  return path + "/" + std::to_string(index);
}

double as_number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

std::uint64_t as_unsigned(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) fail(path, "expected a non-negative integer");
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0.0 && v == std::floor(v) && v < 1.8e19) {
      return static_cast<std::uint64_t>(v);
    }
  }
  fail(path, "expected a non-negative integer");
}

bool as_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

const Json& as_array(const Json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a list");
  return j;
}

// Tracks which keys of an object were consumed so leftovers can be rejected.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected a mapping");
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const std::string& key) const { return child(path_, key); }

  void number(const std::string& key, double& out) {
    if (const Json* v = find(key)) out = as_number(*v, at(key));
  }
  void size(const std::string& key, std::size_t& out) {
    if (const Json* v = find(key)) out = as_unsigned(*v, at(key));
  }
  void u64(const std::string& key, std::uint64_t& out) {
    if (const Json* v = find(key)) out = as_unsigned(*v, at(key));
  }
  void boolean(const std::string& key, bool& out) {
    if (const Json* v = find(key)) out = as_bool(*v, at(key));
  }
  void sizes(const std::string& key, std::vector<std::size_t>& out) {
    if (const Json* v = find(key)) {
      const std::string p = at(key);
      out.clear();
      const Json& arr = as_array(*v, p);
      for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(as_unsigned(arr[i], child(p, i)));
      }
    }
  }
  void numbers(const std::string& key, std::vector<double>& out) {
    if (const Json* v = find(key)) {
      const std::string p = at(key);
      out.clear();
      const Json& arr = as_array(*v, p);
      for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(as_number(arr[i], child(p, i)));
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key '" + it.key() + "'");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Runs a validate() and re-raises its Config error with the path attached.
template <typename F>
void validated(const std::string& path, F&& f) {
  try {
    f();
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Config) throw;
    fail(path, e.what());
  }
}

Json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

}  // namespace

void fail(const std::string& path, const std::string& message) {
  throw_config("at " + (path.empty() ? std::string("/") : path) + ": " + message);
}

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw_config(std::string("invalid JSON: ") + e.what());
  }
}

// --- encoders --------------------------------------------------------------

Json to_json(const synth::DynamicsSpec& d) {
  Json j;
  j["kind"] = synth::to_string(d.kind);
  j["tau_c"] = d.tau_c;
  j["gamma"] = d.gamma;
  switch (d.kind) {
    case synth::DynamicsKind::StationaryKww:
      break;
    case synth::DynamicsKind::AgingKww:
      j["aging_exponent"] = d.aging_exponent;
      break;
    case synth::DynamicsKind::Oscillatory:
      j["amplitude"] = d.amplitude;
      j["omega"] = d.omega;
      j["damping"] = d.damping;
      break;
    case synth::DynamicsKind::TwoStep:
      j["weight"] = d.weight;
      j["tau_c2"] = d.tau_c2;
      j["gamma2"] = d.gamma2;
      break;
  }
  return j;
}

Json to_json(const synth::SpeckleSpec& s) {
  Json j;
  j["n_pixels"] = s.n_pixels;
  j["n_modes"] = s.n_modes;
  j["mean_counts"] = s.mean_counts ? Json(*s.mean_counts) : Json(nullptr);
  return j;
}

Json to_json(const synth::DatasetConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["dynamics"] = Json::array();
  for (const auto& d : c.dynamics) j["dynamics"].push_back(to_json(d));
  j["speckle"] = Json::array();
  for (const auto& s : c.speckle) j["speckle"].push_back(to_json(s));
  j["n_frames"] = c.n_frames;
  j["replicates"] = c.replicates;
  j["frame_interval_s"] = c.frame_interval_s;
  j["split"] = {c.split[0], c.split[1], c.split[2]};
  j["crop_size"] = c.crop_size;
  j["crop_stride"] = c.crop_stride;
  j["reverse_age"] = c.reverse_age;
  j["subsample_intervals"] = c.subsample_intervals;
  j["repair_diagonal"] = c.repair_diagonal;
  j["write_pixel_series"] = c.write_pixel_series;
  return j;
}

Json to_json(const synth::DatasetSummary& s) {
  Json j;
  j["manifest"] = s.manifest_path.string();
  j["base_manifest"] = s.base_manifest_path.string();
  j["base_samples"] = s.base_samples;
  j["base_split"] = {{"train", s.base_split.train},
                     {"validation", s.base_split.validation},
                     {"test", s.base_split.test}};
  j["augmented_matrices"] = s.augmented_matrices;
  j["records"] = {{"train", s.count("train")},
                  {"validation", s.count("validation")},
                  {"test", s.count("test")}};
  return j;
}

Json to_json(const dae::Architecture& a) {
  Json j;
  j["encoder_channels"] = a.encoder_channels;
  j["kernel_size"] = a.kernel_size;
  return j;
}

Json to_json(const dae::TrainConfig& t) {
  Json j;
  j["learning_rate"] = t.learning_rate;
  j["beta1"] = t.beta1;
  j["beta2"] = t.beta2;
  j["adam_eps"] = t.adam_eps;
  j["batch_size"] = t.batch_size;
  j["max_epochs"] = t.max_epochs;
  j["early_stop_loss_threshold"] = t.early_stop_loss_threshold;
  j["shuffle_seed"] = t.shuffle_seed;
  return j;
}

Json to_json(const metrics::EvalOptions& o) {
  Json j;
  j["max_lag"] = o.acf_max_lag;
  j["z"] = o.z;
  j["ssim_threshold"] = o.ssim_threshold;
  j["tau_star"] = o.tau_star;
  return j;
}

Json to_json(const metrics::ReliabilityReport& r) {
  Json j;
  j["beta_obs_raw"] = number_or_null(r.beta_obs_raw);
  j["beta_obs_denoised"] = number_or_null(r.beta_obs_denoised);
  j["delta_beta_rel"] = number_or_null(r.delta_beta_rel);
  j["bias_flag"] = r.bias_flag;
  j["acf_pass"] = r.acf_pass;
  j["acf_max_abs_beyond_lag0"] = number_or_null(r.acf_max_abs_beyond_lag0);
  j["acf_bound"] = number_or_null(r.acf_bound);
  j["ssim"] = number_or_null(r.ssim);
  j["ssim_reliable"] = r.ssim_reliable;
  j["snr_raw"] = number_or_null(r.snr_raw);
  j["snr_denoised"] = number_or_null(r.snr_denoised);
  j["tau_star"] = r.tau_star;
  return j;
}

Json to_json(const metrics::EnsembleVarianceReport& r) {
  Json j;
  j["per_sample_variance"] = numbers(r.per_sample_variance);
  j["mean_variance"] = number_or_null(r.mean_variance);
  j["beta_obs"] = numbers(r.beta_obs);
  j["ratio_per_sample"] = numbers(r.ratio_per_sample);
  j["median_ratio"] = number_or_null(r.median_ratio);
  j["p10_ratio"] = number_or_null(r.p10_ratio);
  j["p90_ratio"] = number_or_null(r.p90_ratio);
  return j;
}

Json to_json(const fit::FitResult& r) {
  Json j;
  j["model"] = fit::to_string(r.kind);
  const auto names = fit::parameter_names(r.kind);
  Json params = Json::object();
  Json sigma = Json::object();
  for (std::size_t i = 0; i < names.size() && i < r.params.size(); ++i) {
    params[names[i]] = number_or_null(r.params[i]);
    if (i < r.sigma1.size()) sigma[names[i]] = number_or_null(r.sigma1[i]);
  }
  j["params"] = params;
  j["sigma1"] = sigma;
  j["covariance"] = numbers(r.covariance);
  j["r_squared"] = number_or_null(r.r_squared);
  j["cost"] = number_or_null(r.cost);
  j["converged"] = r.converged;
  j["n_iterations"] = r.n_iterations;
  j["diagnostics"] = r.diagnostics;
  return j;
}

Json to_json(const fit::SliceOptions& o) {
  Json j;
  j["model"] = fit::to_string(o.kind);
  j["half_window"] = o.half_window;
  j["edge_exclusion"] = o.edge_exclusion;
  return j;
}

Json to_json(const study::BootstrapScenario& s) {
  Json j;
  j["dynamics"] = to_json(s.dynamics);
  j["speckle"] = to_json(s.speckle);
  j["n_frames"] = s.n_frames;
  j["seed"] = s.seed;
  j["fractions"] = s.fractions;
  j["replicates"] = s.replicates;
  j["fit_model"] = fit::to_string(s.fit_kind);
  j["fit_lag_fraction"] = s.fit_lag_fraction;
  return j;
}

Json to_json(const study::StudyReport& r) {
  Json j;
  j["scenario"] = to_json(r.scenario);
  j["tau_star"] = r.tau_star;
  j["truth_path"] = r.truth_path;
  j["records"] = Json::array();
  for (const auto& c : r.records) {
    Json rec;
    rec["label"] = c.label;
    rec["fraction"] = c.fraction;
    rec["n_pixels"] = c.n_pixels;
    rec["replicates"] = c.replicates;
    rec["snr_raw"] = number_or_null(c.snr_raw);
    rec["snr_denoised"] = number_or_null(c.snr_denoised);
    rec["beta_obs_raw"] = number_or_null(c.beta_obs_raw);
    rec["beta_obs_denoised"] = number_or_null(c.beta_obs_denoised);
    rec["delta_beta_rel"] = number_or_null(c.delta_beta_rel);
    rec["amp_raw"] = number_or_null(c.amp_raw);
    rec["amp_denoised"] = number_or_null(c.amp_denoised);
    rec["r_squared_raw"] = number_or_null(c.r_squared_raw);
    rec["r_squared_denoised"] = number_or_null(c.r_squared_denoised);
    rec["amp_raw_replicates"] = numbers(c.amp_raw_replicates);
    rec["amp_denoised_replicates"] = numbers(c.amp_denoised_replicates);
    rec["fit_raw"] = to_json(c.fit_raw);
    rec["fit_denoised"] = to_json(c.fit_denoised);
    rec["raw_path"] = c.raw_path;
    rec["denoised_path"] = c.denoised_path;
    rec["g2_path"] = c.g2_path;
    rec["plot_path"] = c.plot_path;
    j["records"].push_back(rec);
  }
  return j;
}

// --- decoders --------------------------------------------------------------

synth::DynamicsSpec dynamics_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  const Json* kind = r.find("kind");
  if (!kind) fail(path, "missing key 'kind'");
  synth::DynamicsSpec d;
  validated(r.at("kind"), [&] {
    d.kind = synth::dynamics_kind_from_string(as_string(*kind, r.at("kind")));
  });
  r.number("tau_c", d.tau_c);
  r.number("gamma", d.gamma);
  switch (d.kind) {
    case synth::DynamicsKind::StationaryKww:
      break;
    case synth::DynamicsKind::AgingKww:
      r.number("aging_exponent", d.aging_exponent);
      break;
    case synth::DynamicsKind::Oscillatory:
      r.number("amplitude", d.amplitude);
      r.number("omega", d.omega);
      r.number("damping", d.damping);
      break;
    case synth::DynamicsKind::TwoStep:
      r.number("weight", d.weight);
      r.number("tau_c2", d.tau_c2);
      r.number("gamma2", d.gamma2);
      break;
  }
  r.finish();
  validated(path, [&] { d.validate(); });
  return d;
}

synth::SpeckleSpec speckle_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  synth::SpeckleSpec s;
  r.size("n_pixels", s.n_pixels);
  r.size("n_modes", s.n_modes);
  if (const Json* mc = r.find("mean_counts")) {
    if (mc->is_null()) {
      s.mean_counts.reset();
    } else {
      s.mean_counts = as_number(*mc, r.at("mean_counts"));
    }
  }
  r.finish();
  validated(path, [&] { s.validate(); });
  return s;
}

synth::DatasetConfig dataset_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  synth::DatasetConfig c;
  r.u64("seed", c.seed);
  if (const Json* v = r.find("dynamics")) {
    const std::string p = r.at("dynamics");
    for (std::size_t i = 0; i < as_array(*v, p).size(); ++i) {
      c.dynamics.push_back(dynamics_from_json((*v)[i], child(p, i)));
    }
  }
  if (const Json* v = r.find("speckle")) {
    const std::string p = r.at("speckle");
    for (std::size_t i = 0; i < as_array(*v, p).size(); ++i) {
      c.speckle.push_back(speckle_from_json((*v)[i], child(p, i)));
    }
  }
  r.sizes("n_frames", c.n_frames);
  r.size("replicates", c.replicates);
  r.number("frame_interval_s", c.frame_interval_s);
  if (const Json* v = r.find("split")) {
    const std::string p = r.at("split");
    if (as_array(*v, p).size() != 3) {
      fail(p, "expected [train, validation, test]");
    }
    for (std::size_t i = 0; i < 3; ++i) c.split[i] = as_number((*v)[i], child(p, i));
    const double sum = c.split[0] + c.split[1] + c.split[2];
    if (std::abs(sum - 1.0) > 1e-9) fail(p, "split fractions must sum to 1");
  }
  r.size("crop_size", c.crop_size);
  r.size("crop_stride", c.crop_stride);
  r.boolean("reverse_age", c.reverse_age);
  r.sizes("subsample_intervals", c.subsample_intervals);
  r.boolean("repair_diagonal", c.repair_diagonal);
  r.boolean("write_pixel_series", c.write_pixel_series);
  r.finish();
  validated(path, [&] { c.validate(); });
  return c;
}

dae::Architecture architecture_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  dae::Architecture a;
  r.sizes("encoder_channels", a.encoder_channels);
  r.size("kernel_size", a.kernel_size);
  r.finish();
  validated(path, [&] { a.validate(); });
  return a;
}

dae::TrainConfig train_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  dae::TrainConfig t;
  r.number("learning_rate", t.learning_rate);
  r.number("beta1", t.beta1);
  r.number("beta2", t.beta2);
  r.number("adam_eps", t.adam_eps);
  r.size("batch_size", t.batch_size);
  r.size("max_epochs", t.max_epochs);
  r.number("early_stop_loss_threshold", t.early_stop_loss_threshold);
  r.u64("shuffle_seed", t.shuffle_seed);
  r.finish();
  validated(path, [&] { t.validate(); });
  return t;
}

metrics::EvalOptions eval_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  metrics::EvalOptions o;
  r.size("max_lag", o.acf_max_lag);
  r.number("z", o.z);
  r.number("ssim_threshold", o.ssim_threshold);
  r.size("tau_star", o.tau_star);
  r.finish();
  if (!(o.z > 0.0)) fail(r.at("z"), "must be > 0");
  if (o.acf_max_lag < 1) fail(r.at("max_lag"), "must be >= 1");
  return o;
}

fit::SliceOptions slice_options_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  fit::SliceOptions o;
  if (const Json* m = r.find("model")) {
    validated(r.at("model"), [&] {
      o.kind = fit::model_kind_from_string(as_string(*m, r.at("model")));
    });
  }
  r.size("half_window", o.half_window);
  r.number("edge_exclusion", o.edge_exclusion);
  r.finish();
  if (!(o.edge_exclusion >= 0.0 && o.edge_exclusion < 0.5)) {
    fail(r.at("edge_exclusion"), "must lie in [0, 0.5)");
  }
  return o;
}

study::BootstrapScenario scenario_from_json(const Json& j, const std::string& path) {
  Reader r(j, path);
  study::BootstrapScenario s;
  if (const Json* v = r.find("dynamics")) s.dynamics = dynamics_from_json(*v, r.at("dynamics"));
  if (const Json* v = r.find("speckle")) s.speckle = speckle_from_json(*v, r.at("speckle"));
  r.size("n_frames", s.n_frames);
  r.u64("seed", s.seed);
  r.numbers("fractions", s.fractions);
  r.size("replicates", s.replicates);
  if (const Json* m = r.find("fit_model")) {
    validated(r.at("fit_model"), [&] {
      s.fit_kind = fit::model_kind_from_string(as_string(*m, r.at("fit_model")));
    });
  }
  r.number("fit_lag_fraction", s.fit_lag_fraction);
  r.finish();
  validated(path, [&] { s.validate(); });
  return s;
}

}  // namespace c2dn::codec
