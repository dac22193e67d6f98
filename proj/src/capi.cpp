#include "c2dn/c2dn.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "c2dn/codec.hpp"
#include "c2dn/error.hpp"
#include "c2dn/fcdae.hpp"
#include "c2dn/fitdyn.hpp"
#include "c2dn/io.hpp"
#include "c2dn/metrics.hpp"
#include "c2dn/study.hpp"
#include "c2dn/synth.hpp"

struct c2dn_c2 {
  c2dn::C2Matrix m;
};
struct c2dn_series {
  c2dn::PixelSeries s;
};
struct c2dn_model {
  c2dn::dae::Model m;
};

namespace {

using c2dn::codec::Json;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

struct ArgumentError {
  std::string what;
};

c2dn_status status_of(c2dn::ErrorCode code) {
  switch (code) {
    case c2dn::ErrorCode::Config: return C2DN_E_CONFIG;
    case c2dn::ErrorCode::Format: return C2DN_E_FORMAT;
    case c2dn::ErrorCode::Shape: return C2DN_E_SHAPE;
    case c2dn::ErrorCode::Numeric: return C2DN_E_NUMERIC;
    case c2dn::ErrorCode::Io: return C2DN_E_IO;
  }
  return C2DN_E_INTERNAL;
}

// Runs f, translating every exception into a status code and message.
template <typename F>
c2dn_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return C2DN_OK;
  } catch (const ArgumentError& e) {
    g_last_error = e.what;
    return C2DN_E_ARGUMENT;
  } catch (const c2dn::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return C2DN_E_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return C2DN_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return C2DN_E_INTERNAL;
  } catch (...) {
    g_last_error = "internal error: unknown exception";
    return C2DN_E_INTERNAL;
  }
}

template <typename T>
const T& need(const T* p, const char* name) {
  if (!p) throw ArgumentError{std::string(name) + " is NULL"};
  return *p;
}

std::string need_path(const char* p, const char* name) {
  if (!p || !*p) throw ArgumentError{std::string(name) + " is NULL or empty"};
  return p;
}

template <typename T>
void need_out(T** out, const char* name) {
  if (!out) throw ArgumentError{std::string(name) + " is NULL"};
  *out = nullptr;
}

Json config_of(const char* text) {
  if (!text || !*text) return Json::object();
  return c2dn::codec::parse(text);
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void emit(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

std::string dumped(const Json& j) { return j.dump(2) + "\n"; }

std::vector<c2dn::dae::TrainingPair> training_pairs(const fs::path& manifest) {
  std::vector<c2dn::dae::TrainingPair> data;
  for (const auto& p : c2dn::synth::load_pairs(manifest, "train")) {
    data.push_back(c2dn::dae::make_training_pair(p.raw, p.truth));
  }
  if (data.empty()) {
    throw c2dn::Error(c2dn::ErrorCode::Config,
                      "manifest " + manifest.string() + " has an empty training split");
  }
  return data;
}

}  // namespace

extern "C" {

const char* c2dn_version(void) { return "1.0.0"; }

const char* c2dn_last_error(void) { return g_last_error.c_str(); }

const char* c2dn_status_name(c2dn_status status) {
  switch (status) {
    case C2DN_OK: return "OK";
    case C2DN_E_CONFIG: return "E_CONFIG";
    case C2DN_E_FORMAT: return "E_FORMAT";
    case C2DN_E_SHAPE: return "E_SHAPE";
    case C2DN_E_NUMERIC: return "E_NUMERIC";
    case C2DN_E_IO: return "E_IO";
    case C2DN_E_ARGUMENT: return "E_ARGUMENT";
    case C2DN_E_INTERNAL: return "E_INTERNAL";
  }
  return "E_INTERNAL";
}

void c2dn_string_free(char* s) { std::free(s); }

c2dn_status c2dn_c2_from_values(size_t n, const double* values, c2dn_c2** out) {
  return guarded([&] {
    need_out(out, "out");
    if (n == 0) throw ArgumentError{"n must be >= 1"};
    need(values, "values");
    std::vector<double> v(values, values + n * n);
    *out = new c2dn_c2{c2dn::C2Matrix(n, std::move(v))};
  });
}

c2dn_status c2dn_c2_read(const char* path, c2dn_c2** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new c2dn_c2{c2dn::io::read_c2(need_path(path, "path"))};
  });
}

c2dn_status c2dn_c2_write(const c2dn_c2* c2, const char* path) {
  return guarded([&] {
    c2dn::io::write_c2(need_path(path, "path"), need(c2, "c2").m, true);
  });
}

size_t c2dn_c2_size(const c2dn_c2* c2) { return c2 ? c2->m.size() : 0; }

c2dn_status c2dn_c2_values(const c2dn_c2* c2, double* out, size_t capacity) {
  return guarded([&] {
    const auto& m = need(c2, "c2").m;
    need(out, "out");
    const auto v = m.values();
    if (capacity < v.size()) {
      throw ArgumentError{"capacity " + std::to_string(capacity) + " < " +
                          std::to_string(v.size())};
    }
    std::copy(v.begin(), v.end(), out);
  });
}

void c2dn_c2_free(c2dn_c2* c2) { delete c2; }

c2dn_status c2dn_series_read(const char* path, c2dn_series** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new c2dn_series{c2dn::io::read_series(need_path(path, "path"))};
  });
}

c2dn_status c2dn_series_compute_c2(const c2dn_series* series, int repair,
                                   c2dn_c2** out) {
  return guarded([&] {
    need_out(out, "out");
    auto c2 = c2dn::corr::compute_c2(need(series, "series").s);
    if (repair) c2 = c2dn::corr::repair_diagonal(c2);
    *out = new c2dn_c2{std::move(c2)};
  });
}

void c2dn_series_free(c2dn_series* series) { delete series; }

c2dn_status c2dn_synth_dataset(const char* config_json, const char* out_dir,
                               char** summary_json) {
  return guarded([&] {
    const auto cfg = c2dn::codec::dataset_from_json(config_of(config_json));
    const auto summary = c2dn::synth::build_dataset(cfg, need_path(out_dir, "out_dir"));
    emit(summary_json, dumped(c2dn::codec::to_json(summary)));
  });
}

c2dn_status c2dn_model_build(const char* architecture_json, uint64_t seed,
                             c2dn_model** out) {
  return guarded([&] {
    need_out(out, "out");
    const auto arch = c2dn::codec::architecture_from_json(config_of(architecture_json));
    *out = new c2dn_model{c2dn::dae::build_model(arch, seed)};
  });
}

c2dn_status c2dn_model_load(const char* path, c2dn_model** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new c2dn_model{c2dn::dae::load_checkpoint(need_path(path, "path"))};
  });
}

c2dn_status c2dn_model_save(const c2dn_model* model, const char* path) {
  return guarded([&] {
    c2dn::dae::save_checkpoint(need(model, "model").m, need_path(path, "path"));
  });
}

c2dn_status c2dn_model_info(const c2dn_model* model, char** json) {
  return guarded([&] {
    const auto& m = need(model, "model").m;
    Json j;
    j["architecture"] = c2dn::codec::to_json(m.arch);
    j["seed"] = m.seed;
    j["parameter_count"] = m.parameter_count();
    j["epochs_run"] = m.meta.epochs_run;
    j["final_loss"] = m.meta.final_loss;
    emit(json, dumped(j));
  });
}

c2dn_status c2dn_model_train(c2dn_model* model, const char* manifest,
                             const char* train_json, char** history_json) {
  return guarded([&] {
    if (!model) throw ArgumentError{"model is NULL"};
    const auto cfg = c2dn::codec::train_from_json(config_of(train_json));
    const auto data = training_pairs(need_path(manifest, "manifest"));
    const auto losses = c2dn::dae::train(model->m, data, cfg);
    Json j;
    j["training_pairs"] = data.size();
    j["epoch_losses"] = losses;
    emit(history_json, dumped(j));
  });
}

c2dn_status c2dn_model_denoise(const c2dn_model* model, const c2dn_c2* input,
                               c2dn_c2** out) {
  return guarded([&] {
    need_out(out, "out");
    *out = new c2dn_c2{c2dn::dae::denoise(need(model, "model").m, need(input, "input").m)};
  });
}

void c2dn_model_free(c2dn_model* model) { delete model; }

c2dn_status c2dn_evaluate(const c2dn_c2* raw, const c2dn_c2* denoised,
                          const char* options_json, char** report_json) {
  return guarded([&] {
    const auto opts = c2dn::codec::eval_from_json(config_of(options_json));
    const auto report = c2dn::metrics::evaluate(need(raw, "raw").m,
                                                need(denoised, "denoised").m, opts);
    emit(report_json, dumped(c2dn::codec::to_json(report)));
  });
}

c2dn_status c2dn_fit_slices(const c2dn_c2* c2, const char* options_json,
                            char** trace_csv, char** trace_svg,
                            char** summary_json) {
  return guarded([&] {
    const auto opts = c2dn::codec::slice_options_from_json(config_of(options_json));
    const auto trace = c2dn::fit::fit_slices(need(c2, "c2").m, opts);
    std::size_t converged = 0;
    double r2 = 0.0, tau = 0.0, tau2 = 0.0;
    for (const auto& f : trace.fits) {
      converged += f.converged ? 1 : 0;
      r2 += f.r_squared;
      tau += f.params[2];
      tau2 += f.params[2] * f.params[2];
    }
    const double n = static_cast<double>(trace.fits.size());
    Json j;
    j["options"] = c2dn::codec::to_json(opts);
    j["first_age"] = trace.ages.front();
    j["last_age"] = trace.ages.back();
    j["n_slices"] = trace.fits.size();
    j["n_converged"] = converged;
    j["mean_r_squared"] = r2 / n;
    const double mean_tau = tau / n;
    j["tau_c_mean"] = mean_tau;
    j["tau_c_std"] = std::sqrt(std::max(0.0, tau2 / n - mean_tau * mean_tau));
    emit(trace_csv, c2dn::fit::trace_csv(trace));
    emit(trace_svg, c2dn::study::trace_svg(trace));
    emit(summary_json, dumped(j));
  });
}

c2dn_status c2dn_bootstrap_study(const c2dn_model* model,
                                 const char* scenario_json, const char* out_dir,
                                 char** report_json) {
  return guarded([&] {
    const auto scenario = c2dn::codec::scenario_from_json(config_of(scenario_json));
    const auto report = c2dn::study::bootstrap_study(
        need(model, "model").m, scenario, need_path(out_dir, "out_dir"));
    emit(report_json, dumped(c2dn::codec::to_json(report)));
  });
}

c2dn_status c2dn_ensemble(const char* config_json, const char* manifest,
                          const char* out_dir, char** report_json) {
  return guarded([&] {
    const Json cfg = config_of(config_json);
    if (!cfg.is_object()) c2dn::codec::fail("", "expected a mapping");
    c2dn::dae::Architecture arch;
    c2dn::dae::TrainConfig train;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3};
    std::string split = "validation";
    bool allow_duplicates = false;
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
      const std::string p = "/" + it.key();
      if (it.key() == "architecture") {
        arch = c2dn::codec::architecture_from_json(*it, p);
      } else if (it.key() == "train") {
        train = c2dn::codec::train_from_json(*it, p);
      } else if (it.key() == "seeds") {
        if (!it->is_array()) c2dn::codec::fail(p, "expected a list");
        seeds.clear();
        for (std::size_t i = 0; i < it->size(); ++i) {
          const Json& s = (*it)[i];
          if (!s.is_number_unsigned()) {
            c2dn::codec::fail(p + "/" + std::to_string(i), "expected a non-negative integer");
          }
          seeds.push_back(s.get<std::uint64_t>());
        }
      } else if (it.key() == "split") {
        if (!it->is_string()) c2dn::codec::fail(p, "expected a string");
        split = it->get<std::string>();
        if (split != "train" && split != "validation" && split != "test") {
          c2dn::codec::fail(p, "expected train, validation or test");
        }
      } else if (it.key() == "allow_duplicate_seeds") {
        if (!it->is_boolean()) c2dn::codec::fail(p, "expected true or false");
        allow_duplicates = it->get<bool>();
      } else {
        c2dn::codec::fail(p, "unknown key '" + it.key() + "'");
      }
    }
    if (seeds.size() < 2) throw c2dn::Error(c2dn::ErrorCode::Config, "need ≥ 2 models");

    const fs::path mpath = need_path(manifest, "manifest");
    const auto data = training_pairs(mpath);
    std::vector<c2dn::C2Matrix> raws;
    Json ids = Json::array();
    for (const auto& p : c2dn::synth::load_pairs(mpath, split)) {
      raws.push_back(p.raw);
      ids.push_back(p.sample_id);
    }
    if (raws.empty()) {
      throw c2dn::Error(c2dn::ErrorCode::Config, "manifest split '" + split + "' is empty");
    }
    const auto models =
        c2dn::dae::train_ensemble(arch, data, train, seeds, allow_duplicates);
    const auto report = c2dn::study::ensemble_study(models, raws);

    Json j;
    j["seeds"] = seeds;
    j["split"] = split;
    j["sample_ids"] = ids;
    const Json r = c2dn::codec::to_json(report);
    for (auto it = r.begin(); it != r.end(); ++it) j[it.key()] = *it;
    if (out_dir && *out_dir) {
      const fs::path dir = out_dir;
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec || !fs::is_directory(dir)) {
        throw c2dn::Error(c2dn::ErrorCode::Io, "cannot create " + dir.string());
      }
      Json files = Json::array();
      for (std::size_t k = 0; k < models.size(); ++k) {
        const std::string name = "model_" + std::to_string(k) + "_seed" +
                                 std::to_string(seeds[k]) + ".fcda";
        c2dn::dae::save_checkpoint(models[k], dir / name);
        files.push_back(name);
      }
      j["checkpoints"] = files;
      c2dn::io::atomic_write(dir / "ensemble.json", dumped(j));
    }
    emit(report_json, dumped(j));
  });
}

}  // extern "C"
