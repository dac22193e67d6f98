// c2dn command-line tool. Talks to the library only through the C API.

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "c2dn/c2dn.h"
#include "json.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

const char* kConfigHelp = R"(
Config file (YAML, every section optional, unknown keys rejected):
  dataset:        seed 0, dynamics [] (kind stationary_kww|aging_kww|
                  oscillatory|two_step with tau_c, gamma, aging_exponent,
                  amplitude, omega, damping, weight, tau_c2, gamma2),
                  speckle [] (n_pixels 1000, n_modes 1, mean_counts 5 or
                  null), n_frames [128], replicates 1, frame_interval_s 1,
                  split [0.8, 0.1, 0.1], crop_size 64, crop_stride 32,
                  reverse_age true, subsample_intervals [],
                  repair_diagonal true, write_pixel_series true
  architecture:   encoder_channels [1, 4, 8, 16, 32], kernel_size 3
  train:          seed 0 (model init), learning_rate 1e-3, beta1 0.9,
                  beta2 0.999, adam_eps 1e-8, batch_size 8, max_epochs 30,
                  early_stop_loss_threshold 1e-3, shuffle_seed 0
  eval:           max_lag 20, z 1.96, ssim_threshold 0.15,
                  tau_star 0 (0: from a KWW fit of the denoised g2)
  fit:            model kww, half_window 0, edge_exclusion 0.1
  bootstrap:      dynamics oscillatory(tau_c 15, gamma 1, amplitude 0.4,
                  omega 0.35, damping 0.02), speckle {n_pixels 500,
                  n_modes 1, mean_counts null}, n_frames 64, seed 5,
                  fractions [1, 0.5, 0.25, 0.1, 0.05], replicates 8,
                  fit_model composite, fit_lag_fraction 0.5
  ensemble:       seeds [0, 1, 2, 3], split validation,
                  allow_duplicate_seeds false
  paths:          dataset, manifest, checkpoint, model_dir, study_dir,
                  ensemble_dir (defaults for --out and inputs)
Flags override the file. See configs/desk.yaml.
)";

// Error raised by the tool itself, carrying the prefix it prints with.
struct ToolError {
  std::string prefix;
  std::string message;
};

[[noreturn]] void config_error(const std::string& msg) { throw ToolError{"E_CONFIG", msg}; }

std::string escape_key(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

// --- YAML -> JSON with a pointer -> line index -----------------------------

class Config {
 public:
  Config() : root_(Json::object()) {}

  static Config load(const std::string& path) {
    Config c;
    c.file_ = path;
    YAML::Node doc;
    try {
      doc = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
      throw ToolError{"E_IO", "cannot read config " + path};
    } catch (const YAML::Exception& e) {
      throw ToolError{"E_CONFIG", path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg};
    }
    if (!doc || doc.IsNull()) return c;
    c.root_ = c.convert(doc, "");
    if (!c.root_.is_object()) c.fail("", "expected a mapping at the top level");
    static const std::vector<std::string> sections{
        "dataset", "architecture", "train", "eval", "fit",
        "bootstrap", "ensemble", "paths"};
    for (auto it = c.root_.begin(); it != c.root_.end(); ++it) {
      if (std::find(sections.begin(), sections.end(), it.key()) == sections.end()) {
        c.fail("/" + escape_key(it.key()), "unknown section '" + it.key() + "'");
      }
    }
    return c;
  }

  Json section(const std::string& name) const {
    const auto it = root_.find(name);
    if (it == root_.end() || it->is_null()) return Json::object();
    if (!it->is_object()) fail("/" + name, "expected a mapping");
    return *it;
  }

  std::optional<std::string> path(const std::string& key) const {
    const Json p = section("paths");
    static const std::vector<std::string> keys{
        "dataset", "manifest", "checkpoint", "model_dir", "study_dir", "ensemble_dir"};
    for (auto it = p.begin(); it != p.end(); ++it) {
      if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
        fail("/paths/" + escape_key(it.key()), "unknown key '" + it.key() + "'");
      }
      if (!it->is_string()) fail("/paths/" + escape_key(it.key()), "expected a string");
    }
    const auto it = p.find(key);
    if (it == p.end()) return std::nullopt;
    return it->get<std::string>();
  }

  // Location prefix for a JSON pointer inside the file.
  std::string where(const std::string& pointer) const {
    if (file_.empty()) return pointer.empty() ? "" : pointer + ": ";
    std::string p = pointer;
    while (true) {
      const auto it = lines_.find(p);
      if (it != lines_.end()) {
        return file_ + ":" + std::to_string(it->second) + ": " + (pointer.empty() ? "" : pointer + ": ");
      }
      if (p.empty()) break;
      p = p.substr(0, p.rfind('/'));
    }
    return file_ + ": " + (pointer.empty() ? "" : pointer + ": ");
  }

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    config_error(where(pointer) + msg);
  }

 private:
  Json scalar(const YAML::Node& n) {
    const std::string& s = n.Scalar();
    if (n.Tag() == "!") return s;  // quoted
    if (s == "~" || s == "null" || s == "Null" || s == "NULL" || s.empty()) return nullptr;
    if (s == "true" || s == "True" || s == "TRUE") return true;
    if (s == "false" || s == "False" || s == "FALSE") return false;
    static const std::regex integer("[-+]?[0-9]+");
    static const std::regex real("[-+]?(\\.[0-9]+|[0-9]+(\\.[0-9]*)?)([eE][-+]?[0-9]+)?");
    try {
      if (std::regex_match(s, integer)) {
        if (s[0] == '-') return std::stoll(s);
        return std::stoull(s[0] == '+' ? s.substr(1) : s);
      }
      if (std::regex_match(s, real)) return std::stod(s);
    } catch (const std::out_of_range&) {
    }
    return s;
  }

  Json convert(const YAML::Node& n, const std::string& ptr) {
    lines_.emplace(ptr, n.Mark().line + 1);
    switch (n.Type()) {
      case YAML::NodeType::Map: {
        Json obj = Json::object();
        for (const auto& kv : n) {
          const std::string key = kv.first.Scalar();
          const std::string child = ptr + "/" + escape_key(key);
          lines_[child] = kv.first.Mark().line + 1;
          obj[key] = convert(kv.second, child);
          lines_[child] = kv.first.Mark().line + 1;
        }
        return obj;
      }
      case YAML::NodeType::Sequence: {
        Json arr = Json::array();
        std::size_t i = 0;
        for (const auto& item : n) {
          arr.push_back(convert(item, ptr + "/" + std::to_string(i++)));
        }
        return arr;
      }
      case YAML::NodeType::Scalar:
        return scalar(n);
      default:
        return nullptr;
    }
  }

  std::string file_;
  Json root_;
  std::map<std::string, int> lines_;
};

// --- C API glue -------------------------------------------------------------

// Throws with the status prefix; config errors are located in the file when
// the message carries a JSON pointer relative to `section`.
void check(c2dn_status st, const Config* cfg = nullptr, const std::string& section = "") {
  if (st == C2DN_OK) return;
  std::string msg = c2dn_last_error();
  if (st == C2DN_E_CONFIG && cfg && msg.rfind("at /", 0) == 0) {
    const auto colon = msg.find(": ");
    if (colon != std::string::npos) {
      std::string ptr = msg.substr(3, colon - 3);
      if (ptr == "/") ptr.clear();
      const std::string full = section + ptr;
      msg = cfg->where(full) + msg.substr(colon + 2);
      if (full.empty()) msg = cfg->where("") + msg;
    }
  }
  throw ToolError{c2dn_status_name(st), msg};
}

struct Str {
  char* p = nullptr;
  ~Str() { c2dn_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using C2 = Handle<c2dn_c2, c2dn_c2_free>;
using Model = Handle<c2dn_model, c2dn_model_free>;

std::string timestamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string finish_report(const std::string& json_text, bool stamp) {
  if (!stamp) return json_text;
  Json j = Json::parse(json_text);
  j["generated_at"] = timestamp();
  return j.dump(2) + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ToolError{"E_IO", "cannot write " + path.string()};
    out << text;
    if (!out) throw ToolError{"E_IO", "cannot write " + path.string()};
  }
  fs::rename(tmp, path, ec);
  if (ec) throw ToolError{"E_IO", "cannot write " + path.string() + ": " + ec.message()};
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      config_error("--fractions: cannot parse '" + item + "'");
    }
  }
  if (out.empty()) config_error("--fractions: empty list");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      if (!item.empty() && item[0] == '-') throw std::invalid_argument(item);
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      config_error("--seeds: cannot parse '" + item + "'");
    }
  }
  return out;
}

fs::path out_dir_or(const std::string& flag, const Config& cfg, const std::string& key,
                    const char* fallback) {
  if (!flag.empty()) return flag;
  if (auto p = cfg.path(key)) return *p;
  return fallback;
}

// Model init seed lives next to the optimizer settings in the file but is
// not a TrainConfig field.
std::uint64_t take_model_seed(Json& train, const Config& cfg) {
  std::uint64_t seed = 0;
  const auto it = train.find("seed");
  if (it != train.end()) {
    if (!it->is_number_unsigned()) cfg.fail("/train/seed", "expected a non-negative integer");
    seed = it->get<std::uint64_t>();
    train.erase("seed");
  }
  return seed;
}

// --- subcommands --------------------------------------------------------------

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool timestamps = false;
};

Config load_config(const Common& c) {
  return c.config.empty() ? Config() : Config::load(c.config);
}

int cmd_synth(const Common& c) {
  const Config cfg = load_config(c);
  Json ds = cfg.section("dataset");
  if (c.seed) ds["seed"] = *c.seed;
  const fs::path out = out_dir_or(c.out, cfg, "dataset", "data");
  Str summary;
  check(c2dn_synth_dataset(ds.dump().c_str(), out.string().c_str(), &summary.p), &cfg, "/dataset");
  const Json s = Json::parse(summary.str());
  std::printf("base samples: %llu (train %llu, validation %llu, test %llu)\n",
              s["base_samples"].get<unsigned long long>(),
              s["base_split"]["train"].get<unsigned long long>(),
              s["base_split"]["validation"].get<unsigned long long>(),
              s["base_split"]["test"].get<unsigned long long>());
  for (const char* split : {"train", "validation", "test"}) {
    std::printf("%s: %llu\n", split, s["records"][split].get<unsigned long long>());
  }
  std::printf("manifest: %s\n", s["manifest"].get<std::string>().c_str());
  return 0;
}

int cmd_train(const Common& c, const std::string& manifest_flag) {
  const Config cfg = load_config(c);
  Json train = cfg.section("train");
  std::uint64_t seed = take_model_seed(train, cfg);
  if (c.seed) {
    seed = *c.seed;
    train["shuffle_seed"] = *c.seed;
  }
  std::string manifest = manifest_flag;
  if (manifest.empty()) {
    if (auto p = cfg.path("manifest")) manifest = *p;
  }
  if (manifest.empty()) config_error("train: no manifest given (--manifest or paths.manifest)");
  if (!fs::exists(manifest)) throw ToolError{"E_IO", "manifest not found: " + manifest};
  const fs::path out = out_dir_or(c.out, cfg, "model_dir", "model");

  Model model;
  check(c2dn_model_build(cfg.section("architecture").dump().c_str(), seed, &model.p), &cfg,
        "/architecture");
  Str history;
  check(c2dn_model_train(model.p, manifest.c_str(), train.dump().c_str(), &history.p), &cfg,
        "/train");
  std::error_code ec;
  fs::create_directories(out, ec);
  check(c2dn_model_save(model.p, (out / "model.fcda").string().c_str()));

  const Json h = Json::parse(history.str());
  std::string csv = "epoch,loss\n";
  const auto& losses = h["epoch_losses"];
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i + 1, losses[i].get<double>());
    csv += buf;
  }
  write_text(out / "loss_history.csv", csv);
  write_text(out / "train.json", finish_report(history.str(), c.timestamps));
  std::printf("pairs: %llu, epochs: %zu, first loss: %.6g, final loss: %.6g\n",
              h["training_pairs"].get<unsigned long long>(), losses.size(),
              losses.empty() ? 0.0 : losses.front().get<double>(),
              losses.empty() ? 0.0 : losses.back().get<double>());
  std::printf("checkpoint: %s\n", (out / "model.fcda").string().c_str());
  return 0;
}

int cmd_denoise(const std::string& ckpt, const std::string& in, const std::string& out) {
  Model model;
  check(c2dn_model_load(ckpt.c_str(), &model.p));
  C2 input, output;
  check(c2dn_c2_read(in.c_str(), &input.p));
  check(c2dn_model_denoise(model.p, input.p, &output.p));
  check(c2dn_c2_write(output.p, out.c_str()));
  return 0;
}

int cmd_eval(const Common& c, const std::string& raw_path, const std::string& den_path) {
  const Config cfg = load_config(c);
  C2 raw, den;
  check(c2dn_c2_read(raw_path.c_str(), &raw.p));
  check(c2dn_c2_read(den_path.c_str(), &den.p));
  Str report;
  check(c2dn_evaluate(raw.p, den.p, cfg.section("eval").dump().c_str(), &report.p), &cfg,
        "/eval");
  const std::string text = finish_report(report.str(), c.timestamps);
  if (c.out.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_text(c.out, text);
  }
  return 0;
}

int cmd_fit(const Common& c, const std::string& in, const std::string& model_kind,
            std::optional<double> edge, std::optional<std::size_t> half_window) {
  const Config cfg = load_config(c);
  Json opts = cfg.section("fit");
  if (!model_kind.empty()) opts["model"] = model_kind;
  if (edge) opts["edge_exclusion"] = *edge;
  if (half_window) opts["half_window"] = *half_window;
  C2 map;
  check(c2dn_c2_read(in.c_str(), &map.p));
  Str csv, svg, summary;
  check(c2dn_fit_slices(map.p, opts.dump().c_str(), &csv.p, &svg.p, &summary.p), &cfg, "/fit");
  if (c.out.empty()) {
    std::fputs(csv.str().c_str(), stdout);
    return 0;
  }
  const fs::path out = c.out;
  write_text(out / "trace.csv", csv.str());
  write_text(out / "trace.svg", svg.str());
  write_text(out / "fit_summary.json", finish_report(summary.str(), c.timestamps));
  const Json s = Json::parse(summary.str());
  std::printf("slices: %llu (ages %llu..%llu), converged: %llu, mean R^2: %.6g\n",
              s["n_slices"].get<unsigned long long>(), s["first_age"].get<unsigned long long>(),
              s["last_age"].get<unsigned long long>(), s["n_converged"].get<unsigned long long>(),
              s["mean_r_squared"].get<double>());
  return 0;
}

int cmd_bootstrap(const Common& c, const std::string& ckpt_flag,
                  const std::string& fractions) {
  const Config cfg = load_config(c);
  Json scenario = cfg.section("bootstrap");
  if (c.seed) scenario["seed"] = *c.seed;
  if (!fractions.empty()) scenario["fractions"] = parse_fractions(fractions);
  std::string ckpt = ckpt_flag;
  if (ckpt.empty()) {
    if (auto p = cfg.path("checkpoint")) ckpt = *p;
  }
  if (ckpt.empty()) config_error("bootstrap-study: no checkpoint given (--checkpoint or paths.checkpoint)");
  const fs::path out = out_dir_or(c.out, cfg, "study_dir", "bootstrap");
  Model model;
  check(c2dn_model_load(ckpt.c_str(), &model.p));
  Str report;
  check(c2dn_bootstrap_study(model.p, scenario.dump().c_str(), out.string().c_str(), &report.p),
        &cfg, "/bootstrap");
  if (c.timestamps) write_text(out / "study.json", finish_report(report.str(), true));
  const Json r = Json::parse(report.str());
  std::printf("%-8s %8s %9s %9s %9s %9s %9s\n", "label", "pixels", "snr_raw", "snr_den",
              "d_beta", "amp_raw", "amp_den");
  for (const auto& rec : r["records"]) {
    auto num = [](const Json& v) { return v.is_number() ? v.get<double>() : NAN; };
    std::printf("%-8s %8llu %9.4f %9.4f %9.4f %9.4f %9.4f\n",
                rec["label"].get<std::string>().c_str(),
                rec["n_pixels"].get<unsigned long long>(), num(rec["snr_raw"]),
                num(rec["snr_denoised"]), num(rec["delta_beta_rel"]), num(rec["amp_raw"]),
                num(rec["amp_denoised"]));
  }
  std::printf("report: %s\n", (out / "study.json").string().c_str());
  return 0;
}

int cmd_ensemble(const Common& c, const std::string& manifest_flag, const std::string& seeds) {
  const Config cfg = load_config(c);
  Json ens = cfg.section("ensemble");
  Json train = cfg.section("train");
  take_model_seed(train, cfg);
  Json request = Json::object();
  request["architecture"] = cfg.section("architecture");
  request["train"] = train;
  for (auto it = ens.begin(); it != ens.end(); ++it) {
    if (it.key() == "architecture" || it.key() == "train") {
      cfg.fail("/ensemble/" + it.key(), "unknown key '" + it.key() + "'");
    }
    request[it.key()] = *it;
  }
  if (!seeds.empty()) request["seeds"] = parse_seeds(seeds);
  const auto it = request.find("seeds");
  if (it != request.end() && it->is_array() && it->size() < 2) {
    config_error("need ≥ 2 models");
  }
  std::string manifest = manifest_flag;
  if (manifest.empty()) {
    if (auto p = cfg.path("manifest")) manifest = *p;
  }
  if (manifest.empty()) config_error("ensemble: no manifest given (--manifest or paths.manifest)");
  const fs::path out = out_dir_or(c.out, cfg, "ensemble_dir", "ensemble");
  Str report;
  const c2dn_status st =
      c2dn_ensemble(request.dump().c_str(), manifest.c_str(), out.string().c_str(), &report.p);
  // The request merges several file sections; route pointers back to them.
  if (st == C2DN_E_CONFIG) {
    const std::string msg = c2dn_last_error();
    if (msg.rfind("at /architecture", 0) == 0 || msg.rfind("at /train", 0) == 0) {
      check(st, &cfg, "");
    }
    check(st, &cfg, "/ensemble");
  }
  check(st);
  if (c.timestamps) write_text(out / "ensemble.json", finish_report(report.str(), true));
  const Json r = Json::parse(report.str());
  std::printf("models: %zu, samples: %zu\n", r["seeds"].size(), r["sample_ids"].size());
  std::printf("mean variance: %.6g\nmedian ratio: %.6g (p10 %.6g, p90 %.6g)\n",
              r["mean_variance"].get<double>(), r["median_ratio"].get<double>(),
              r["p10_ratio"].get<double>(), r["p90_ratio"].get<double>());
  std::printf("report: %s\n", (out / "ensemble.json").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Denoising and analysis of XPCS two-time correlation maps"};
  app.footer(kConfigHelp);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(c2dn_version()));

  Common common;
  auto add_common = [&](CLI::App* sub, bool with_seed) {
    sub->add_option("--config", common.config, "YAML config file")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "Output directory (file for eval)");
    if (with_seed) sub->add_option("--seed", common.seed, "Seed override");
    sub->add_flag("--timestamps", common.timestamps, "Embed generation time in reports");
  };

  auto* synth = app.add_subcommand("synth", "Generate the synthetic training dataset");
  add_common(synth, true);

  std::string manifest;
  auto* train = app.add_subcommand("train", "Train a model on a manifest's train split");
  add_common(train, true);
  train->add_option("--manifest", manifest, "Dataset manifest.tsv");

  std::string ckpt, in_path, out_path;
  auto* denoise = app.add_subcommand("denoise", "Denoise a C2F1 map");
  denoise->add_option("checkpoint", ckpt, "Model checkpoint")->required();
  denoise->add_option("input", in_path, "Input .c2f")->required();
  denoise->add_option("output", out_path, "Output .c2f")->required();

  std::string raw_path, den_path;
  auto* eval = app.add_subcommand("eval", "Reliability report for a raw/denoised pair");
  add_common(eval, false);
  eval->add_option("raw", raw_path, "Raw .c2f")->required();
  eval->add_option("denoised", den_path, "Denoised .c2f")->required();

  std::string fit_in, model_kind;
  std::optional<double> edge;
  std::optional<std::size_t> half_window;
  auto* fit = app.add_subcommand("fit", "Per-age-slice g2 fits");
  add_common(fit, false);
  fit->add_option("input", fit_in, "Input .c2f")->required();
  fit->add_option("--model", model_kind, "kww | composite");
  fit->add_option("--edge-exclude", edge, "Fraction of ages dropped at each end");
  fit->add_option("--half-window", half_window, "Ages averaged on each side of a slice");

  std::string fractions;
  auto* boot = app.add_subcommand("bootstrap-study", "Pixel-bootstrap degradation study");
  add_common(boot, true);
  boot->add_option("--checkpoint", ckpt, "Model checkpoint");
  boot->add_option("--fractions", fractions, "Comma-separated pixel fractions");

  std::string seeds;
  auto* ens = app.add_subcommand("ensemble", "Seed-ensemble variance study");
  add_common(ens, false);
  ens->add_option("--manifest", manifest, "Dataset manifest.tsv");
  ens->add_option("--seeds", seeds, "Comma-separated model seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "E_CONFIG: %s\n", e.what());
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*train) return cmd_train(common, manifest);
    if (*denoise) return cmd_denoise(ckpt, in_path, out_path);
    if (*eval) return cmd_eval(common, raw_path, den_path);
    if (*fit) return cmd_fit(common, fit_in, model_kind, edge, half_window);
    if (*boot) return cmd_bootstrap(common, ckpt, fractions);
    if (*ens) return cmd_ensemble(common, manifest, seeds);
  } catch (const ToolError& e) {
    std::fprintf(stderr, "%s: %s\n", e.prefix.c_str(), e.message.c_str());
    return 1;
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "E_INTERNAL: malformed report from library: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "E_INTERNAL: %s\n", e.what());
    return 1;
  }
  return 1;
}
