#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "c2dn/error.hpp"
#include "c2dn/io.hpp"
#include "c2dn/synth.hpp"

namespace c2dn::synth {
namespace fs = std::filesystem;

namespace {

std::string padded(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, v);
  return buf;
}

std::string split_name(std::size_t position, const SplitCounts& counts) {
  if (position < counts.train) return "train";
  if (position < counts.train + counts.validation) return "validation";
  return "test";
}

struct Variant {
  C2Matrix raw;
  C2Matrix truth;
  std::string tag;
};

}  // namespace

void DatasetConfig::validate() const {
  if (dynamics.empty()) throw_config("dataset: no dynamics specs given");
  if (speckle.empty()) throw_config("dataset: no speckle specs given");
  if (n_frames.empty()) throw_config("dataset: no n_frames given");
  if (replicates < 1) throw_config("dataset: replicates must be >= 1");
  for (const auto& d : dynamics) d.validate();
  for (const auto& s : speckle) s.validate();
  for (double f : split) {
    if (!(f >= 0.0 && f <= 1.0)) {
      throw_config("dataset: split fractions must lie in [0, 1]");
    }
  }
  const double sum = split[0] + split[1] + split[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw_config("dataset: split fractions must sum to 1 (got " +
                 std::to_string(sum) + ")");
  }
  for (std::size_t t : n_frames) {
    if (t < 2) throw_config("dataset: n_frames must be >= 2");
    for (std::size_t k : subsample_intervals) {
      if (k < 2) throw_config("dataset: subsample intervals must be >= 2");
      if ((t + k - 1) / k < 2) {
        throw_config("dataset: subsample interval " + std::to_string(k) +
                     " leaves fewer than 2 of " + std::to_string(t) +
                     " frames");
      }
    }
  }
  if (crop_size > 0 && crop_stride < 1) {
    throw_config("dataset: crop_stride must be >= 1");
  }
  if (!(frame_interval_s > 0.0)) {
    throw_config("dataset: frame_interval_s must be > 0");
  }
}

std::size_t DatasetConfig::base_count() const {
  return dynamics.size() * speckle.size() * n_frames.size() * replicates;
}

SplitCounts split_counts(std::size_t n, const std::array<double, 3>& split) {
  SplitCounts c;
  c.validation = static_cast<std::size_t>(
      std::floor(split[1] * static_cast<double>(n) + 1e-9));
  c.test = static_cast<std::size_t>(
      std::floor(split[2] * static_cast<double>(n) + 1e-9));
  c.validation = std::min(c.validation, n);
  c.test = std::min(c.test, n - c.validation);
  c.train = n - c.validation - c.test;
  return c;
}

std::size_t DatasetSummary::count(const std::string& split) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(),
                    [&](const ManifestRecord& r) { return r.split == split; }));
}

DatasetSummary build_dataset(const DatasetConfig& config,
                             const fs::path& out_dir) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw_io("dataset: cannot create output directory " + out_dir.string());
  }

  const std::size_t n_base = config.base_count();
  DatasetSummary summary;
  summary.base_samples = n_base;
  summary.base_split = split_counts(n_base, config.split);

  // Base samples are assigned to splits as a whole so no augmentation of a
  // validation sample leaks into training.
  std::vector<std::size_t> order(n_base);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(config.seed, 0xD5u));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::string> split_of(n_base);
  for (std::size_t pos = 0; pos < n_base; ++pos) {
    split_of[order[pos]] = split_name(pos, summary.base_split);
  }

  std::vector<ManifestRecord> base_records;
  std::size_t b = 0;
  for (std::size_t di = 0; di < config.dynamics.size(); ++di) {
    for (std::size_t si = 0; si < config.speckle.size(); ++si) {
      for (std::size_t ti = 0; ti < config.n_frames.size(); ++ti) {
        for (std::size_t rep = 0; rep < config.replicates; ++rep, ++b) {
          const std::uint64_t seed = derive_seed(config.seed, b);
          const auto& dyn = config.dynamics[di];
          const auto& spk = config.speckle[si];
          const std::size_t t = config.n_frames[ti];
          SyntheticSample sample =
              make_sample(dyn, spk, t, seed, config.frame_interval_s);
          const std::string base_id = "s" + padded(b, 4);
          const std::string spec = dyn.summary() + ";" + spk.summary();

          if (config.write_pixel_series) {
            io::write_series(out_dir / "series" / (base_id + ".pxs"),
                             sample.series);
          }
          C2Matrix raw = sample.c2_raw;
          C2Matrix truth = sample.c2_truth;
          if (config.repair_diagonal) {
            raw = corr::repair_diagonal(raw);
            truth = corr::repair_diagonal(truth);
          }
          const std::string base_raw = "base/" + base_id + "_raw.c2f";
          const std::string base_truth = "base/" + base_id + "_truth.c2f";
          io::write_c2(out_dir / base_raw, raw, true, spec);
          io::write_c2(out_dir / base_truth, truth, true, spec);
          base_records.push_back(
              {base_id, split_of[b], base_raw, base_truth, t, spec, seed});

          std::vector<Variant> variants;
          variants.push_back({raw, truth, "orig"});
          if (config.reverse_age) {
            variants.push_back(
                {corr::reverse_age(raw), corr::reverse_age(truth), "rev"});
          }
          std::vector<Variant> augmented;
          for (const auto& v : variants) {
            augmented.push_back({v.raw, v.truth, v.tag + "_k1"});
            for (std::size_t k : config.subsample_intervals) {
              augmented.push_back({corr::subsample_frames(v.raw, k),
                                   corr::subsample_frames(v.truth, k),
                                   v.tag + "_k" + std::to_string(k)});
            }
          }
          summary.augmented_matrices += augmented.size();

          for (const auto& v : augmented) {
            const std::size_t n = v.raw.size();
            std::vector<std::size_t> anchors{0};
            std::size_t size = n;
            if (config.crop_size > 0 && n > config.crop_size) {
              size = config.crop_size;
              anchors = corr::tile_anchors(n, size, config.crop_stride);
            }
            for (std::size_t a : anchors) {
              const std::string id =
                  base_id + "_" + v.tag + "_a" + padded(a, 4);
              const std::string raw_rel = "raw/" + id + ".c2f";
              const std::string truth_rel = "truth/" + id + ".c2f";
              const std::string record_spec =
                  spec + ";aug=" + v.tag + ",anchor=" + std::to_string(a);
              io::write_c2(out_dir / raw_rel, v.raw.principal_block(a, size),
                           true, record_spec);
              io::write_c2(out_dir / truth_rel,
                           v.truth.principal_block(a, size), true,
                           record_spec);
              summary.records.push_back({id, split_of[b], raw_rel, truth_rel,
                                         size, record_spec, seed});
            }
          }
        }
      }
    }
  }

  summary.manifest_path = out_dir / "manifest.tsv";
  summary.base_manifest_path = out_dir / "base_manifest.tsv";
  io::atomic_write(summary.manifest_path, format_manifest(summary.records));
  io::atomic_write(summary.base_manifest_path, format_manifest(base_records));
  return summary;
}

std::string format_manifest(const std::vector<ManifestRecord>& records) {
  std::string out =
      "#sample_id\tsplit\traw_path\ttruth_path\tT\tspec\tseed\n";
  for (const auto& r : records) {
    out += r.sample_id + "\t" + r.split + "\t" + r.raw_path + "\t" +
           r.truth_path + "\t" + std::to_string(r.n_frames) + "\t" +
           r.spec_summary + "\t" + std::to_string(r.seed) + "\n";
  }
  return out;
}

std::vector<ManifestRecord> parse_manifest(const std::string& text) {
  std::vector<ManifestRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 7) {
      throw FormatError(FormatIssue::Malformed,
                        "manifest line " + std::to_string(line_no) +
                            ": expected 7 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    ManifestRecord r;
    r.sample_id = fields[0];
    r.split = fields[1];
    r.raw_path = fields[2];
    r.truth_path = fields[3];
    r.spec_summary = fields[5];
    try {
      r.n_frames = std::stoul(fields[4]);
      r.seed = std::stoull(fields[6]);
    } catch (const std::logic_error&) {
      throw FormatError(FormatIssue::Malformed,
                        "manifest line " + std::to_string(line_no) +
                            ": bad integer field");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw_io("manifest not found: " + path.string());
  return parse_manifest(io::read_file(path));
}

std::vector<RawTruthPair> load_pairs(const fs::path& manifest,
                                     const std::string& split) {
  const fs::path dir = manifest.parent_path();
  std::vector<RawTruthPair> pairs;
  for (const auto& r : read_manifest(manifest)) {
    if (!split.empty() && r.split != split) continue;
    pairs.push_back({r.sample_id, io::read_c2(dir / r.raw_path),
                     io::read_c2(dir / r.truth_path)});
  }
  return pairs;
}

}  // namespace c2dn::synth
