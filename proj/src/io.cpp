#include "c2dn/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "c2dn/error.hpp"

namespace c2dn::io {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kC2Magic = "C2F1";
constexpr std::string_view kSeriesMagic = "PXS1";

template <typename U>
void append_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
}

template <typename U>
U load_le(const char* p) noexcept {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void append_u32(std::string& out, std::uint32_t v) { append_le(out, v); }
void append_f64(std::string& out, double v) {
  append_le(out, std::bit_cast<std::uint64_t>(v));
}
std::uint32_t load_u32(const char* p) noexcept {
  return load_le<std::uint32_t>(p);
}
double load_f64(const char* p) noexcept {
  return std::bit_cast<double>(load_le<std::uint64_t>(p));
}

void atomic_write(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw_io("cannot create directory " + path.parent_path().string() +
               ": " + ec.message());
    }
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_io("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw_io("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw_io("cannot rename into " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

MetaMap parse_meta(std::string_view text) {
  MetaMap meta;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto colon = t.find(':');
    if (colon == std::string::npos) {
      throw FormatError(FormatIssue::Malformed,
                        "metadata line without ':': " + t);
    }
    meta[trim(std::string_view(t).substr(0, colon))] =
        trim(std::string_view(t).substr(colon + 1));
  }
  return meta;
}

std::string format_meta(const MetaMap& meta) {
  std::string out;
  for (const auto& [k, v] : meta) out += k + ":" + v + "\n";
  return out;
}

fs::path meta_path(const fs::path& path) {
  fs::path m = path;
  m += ".meta";
  return m;
}

std::string encode_c2(const C2Matrix& c2) {
  std::string out;
  out.reserve(8 + c2.values().size() * 8);
  out.append(kC2Magic);
  append_u32(out, static_cast<std::uint32_t>(c2.size()));
  for (double v : c2.values()) append_f64(out, v);
  return out;
}

C2Matrix decode_c2(std::string_view bytes) {
  if (bytes.size() < 8) {
    throw FormatError(FormatIssue::Truncated, "C2F1: file shorter than header");
  }
  if (bytes.substr(0, 4) != kC2Magic) {
    throw FormatError(FormatIssue::BadMagic, "C2F1: bad magic");
  }
  const std::uint64_t n = load_u32(bytes.data() + 4);
  const std::uint64_t need = 8 + n * n * 8;
  if (bytes.size() < need) {
    throw FormatError(FormatIssue::Truncated,
                      "C2F1: truncated, expected " + std::to_string(need) +
                          " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes.size() > need) {
    throw FormatError(FormatIssue::Malformed, "C2F1: trailing bytes");
  }
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = load_f64(bytes.data() + 8 + 8 * i);
  }
  return C2Matrix(n, std::move(values));
}

void write_c2(const fs::path& path, const C2Matrix& c2, bool with_meta,
              const std::string& provenance) {
  atomic_write(path, encode_c2(c2));
  if (!with_meta) return;
  MetaMap meta;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", c2.frame_interval_s());
  meta["frame_interval_s"] = buf;
  meta["q_label"] = c2.q_label();
  if (!provenance.empty()) meta["provenance"] = provenance;
  atomic_write(meta_path(path), format_meta(meta));
}

C2Matrix read_c2(const fs::path& path) {
  C2Matrix c2 = decode_c2(read_file(path));
  const fs::path mp = meta_path(path);
  if (fs::exists(mp)) {
    const MetaMap meta = parse_meta(read_file(mp));
    if (auto it = meta.find("frame_interval_s"); it != meta.end()) {
      try {
        c2.set_frame_interval_s(std::stod(it->second));
      } catch (const std::exception&) {
        throw FormatError(FormatIssue::Malformed,
                          "bad frame_interval_s in " + mp.string());
      }
    }
    if (auto it = meta.find("q_label"); it != meta.end()) {
      c2.set_q_label(it->second);
    }
  }
  return c2;
}

std::string encode_series(const PixelSeries& s) {
  std::string out;
  out.reserve(12 + s.intensities.size() * 8);
  out.append(kSeriesMagic);
  append_u32(out, static_cast<std::uint32_t>(s.n_pixels));
  append_u32(out, static_cast<std::uint32_t>(s.n_frames));
  for (double v : s.intensities) append_f64(out, v);
  return out;
}

PixelSeries decode_series(std::string_view bytes) {
  if (bytes.size() < 12) {
    throw FormatError(FormatIssue::Truncated, "PXS1: file shorter than header");
  }
  if (bytes.substr(0, 4) != kSeriesMagic) {
    throw FormatError(FormatIssue::BadMagic, "PXS1: bad magic");
  }
  const std::uint64_t p = load_u32(bytes.data() + 4);
  const std::uint64_t t = load_u32(bytes.data() + 8);
  const std::uint64_t need = 12 + p * t * 8;
  if (bytes.size() < need) {
    throw FormatError(FormatIssue::Truncated, "PXS1: truncated");
  }
  if (bytes.size() > need) {
    throw FormatError(FormatIssue::Malformed, "PXS1: trailing bytes");
  }
  PixelSeries s(p, t);
  for (std::size_t i = 0; i < s.intensities.size(); ++i) {
    s.intensities[i] = load_f64(bytes.data() + 12 + 8 * i);
  }
  return s;
}

void write_series(const fs::path& path, const PixelSeries& s) {
  atomic_write(path, encode_series(s));
}

PixelSeries read_series(const fs::path& path) {
  return decode_series(read_file(path));
}

}  // namespace c2dn::io
