#pragma once

// Binary file formats (all little-endian):
//
//   C2F1:  "C2F1" | u32 T | T*T f64, row-major
//          optional sidecar <path>.meta with key:value lines
//          (frame_interval_s, q_label, provenance)
//   PXS1:  "PXS1" | u32 P | u32 T | P*T f64, row-major (pixel-major)

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "c2dn/c2.hpp"

namespace c2dn::io {

/// Writes to a sibling temp file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

void append_u32(std::string& out, std::uint32_t v);
void append_f64(std::string& out, double v);
std::uint32_t load_u32(const char* p) noexcept;
double load_f64(const char* p) noexcept;

using MetaMap = std::map<std::string, std::string>;

MetaMap parse_meta(std::string_view text);
std::string format_meta(const MetaMap& meta);

std::string encode_c2(const C2Matrix& c2);
C2Matrix decode_c2(std::string_view bytes);

/// Writes the binary file and, when `with_meta`, the .meta sidecar.
void write_c2(const std::filesystem::path& path, const C2Matrix& c2,
              bool with_meta = true, const std::string& provenance = {});
/// Reads the binary file and applies the sidecar, if one exists.
C2Matrix read_c2(const std::filesystem::path& path);

std::string encode_series(const PixelSeries& series);
PixelSeries decode_series(std::string_view bytes);
void write_series(const std::filesystem::path& path, const PixelSeries& s);
PixelSeries read_series(const std::filesystem::path& path);

std::filesystem::path meta_path(const std::filesystem::path& path);

}  // namespace c2dn::io
