#include <charconv>
#include <cstdio>
#include <sstream>

#include "c2dn/error.hpp"
#include "c2dn/fcdae.hpp"
#include "c2dn/io.hpp"

namespace c2dn::dae {
namespace {

constexpr std::string_view kMagic = "FCDA";

// Every stored scalar, learnable or not, in blob order.
template <typename ModelT, typename Fn>
void for_each_stored_block(ModelT& m, Fn&& fn) {
  for (std::size_t i = 0; i < m.encoder_conv.size(); ++i) {
    fn(m.encoder_conv[i].weights.data());
    fn(std::span(m.encoder_conv[i].bias));
    auto& bn = m.encoder_bn[i];
    fn(std::span(bn.gamma));
    fn(std::span(bn.beta_shift));
    fn(std::span(bn.running_mean));
    fn(std::span(bn.running_var));
  }
  for (std::size_t i = 0; i < m.decoder_conv.size(); ++i) {
    fn(m.decoder_conv[i].weights.data());
    fn(std::span(m.decoder_conv[i].bias));
    if (i < m.decoder_bn.size()) {
      auto& bn = m.decoder_bn[i];
      fn(std::span(bn.gamma));
      fn(std::span(bn.beta_shift));
      fn(std::span(bn.running_mean));
      fn(std::span(bn.running_var));
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw FormatError(FormatIssue::Malformed,
                      "checkpoint header: bad integer for '" + key + "'");
  }
  return v;
}

const std::string& require(const io::MetaMap& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) {
    throw FormatError(FormatIssue::Malformed,
                      "checkpoint header: missing '" + key + "'");
  }
  return it->second;
}

}  // namespace

std::string encode_checkpoint(const Model& model) {
  std::string channels;
  for (std::size_t i = 0; i < model.arch.encoder_channels.size(); ++i) {
    if (i) channels += ",";
    channels += std::to_string(model.arch.encoder_channels[i]);
  }
  io::MetaMap header;
  header["channels"] = channels;
  header["kernel_size"] = std::to_string(model.arch.kernel_size);
  header["input_channels"] = std::to_string(model.arch.input_channels);
  header["seed"] = std::to_string(model.seed);
  header["epochs"] = std::to_string(model.meta.epochs_run);
  header["final_loss"] = format_double(model.meta.final_loss);
  const std::string text = io::format_meta(header);

  std::string out;
  out.append(kMagic);
  io::append_u32(out, kCheckpointVersion);
  io::append_u32(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  for_each_stored_block(model, [&](auto s) {
    for (double v : s) io::append_f64(out, v);
  });
  return out;
}

Model decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != kMagic) {
    throw FormatError(FormatIssue::BadMagic, "checkpoint: bad magic");
  }
  if (bytes.size() < 12) {
    throw FormatError(FormatIssue::Truncated, "checkpoint: truncated header");
  }
  const std::uint32_t version = io::load_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw FormatError(FormatIssue::VersionMismatch,
                      "checkpoint: version mismatch (file " +
                          std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t header_len = io::load_u32(bytes.data() + 8);
  if (bytes.size() < 12 + header_len) {
    throw FormatError(FormatIssue::Truncated, "checkpoint: truncated header");
  }
  const io::MetaMap header = io::parse_meta(bytes.substr(12, header_len));

  Architecture arch;
  arch.encoder_channels.clear();
  {
    std::istringstream in(require(header, "channels"));
    std::string tok;
    while (std::getline(in, tok, ',')) {
      arch.encoder_channels.push_back(parse_uint("channels", tok));
    }
  }
  arch.kernel_size = parse_uint("kernel_size", require(header, "kernel_size"));
  if (auto it = header.find("input_channels"); it != header.end()) {
    arch.input_channels = parse_uint("input_channels", it->second);
  }
  try {
    arch.validate();
  } catch (const Error& e) {
    throw FormatError(FormatIssue::Malformed,
                      std::string("checkpoint: invalid architecture: ") +
                          e.what());
  }

  Model model = build_model(arch, parse_uint("seed", require(header, "seed")));
  model.meta.epochs_run = parse_uint("epochs", require(header, "epochs"));
  try {
    model.meta.final_loss = std::stod(require(header, "final_loss"));
  } catch (const std::logic_error&) {
    throw FormatError(FormatIssue::Malformed,
                      "checkpoint header: bad value for 'final_loss'");
  }

  std::size_t stored = 0;
  for_each_stored_block(model, [&](auto s) { stored += s.size(); });
  const std::size_t blob_offset = 12 + header_len;
  const std::size_t need = blob_offset + stored * 8;
  if (bytes.size() < need) {
    throw FormatError(FormatIssue::Truncated,
                      "checkpoint: truncated parameter blob (" +
                          std::to_string((bytes.size() - blob_offset) / 8) +
                          " of " + std::to_string(stored) + " values)");
  }
  if (bytes.size() > need) {
    throw FormatError(FormatIssue::Malformed, "checkpoint: trailing bytes");
  }
  std::size_t pos = blob_offset;
  for_each_stored_block(model, [&](auto s) {
    for (double& v : s) {
      v = io::load_f64(bytes.data() + pos);
      pos += 8;
    }
  });
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  io::atomic_write(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace c2dn::dae
