#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "damext/network.hpp"

namespace damext {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'D', 'M', 'X', 'N', 'E', 'T', 'v', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("checkpoint: truncated file");
  return v;
}

}  // namespace detail

/// Versioned binary checkpoint: magic, topology, then parameter arrays in
/// declaration order as little-endian 32-bit floats.
template <class S>
void save_checkpoint(const std::filesystem::path& path, const Network<S>& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_checkpoint: cannot open " + path.string());

  out.write(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
  detail::write_pod<std::uint32_t>(out, detail::kCheckpointVersion);
  detail::write_pod<std::int32_t>(out, net.input_channels);
  detail::write_pod<std::int32_t>(out, net.input_size);
  detail::write_pod<std::int32_t>(out, net.tap);
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const LayerSpec& l : net.layers) {
    detail::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
    detail::write_pod<std::uint8_t>(out, l.has_bias ? 1 : 0);
    detail::write_pod<std::int32_t>(out, l.in_channels);
    detail::write_pod<std::int32_t>(out, l.out_channels);
  }
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.params.entries.size()));
  for (const auto& p : net.params.entries) {
    detail::write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows()));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index j = 0; j < p.value.size(); ++j)
      detail::write_pod<float>(out, static_cast<float>(p.value.data()[j]));
  }
  if (!out) throw DataError("save_checkpoint: write failed for " + path.string());
}

template <class S>
Network<S> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path.string());

  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, sizeof magic) != 0)
    throw DataError("load_checkpoint: not a checkpoint file: " + path.string());
  const auto version = detail::read_pod<std::uint32_t>(in);
  if (version != detail::kCheckpointVersion)
    throw DataError("load_checkpoint: unsupported version " + std::to_string(version));

  const auto input_channels = detail::read_pod<std::int32_t>(in);
  const auto input_size = detail::read_pod<std::int32_t>(in);
  const auto tap = detail::read_pod<std::int32_t>(in);
  const auto layer_count = detail::read_pod<std::uint32_t>(in);
  if (layer_count == 0 || layer_count > 1024)
    throw DataError("load_checkpoint: implausible layer count");

  std::vector<LayerSpec> layers(layer_count);
  for (auto& l : layers) {
    const auto kind = detail::read_pod<std::uint8_t>(in);
    if (kind > static_cast<std::uint8_t>(LayerKind::L2Normalize))
      throw DataError("load_checkpoint: unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.has_bias = detail::read_pod<std::uint8_t>(in) != 0;
    l.in_channels = detail::read_pod<std::int32_t>(in);
    l.out_channels = detail::read_pod<std::int32_t>(in);
  }

  Network<S> net = make_network<S>(std::move(layers), input_channels, tap, input_size);

  const auto param_count = detail::read_pod<std::uint32_t>(in);
  if (param_count != net.params.entries.size())
    throw DataError("load_checkpoint: parameter count does not match topology");
  for (auto& p : net.params.entries) {
    const auto name_len = detail::read_pod<std::uint16_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in || name != p.name)
      throw DataError("load_checkpoint: parameter order mismatch at " + p.name);
    const auto rows = detail::read_pod<std::uint32_t>(in);
    const auto cols = detail::read_pod<std::uint32_t>(in);
    if (rows != static_cast<std::uint32_t>(p.value.rows()) ||
        cols != static_cast<std::uint32_t>(p.value.cols()))
      throw DataError("load_checkpoint: shape mismatch at " + p.name);
    for (Eigen::Index j = 0; j < p.value.size(); ++j)
      p.value.data()[j] = static_cast<S>(detail::read_pod<float>(in));
  }
  return net;
}

}  // namespace damext
