#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "efflif/error.hpp"
#include "efflif/network.hpp"
#include "efflif/spec_io.hpp"

namespace efflif {

// Layout, all integers and floats little-endian:
//   "EFFLIFCK"  u32 version  u64 spec_hash  u32 n_tensors
//   per tensor: u32 rank, u64 dims[rank], f32 data[numel]
inline constexpr std::array<char, 8> checkpoint_magic{'E', 'F', 'F', 'L', 'I', 'F', 'C', 'K'};
inline constexpr std::uint32_t checkpoint_version = 1;

namespace detail {
template <class U>
void put_le(std::ostream& out, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <class U>
U get_le(std::istream& in) {
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof b)) throw data_error("checkpoint truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}
}  // namespace detail

inline void write_checkpoint(std::ostream& out, const network_spec& spec, const model& m) {
  check_model(spec, m);
  out.write(checkpoint_magic.data(), checkpoint_magic.size());
  detail::put_le<std::uint32_t>(out, checkpoint_version);
  detail::put_le<std::uint64_t>(out, spec_hash(spec));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.weights.size()));
  for (const auto& w : m.weights) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.rank()));
    for (auto d : w.shape()) detail::put_le<std::uint64_t>(out, d);
    for (float v : w.data()) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw data_error("checkpoint write failed");
}

/// Reads weights saved for `spec`; a checkpoint written for a different
/// spec is a config error.
inline model read_checkpoint(std::istream& in, const network_spec& spec) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != checkpoint_magic) throw data_error("not a checkpoint file");
  const auto version = detail::get_le<std::uint32_t>(in);
  if (version != checkpoint_version)
    throw data_error("unsupported checkpoint version " + std::to_string(version));
  const auto hash = detail::get_le<std::uint64_t>(in);
  if (hash != spec_hash(spec)) throw config_error("checkpoint was written for a different network spec");
  const auto n = detail::get_le<std::uint32_t>(in);
  model m;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto rank = detail::get_le<std::uint32_t>(in);
    if (rank == 0 || rank > 8) throw data_error("bad tensor rank in checkpoint");
    shape_t shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(detail::get_le<std::uint64_t>(in));
    std::vector<float> data(shape_numel(shape));
    for (auto& v : data) v = std::bit_cast<float>(detail::get_le<std::uint32_t>(in));
    m.weights.emplace_back(std::move(shape), std::move(data));
  }
  check_model(spec, m);
  return m;
}

inline void save_checkpoint(const std::string& path, const network_spec& spec, const model& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot write '" + path + "'");
  write_checkpoint(f, spec, m);
}

inline model load_checkpoint(const std::string& path, const network_spec& spec) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open '" + path + "'");
  return read_checkpoint(f, spec);
}

}  // namespace efflif
