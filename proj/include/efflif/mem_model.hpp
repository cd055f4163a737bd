#pragma once

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "efflif/error.hpp"
#include "efflif/network.hpp"
#include "efflif/sharing.hpp"

namespace efflif {

enum class mem_mode { forward, backward_cached, backward_recompute };

inline std::string to_string(mem_mode m) {
  switch (m) {
    case mem_mode::forward: return "forward";
    case mem_mode::backward_cached: return "backward_cached";
    case mem_mode::backward_recompute: return "backward_recompute";
  }
  return "?";
}

/// Backward accounting used in the usual comparison: the baseline caches
/// membranes over all timesteps, shared schemes recompute them.
inline mem_mode reference_mode(const network_spec& spec) {
  for (const auto& b : resolve_blocks(spec))
    if (b.scheme.kind != scheme_kind::baseline) return mem_mode::backward_recompute;
  return mem_mode::backward_cached;
}

struct block_memory {
  block_spec block;
  std::size_t neurons = 0;       // sum over member layers
  std::size_t buffers = 0;       // membrane buffers held by the block
  std::size_t buffer_elems = 0;  // values per buffer
  double reduction = 1.0;        // neurons / (buffers * buffer_elems)
};

/// Analytic byte counts. `*_elems` fields count membrane values so they can
/// be compared with the engine's instrumentation independently of the
/// storage width.
struct mem_report {
  mem_mode mode = mem_mode::forward;
  std::size_t timesteps = 1;
  std::size_t bytes_per_membrane = 4;
  std::uint64_t lif_forward_elems = 0;
  std::uint64_t lif_backward_elems = 0;
  std::uint64_t lif_forward = 0;  // bytes
  std::uint64_t lif_backward = 0;
  std::uint64_t weights = 0;
  std::uint64_t spikes_forward = 0;
  std::uint64_t spikes_backward = 0;
  std::vector<block_memory> blocks;
};

/// LIF state memory of `spec` over `timesteps`. Forward: one buffer per
/// chain of each block. Cached backward keeps every (layer, timestep)
/// membrane; recompute backward keeps the forward buffers only. Weights are
/// fp32, spikes 1 bit per neuron per timestep.
inline mem_report lif_bytes(const network_spec& spec, std::size_t timesteps, mem_mode mode,
                            std::size_t bytes_per_membrane = 4) {
  if (timesteps == 0) throw config_error("timesteps must be at least 1");
  const auto geo = compute_geometry(spec);
  mem_report r;
  r.mode = mode;
  r.timesteps = timesteps;
  r.bytes_per_membrane = bytes_per_membrane;
  std::uint64_t neurons = 0;
  for (const auto& b : resolve_blocks(spec)) {
    const auto& g = geo[b.first];
    const auto layout = make_chain_layout(b.scheme, b.members(), g.out_channels, g.out_length);
    block_memory bm{b, b.members() * g.out_elems(), layout.chains.size(), layout.slot_elems, 1.0};
    bm.reduction = static_cast<double>(bm.neurons) / static_cast<double>(bm.buffers * bm.buffer_elems);
    r.lif_forward_elems += bm.buffers * bm.buffer_elems;
    neurons += bm.neurons;
    r.blocks.push_back(bm);
  }
  for (const auto& g : geo) r.weights += g.weight_count() * 4;
  r.spikes_forward = (neurons + 7) / 8;
  switch (mode) {
    case mem_mode::forward: break;
    case mem_mode::backward_cached: r.lif_backward_elems = timesteps * neurons; break;
    case mem_mode::backward_recompute: r.lif_backward_elems = r.lif_forward_elems; break;
  }
  if (mode != mem_mode::forward) r.spikes_backward = (timesteps * neurons + 7) / 8;
  r.lif_forward = r.lif_forward_elems * bytes_per_membrane;
  r.lif_backward = r.lif_backward_elems * bytes_per_membrane;
  return r;
}

struct efficiency {
  double fwd_ratio;
  double bwd_ratio;
};

inline efficiency efficiency_ratios(const mem_report& base, const mem_report& eff) {
  if (eff.lif_forward == 0 || eff.lif_backward == 0)
    throw numeric_error("efficiency ratio: efficient report has zero LIF memory");
  return {static_cast<double>(base.lif_forward) / static_cast<double>(eff.lif_forward),
          static_cast<double>(base.lif_backward) / static_cast<double>(eff.lif_backward)};
}

inline double megabytes(std::uint64_t bytes) { return static_cast<double>(bytes) / 1e6; }

/// Machine-readable `key=value` lines.
inline std::string to_kv(const mem_report& r, const std::string& prefix = "") {
  std::ostringstream os;
  os << prefix << "mode=" << to_string(r.mode) << "\n"
     << prefix << "timesteps=" << r.timesteps << "\n"
     << prefix << "bytes_per_membrane=" << r.bytes_per_membrane << "\n"
     << prefix << "lif_forward_elems=" << r.lif_forward_elems << "\n"
     << prefix << "lif_backward_elems=" << r.lif_backward_elems << "\n"
     << prefix << "lif_forward_bytes=" << r.lif_forward << "\n"
     << prefix << "lif_backward_bytes=" << r.lif_backward << "\n"
     << prefix << "weights_bytes=" << r.weights << "\n"
     << prefix << "spikes_forward_bytes=" << r.spikes_forward << "\n"
     << prefix << "spikes_backward_bytes=" << r.spikes_backward << "\n";
  for (std::size_t i = 0; i < r.blocks.size(); ++i) {
    const auto& b = r.blocks[i];
    os << prefix << "block." << i << "=layers:" << b.block.first << "-" << b.block.last
       << " scheme:" << label(b.block.scheme) << " buffers:" << b.buffers << " buffer_elems:" << b.buffer_elems
       << " reduction:" << b.reduction << "\n";
  }
  return os.str();
}

/// Side-by-side human table of several reports (e.g. baseline vs shared).
inline std::string to_table(const std::vector<std::pair<std::string, mem_report>>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "scheme" << std::right << std::setw(14) << "LIF fwd (MB)" << std::setw(14)
     << "LIF bwd (MB)" << std::setw(12) << "fwd ratio" << std::setw(12) << "bwd ratio" << std::setw(14)
     << "weights (MB)" << "\n";
  const mem_report* base = rows.empty() ? nullptr : &rows.front().second;
  for (const auto& [name, r] : rows) {
    const auto e = efficiency_ratios(*base, r);
    os << std::left << std::setw(16) << name << std::right << std::fixed << std::setprecision(6) << std::setw(14)
       << megabytes(r.lif_forward) << std::setw(14) << megabytes(r.lif_backward) << std::setprecision(2)
       << std::setw(11) << e.fwd_ratio << "x" << std::setw(11) << e.bwd_ratio << "x" << std::setprecision(4)
       << std::setw(14) << megabytes(r.weights) << "\n";
  }
  return os.str();
}

}  // namespace efflif
