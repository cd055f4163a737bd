#pragma once

#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>

#include "efflif/error.hpp"
#include "efflif/network.hpp"
#include "efflif/sharing.hpp"

namespace efflif {

// Counting model of a PE-array accelerator that keeps membranes in DRAM
// between timesteps. Not cycle accurate; no area or energy.

struct hw_config {
  std::size_t n_pe = 128;
  std::size_t lif_share_ratio = 1;  // n of C#n
  std::size_t batch = 1;
};

/// Membrane write-backs per batch: each chain buffer of each block is written
/// once per timestep per sample. Baseline blocks write m times per timestep,
/// cross-layer blocks once.
inline std::uint64_t dram_membrane_writes(const network_spec& spec, std::size_t timesteps, std::size_t batch) {
  const auto geo = compute_geometry(spec);
  std::uint64_t writes = 0;
  for (const auto& b : resolve_blocks(spec)) {
    const auto layout = make_chain_layout(b.scheme, b.members(), geo[b.first].out_channels, geo[b.first].out_length);
    writes += layout.chains.size() * timesteps * batch;
  }
  return writes;
}

inline std::uint64_t dram_membrane_writes(const network_spec& spec, std::size_t timesteps,
                                          const sharing_scheme& scheme, std::size_t batch) {
  return dram_membrane_writes(with_scheme(spec, scheme), timesteps, batch);
}

inline std::size_t lif_unit_count(const hw_config& hw) {
  if (hw.lif_share_ratio == 0 || hw.n_pe % hw.lif_share_ratio != 0)
    throw dimension_error(std::to_string(hw.n_pe) + " PEs not divisible by share ratio " +
                          std::to_string(hw.lif_share_ratio));
  return hw.n_pe / hw.lif_share_ratio;
}

/// Cycles to emit one timestep's spikes from the PE array: shared LIF units
/// serve their groups one after another.
inline std::size_t spike_gen_cycles(const hw_config& hw) {
  if (hw.lif_share_ratio == 0) throw config_error("share ratio must be at least 1");
  return hw.lif_share_ratio;
}

struct dram_traffic {
  std::uint64_t weight_bytes = 0;    // fp32 weights, fetched once per batch
  std::uint64_t membrane_bytes = 0;  // membrane write-backs plus read-backs
  std::uint64_t total() const { return weight_bytes + membrane_bytes; }
};

/// Traffic for one batch. Weight traffic is a per-inference constant
/// amortized over the batch, so the membrane share grows with batch size.
inline dram_traffic batch_dram_traffic(const network_spec& spec, std::size_t timesteps, std::size_t batch,
                                       std::size_t bytes_per_membrane = 4) {
  const auto geo = compute_geometry(spec);
  dram_traffic d;
  for (const auto& g : geo) d.weight_bytes += g.weight_count() * 4;
  for (const auto& b : resolve_blocks(spec)) {
    const auto layout = make_chain_layout(b.scheme, b.members(), geo[b.first].out_channels, geo[b.first].out_length);
    d.membrane_bytes += 2ull * layout.chains.size() * timesteps * batch * layout.slot_elems * bytes_per_membrane;
  }
  return d;
}

struct hw_report {
  hw_config hw;
  std::size_t timesteps = 1;
  std::size_t lif_units = 0;
  std::size_t spike_cycles = 0;
  std::uint64_t membrane_writes = 0;
  dram_traffic traffic;
};

inline hw_report make_hw_report(const network_spec& spec, std::size_t timesteps, const hw_config& hw) {
  return {hw, timesteps, lif_unit_count(hw), spike_gen_cycles(hw), dram_membrane_writes(spec, timesteps, hw.batch),
          batch_dram_traffic(spec, timesteps, hw.batch)};
}

inline std::string to_kv(const hw_report& r, const std::string& prefix = "") {
  std::ostringstream os;
  os << prefix << "n_pe=" << r.hw.n_pe << "\n"
     << prefix << "lif_share_ratio=" << r.hw.lif_share_ratio << "\n"
     << prefix << "batch=" << r.hw.batch << "\n"
     << prefix << "timesteps=" << r.timesteps << "\n"
     << prefix << "lif_units=" << r.lif_units << "\n"
     << prefix << "spike_gen_cycles=" << r.spike_cycles << "\n"
     << prefix << "dram_membrane_writes=" << r.membrane_writes << "\n"
     << prefix << "dram_weight_bytes=" << r.traffic.weight_bytes << "\n"
     << prefix << "dram_membrane_bytes=" << r.traffic.membrane_bytes << "\n"
     << prefix << "dram_total_bytes=" << r.traffic.total() << "\n";
  return os.str();
}

}  // namespace efflif
