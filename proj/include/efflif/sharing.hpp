#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "efflif/error.hpp"
#include "efflif/lif.hpp"
#include "efflif/tensor.hpp"

namespace efflif {

enum class scheme_kind { baseline, cross_layer, cross_channel, cross_layer_channel };

struct sharing_scheme {
  scheme_kind kind = scheme_kind::baseline;
  std::size_t groups = 1;  // channel groups; only meaningful for the channel variants

  bool shares_layers() const {
    return kind == scheme_kind::cross_layer || kind == scheme_kind::cross_layer_channel;
  }
  bool shares_channels() const {
    return kind == scheme_kind::cross_channel || kind == scheme_kind::cross_layer_channel;
  }
  /// Number of channel groups a member layer is split into.
  std::size_t channel_groups() const { return shares_channels() ? groups : 1; }

  friend bool operator==(const sharing_scheme& a, const sharing_scheme& b) {
    return a.kind == b.kind && a.channel_groups() == b.channel_groups();
  }
};

inline std::string to_string(scheme_kind k) {
  switch (k) {
    case scheme_kind::baseline: return "baseline";
    case scheme_kind::cross_layer: return "layer";
    case scheme_kind::cross_channel: return "channel";
    case scheme_kind::cross_layer_channel: return "layer-channel";
  }
  return "?";
}

inline scheme_kind parse_scheme_kind(const std::string& s) {
  if (s == "baseline") return scheme_kind::baseline;
  if (s == "layer" || s == "L") return scheme_kind::cross_layer;
  if (s == "channel" || s == "C") return scheme_kind::cross_channel;
  if (s == "layer-channel" || s == "L+C") return scheme_kind::cross_layer_channel;
  throw config_error("unknown sharing scheme '" + s + "' (expected baseline, layer, channel, layer-channel)");
}

/// Short label in the usual notation: Baseline, L, C#2, L+C#2.
inline std::string label(const sharing_scheme& s) {
  switch (s.kind) {
    case scheme_kind::baseline: return "Baseline";
    case scheme_kind::cross_layer: return "L";
    case scheme_kind::cross_channel: return "C#" + std::to_string(s.groups);
    case scheme_kind::cross_layer_channel: return "L+C#" + std::to_string(s.groups);
  }
  return "?";
}

/// (member layer, channel group) processed as one unit within a timestep.
struct slot {
  std::size_t member;
  std::size_t group;
};

/// Membrane buffers of a sharing block and the order in which slots consume
/// them. Every chain owns one buffer of `slot_elems` values; a slot reads the
/// state left by its chain predecessor, and the chain's last slot at t hands
/// over to its first slot at t+1.
///
///   baseline             m chains, 1 slot each
///   cross_layer          1 chain,  m slots
///   cross_channel        m chains, n slots each
///   cross_layer_channel  1 chain,  m*n slots
struct chain_layout {
  std::vector<std::vector<slot>> chains;
  std::size_t members = 0;
  std::size_t groups = 1;
  std::size_t slot_elems = 0;

  std::size_t chain_of(std::size_t member, [[maybe_unused]] std::size_t group) const {
    return chains.size() == 1 ? 0 : member;
  }
  std::size_t position(std::size_t member, std::size_t group) const {
    return chains.size() == 1 ? member * groups + group : group;
  }
  std::size_t buffer_elems() const { return chains.size() * slot_elems; }
};

inline chain_layout make_chain_layout(const sharing_scheme& scheme, std::size_t members, std::size_t channels,
                                      std::size_t spatial) {
  if (members == 0) throw config_error("sharing block needs at least one layer");
  const std::size_t n = scheme.channel_groups();
  if (n == 0) throw config_error("channel group count must be at least 1");
  if (channels % n != 0)
    throw dimension_error(std::to_string(channels) + " channels not divisible into " + std::to_string(n) +
                          " groups");
  chain_layout layout;
  layout.members = members;
  layout.groups = n;
  layout.slot_elems = channels / n * spatial;
  if (scheme.shares_layers()) {
    auto& chain = layout.chains.emplace_back();
    for (std::size_t m = 0; m < members; ++m)
      for (std::size_t g = 0; g < n; ++g) chain.push_back({m, g});
  } else {
    for (std::size_t m = 0; m < members; ++m) {
      auto& chain = layout.chains.emplace_back();
      for (std::size_t g = 0; g < n; ++g) chain.push_back({m, g});
    }
  }
  return layout;
}

/// State machine of one sharing block: m consecutive layers with identical
/// activation shape [channels x spatial] served by the buffers in its
/// chain_layout. Members must be stepped in order 0..m-1 every timestep.
template <class R>
class sharing_block {
 public:
  sharing_block(sharing_scheme scheme, std::size_t members, std::size_t channels, std::size_t spatial,
                lif_params params, fire_mode fire = fire_mode::spike)
      : scheme_(scheme),
        layout_(make_chain_layout(scheme, members, channels, spatial)),
        params_(params),
        fire_(fire),
        layer_elems_(channels * spatial) {
    params_.validate();
    u_.assign(layout_.buffer_elems(), R(0));
    o_.assign(layout_.buffer_elems(), R(0));
  }

  /// Zero membranes and carried spikes (start of a sequence).
  void reset() {
    std::fill(u_.begin(), u_.end(), R(0));
    std::fill(o_.begin(), o_.end(), R(0));
    next_member_ = 0;
  }

  /// Runs member layer `member` for the current timestep. `x` is the layer's
  /// full weighted input; groups are consumed in order 0..n-1. The pre-reset
  /// membrane of every neuron is written to `u_out`, the outputs to `o_out`.
  void step_layer(std::size_t member, std::span<const R> x, std::span<R> u_out, std::span<R> o_out) {
    if (member != next_member_)
      throw state_error("sharing block expected member " + std::to_string(next_member_) + ", got " +
                        std::to_string(member));
    if (x.size() != layer_elems_ || u_out.size() != layer_elems_ || o_out.size() != layer_elems_)
      throw dimension_error("sharing block layer expects " + std::to_string(layer_elems_) + " values, got " +
                            std::to_string(x.size()));
    const std::size_t s = layout_.slot_elems;
    for (std::size_t g = 0; g < layout_.groups; ++g) {
      auto cu = carry_u(layout_.chain_of(member, g));
      auto co = carry_o(layout_.chain_of(member, g));
      kernels::lif_update<R>(cu, co, x.subspan(g * s, s), params_, fire_, cu, co);
      std::copy(cu.begin(), cu.end(), u_out.begin() + static_cast<std::ptrdiff_t>(g * s));
      std::copy(co.begin(), co.end(), o_out.begin() + static_cast<std::ptrdiff_t>(g * s));
    }
    next_member_ = (member + 1) % layout_.members;
  }

  /// One timestep over all members. `input(member, prev_out)` returns the
  /// member's weighted input given the previous member's outputs (empty
  /// span for member 0). Returns the outputs of every member.
  std::vector<std::vector<R>> step_timestep(
      const std::function<std::vector<R>(std::size_t, std::span<const R>)>& input) {
    std::vector<std::vector<R>> outs;
    std::vector<R> u(layer_elems_);
    for (std::size_t m = 0; m < layout_.members; ++m) {
      const std::span<const R> prev = m ? std::span<const R>(outs.back()) : std::span<const R>{};
      const auto x = input(m, prev);
      std::vector<R> o(layer_elems_);
      step_layer(m, x, u, o);
      outs.push_back(std::move(o));
    }
    return outs;
  }

  std::span<R> carry_u(std::size_t chain) {
    return std::span<R>(u_).subspan(chain * layout_.slot_elems, layout_.slot_elems);
  }
  std::span<R> carry_o(std::size_t chain) {
    return std::span<R>(o_).subspan(chain * layout_.slot_elems, layout_.slot_elems);
  }
  std::span<const R> carry_u(std::size_t chain) const {
    return std::span<const R>(u_).subspan(chain * layout_.slot_elems, layout_.slot_elems);
  }

  const sharing_scheme& scheme() const noexcept { return scheme_; }
  const chain_layout& layout() const noexcept { return layout_; }
  const lif_params& params() const noexcept { return params_; }
  std::size_t layer_elems() const noexcept { return layer_elems_; }
  /// Number of membrane values this block keeps alive.
  std::size_t state_elems() const noexcept { return u_.size(); }
  std::size_t buffer_count() const noexcept { return layout_.chains.size(); }

 private:
  sharing_scheme scheme_;
  chain_layout layout_;
  lif_params params_;
  fire_mode fire_;
  std::size_t layer_elems_;
  std::size_t next_member_ = 0;
  std::vector<R> u_;
  std::vector<R> o_;
};

/// Cross-channel sharing for a single layer with persistent state: splits
/// x into n groups, runs them sequentially, concatenates the spikes.
template <class R>
bit_tensor forward_layer_crosschannel(sharing_block<R>& state, const basic_tensor<R>& x) {
  if (state.layout().members != 1)
    throw config_error("forward_layer_crosschannel needs a single-layer block");
  std::vector<R> u(x.numel()), o(x.numel());
  state.step_layer(0, x.data(), u, o);
  return bit_tensor::pack(x.shape(), o);
}

}  // namespace efflif
