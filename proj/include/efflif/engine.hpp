#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "efflif/error.hpp"
#include "efflif/lif.hpp"
#include "efflif/memsave.hpp"
#include "efflif/network.hpp"
#include "efflif/sharing.hpp"
#include "efflif/tensor.hpp"

namespace efflif {

enum class backward_mode {
  none,       // inference: no record beyond the current timestep
  cached,     // keep every membrane on the tape
  recompute,  // keep only the live block buffers; rebuild membranes in reverse
};

inline std::string to_string(backward_mode m) {
  switch (m) {
    case backward_mode::none: return "none";
    case backward_mode::cached: return "cached";
    case backward_mode::recompute: return "recompute";
  }
  return "?";
}

inline backward_mode parse_backward_mode(const std::string& s) {
  if (s == "cached") return backward_mode::cached;
  if (s == "recompute") return backward_mode::recompute;
  if (s == "none") return backward_mode::none;
  throw config_error("unknown backward mode '" + s + "' (expected cached or recompute)");
}

struct engine_options {
  fire_mode fire = fire_mode::spike;
  backward_mode backward = backward_mode::cached;
  /// Drop the reset path (do/du through the carried spike) from the
  /// temporal gradient.
  bool detach_reset = false;
};

/// Membrane storage actually held by the engine, in membrane values.
struct memory_counters {
  std::size_t live_membrane_elems = 0;        // block buffers used by the forward sweep
  std::size_t tape_membrane_elems = 0;        // membranes retained for backward
  std::size_t tape_membrane_snapshots = 0;    // retained (layer, timestep) membranes
  std::size_t backward_membrane_elems = 0;    // membrane storage read by the last backward
  std::size_t backward_membrane_buffers = 0;  // distinct membrane buffers read by the last backward
  std::size_t spike_tape_bits = 0;
};

template <class R>
struct gradient_set {
  std::vector<basic_tensor<R>> weights;
};

template <class R>
struct loss_result {
  R loss;
  std::vector<R> dlogits;
};

/// Softmax cross-entropy of one sample; returns the loss and dL/dlogits.
template <class R>
loss_result<R> softmax_cross_entropy(std::span<const R> logits, std::size_t label) {
  if (label >= logits.size()) throw data_error("label " + std::to_string(label) + " out of range");
  const R mx = *std::max_element(logits.begin(), logits.end());
  R z = 0;
  std::vector<R> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
  for (auto& v : p) v /= z;
  const R loss = -(logits[label] - mx - std::log(z));
  p[label] -= R(1);
  return {loss, std::move(p)};
}

/// Forward simulation and backpropagation through time for one sample.
///
/// Forward visits timesteps, then layers, then channel groups in order; each
/// slot consumes the state its chain predecessor left in the block buffer.
/// Backward visits the same slots in exactly reverse order, so one gradient
/// carry per chain holds dL/du of the chain successor:
///
///   dL/du = f'(u - theta) * dL/do + dL/du_succ * lambda * (1 - theta * f'(u - theta))
///
/// (soft reset). For cross-layer blocks the successor of an intermediate
/// layer is the next layer, and of the last layer the first layer at t+1;
/// for channel groups it is the next group, and of group N the first group
/// at t+1. Baseline chains have one slot, giving the usual temporal term.
///
/// In recompute mode the membranes are not stored: the sweep starts from the
/// final block buffers and inverts each update in place after use.
template <class R = double>
class network_engine {
 public:
  explicit network_engine(network_spec spec, engine_options opts = {})
      : spec_(std::move(spec)), opts_(opts) {
    validate(spec_);
    if (opts_.backward == backward_mode::recompute) check_reversible(spec_.lif);
    geo_ = compute_geometry(spec_);
    block_specs_ = resolve_blocks(spec_);
    const std::size_t n = spec_.spiking_layers();
    block_of_.resize(n);
    member_of_.resize(n);
    for (std::size_t b = 0; b < block_specs_.size(); ++b) {
      const auto& bs = block_specs_[b];
      const auto& g = geo_[bs.first];
      blocks_.emplace_back(bs.scheme, bs.members(), g.out_channels, g.out_length, spec_.lif, opts_.fire);
      for (std::size_t l = bs.first; l <= bs.last; ++l) {
        block_of_[l] = b;
        member_of_[l] = l - bs.first;
      }
    }
    std::size_t widest = geo_.front().in_elems();
    for (const auto& g : geo_) widest = std::max({widest, g.in_elems(), g.out_elems()});
    act_.resize(n);
    for (std::size_t l = 0; l < n; ++l) act_[l].assign(geo_[l].out_elems(), R(0));
    x_.assign(widest, R(0));
    u_.assign(widest, R(0));
    scratch_a_.assign(widest, R(0));
    scratch_b_.assign(widest, R(0));
    scratch_c_.assign(widest, R(0));
    g_out_.assign(widest, R(0));
    g_in_.assign(widest, R(0));
    spike_counts_.assign(n, 0);
    for (const auto& blk : blocks_) counters_.live_membrane_elems += blk.state_elems();
  }

  /// Simulates all timesteps on one input [channels x length] and returns the
  /// accumulated readout (class logits).
  std::vector<R> forward(const model& m, std::span<const float> input) {
    check_model(spec_, m);
    if (input.size() != spec_.input_channels * spec_.input_length)
      throw dimension_error("input has " + std::to_string(input.size()) + " values, spec expects " +
                            std::to_string(spec_.input_channels * spec_.input_length));
    const std::size_t L = spec_.spiking_layers();
    const std::size_t T = spec_.timesteps;
    for (auto& b : blocks_) b.reset();
    input_.assign(input.begin(), input.end());
    std::fill(spike_counts_.begin(), spike_counts_.end(), R(0));
    const bool keep_tape = opts_.backward != backward_mode::none;
    const bool keep_membranes = opts_.backward == backward_mode::cached;
    spike_tape_.clear();
    relaxed_tape_.clear();
    if (keep_membranes)
      membrane_tape_.resize(L * T);
    else
      membrane_tape_.clear();

    const auto& ro = geo_.back();
    std::vector<R> logits(ro.out_channels, R(0));
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t l = 0; l < L; ++l) {
        auto x = std::span<R>(x_).first(geo_[l].out_elems());
        auto u = std::span<R>(u_).first(geo_[l].out_elems());
        if (l == 0)
          layer_forward<R, float>(geo_[0], m.weights[0], input_, x);
        else
          layer_forward<R, R>(geo_[l], m.weights[l], act_[l - 1], x);
        blocks_[block_of_[l]].step_layer(member_of_[l], x, u, act_[l]);
        for (auto o : act_[l]) spike_counts_[l] += o;
        if (keep_membranes) membrane_tape_[t * L + l].assign(u.begin(), u.end());
        if (keep_tape) {
          if (opts_.fire == fire_mode::spike)
            spike_tape_.push_back(bit_tensor::pack(geo_[l].out_shape(), std::span<const R>(act_[l])));
          else
            relaxed_tape_.push_back(act_[l]);
        }
      }
      auto y = std::span<R>(x_).first(ro.out_elems());
      layer_forward<R, R>(ro, m.weights.back(), act_[L - 1], y);
      for (std::size_t c = 0; c < ro.out_channels; ++c) {
        R s = 0;
        for (std::size_t p = 0; p < ro.out_length; ++p) s += y[c * ro.out_length + p];
        logits[c] += s / static_cast<R>(ro.out_length);
      }
    }
    have_tape_ = keep_tape;

    counters_.tape_membrane_snapshots = keep_membranes ? membrane_tape_.size() : 0;
    counters_.tape_membrane_elems = 0;
    for (const auto& s : membrane_tape_) counters_.tape_membrane_elems += s.size();
    counters_.spike_tape_bits = 0;
    if (keep_tape)
      for (std::size_t l = 0; l < L; ++l) counters_.spike_tape_bits += T * geo_[l].out_elems();
    return logits;
  }

  /// Gradient of the loss w.r.t. every weight tensor, given dL/dlogits of
  /// the last forward pass. Consumes the tape; in recompute mode it also
  /// rewinds the block buffers to their initial state.
  gradient_set<R> backward(const model& m, std::span<const R> dlogits) {
    if (!have_tape_) throw state_error("backward needs a forward pass recorded with a backward mode");
    check_model(spec_, m);
    const auto& ro = geo_.back();
    if (dlogits.size() != ro.out_channels)
      throw dimension_error("dlogits has " + std::to_string(dlogits.size()) + " values, expected " +
                            std::to_string(ro.out_channels));
    const bool recompute = opts_.backward == backward_mode::recompute;
    const std::size_t L = spec_.spiking_layers();
    const std::size_t T = spec_.timesteps;
    const R lambda = static_cast<R>(spec_.lif.lambda);
    const R theta = static_cast<R>(spec_.lif.theta);
    const bool soft = spec_.lif.reset == reset_mode::soft;

    gradient_set<R> grads;
    for (const auto& g : geo_) grads.weights.emplace_back(g.weight_shape());

    std::vector<std::vector<R>> g_succ(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) g_succ[b].assign(blocks_[b].state_elems(), R(0));

    counters_.backward_membrane_elems = 0;
    counters_.backward_membrane_buffers = 0;
    if (recompute) {
      for (const auto& blk : blocks_) {
        counters_.backward_membrane_elems += blk.state_elems();
        counters_.backward_membrane_buffers += blk.buffer_count();
      }
    } else {
      for (const auto& s : membrane_tape_) counters_.backward_membrane_elems += s.size();
      counters_.backward_membrane_buffers = membrane_tape_.size();
    }

    std::vector<R> g_y(ro.out_elems());
    for (std::size_t c = 0; c < ro.out_channels; ++c)
      for (std::size_t p = 0; p < ro.out_length; ++p)
        g_y[c * ro.out_length + p] = dlogits[c] / static_cast<R>(ro.out_length);

    auto o_cur = std::span<R>(scratch_a_);
    auto a_in = std::span<R>(scratch_b_);
    auto o_pred = std::span<R>(scratch_c_);

    for (std::size_t t = T; t-- > 0;) {
      // readout: dL/do of the last spiking layer
      {
        auto a = a_in.first(geo_[L - 1].out_elems());
        outputs_into(L - 1, t, a);
        layer_weight_grad<R, R>(ro, g_y, std::span<const R>(a), grads.weights.back().data());
        layer_backward_input<R>(ro, m.weights.back(), g_y, std::span<R>(g_out_).first(ro.in_elems()));
      }
      for (std::size_t l = L; l-- > 0;) {
        const auto& geo = geo_[l];
        const std::size_t ne = geo.out_elems();
        auto& blk = blocks_[block_of_[l]];
        const auto& layout = blk.layout();
        const std::size_t member = member_of_[l];
        const std::size_t s = layout.slot_elems;
        auto o = o_cur.first(ne);
        outputs_into(l, t, o);
        auto g_o = std::span<const R>(g_out_).first(ne);
        auto g_x = std::span<R>(g_in_).first(ne);
        auto x = std::span<R>(x_).first(ne);
        if (recompute) {
          if (l == 0) {
            layer_forward<R, float>(geo, m.weights[0], input_, x);
          } else {
            auto a = a_in.first(geo_[l - 1].out_elems());
            outputs_into(l - 1, t, a);
            layer_forward<R, R>(geo, m.weights[l], std::span<const R>(a), x);
          }
        }
        for (std::size_t g = layout.groups; g-- > 0;) {
          const std::size_t chain = layout.chain_of(member, g);
          const std::size_t pos = layout.position(member, g);
          const std::size_t off = g * s;
          auto gs = std::span<R>(g_succ[block_of_[l]]).subspan(chain * s, s);
          std::span<R> u = recompute ? blk.carry_u(chain) : std::span<R>(membrane_tape_[t * L + l]).subspan(off, s);
          for (std::size_t k = 0; k < s; ++k) {
            const R fp = arctan_surrogate::derivative(u[k] - theta);
            const R gn = gs[k];
            R gu;
            if (soft)
              gu = opts_.detach_reset ? g_o[off + k] * fp + gn * lambda
                                      : g_o[off + k] * fp + gn * lambda * (R(1) - theta * fp);
            else
              gu = opts_.detach_reset ? g_o[off + k] * fp + gn * lambda * (R(1) - o[off + k])
                                      : fp * (g_o[off + k] - gn * lambda * u[k]) + gn * lambda * (R(1) - o[off + k]);
            g_x[off + k] = gu;
            gs[k] = gu;
          }
          if (recompute && !(pos == 0 && t == 0)) {
            const auto& chain_slots = layout.chains[chain];
            const slot pred = pos > 0 ? chain_slots[pos - 1] : chain_slots.back();
            const std::size_t pred_t = pos > 0 ? t : t - 1;
            const std::size_t pred_layer = block_specs_[block_of_[l]].first + pred.member;
            auto op = o_pred.first(s);
            outputs_into(pred_layer, pred_t, op, pred.group * s);
            kernels::lif_reverse<R>(u, std::span<const R>(x).subspan(off, s), std::span<const R>(op), spec_.lif);
          }
        }
        if (l == 0) {
          layer_weight_grad<R, float>(geo, std::span<const R>(g_x), std::span<const float>(input_),
                                      grads.weights[0].data());
        } else {
          auto a = a_in.first(geo_[l - 1].out_elems());
          outputs_into(l - 1, t, a);
          layer_weight_grad<R, R>(geo, std::span<const R>(g_x), std::span<const R>(a), grads.weights[l].data());
          layer_backward_input<R>(geo, m.weights[l], std::span<const R>(g_x), std::span<R>(g_out_).first(geo.in_elems()));
        }
      }
    }
    have_tape_ = false;
    return grads;
  }

  /// Outputs (spikes, or relaxed activations) of spiking layer l at t.
  std::vector<R> outputs(std::size_t l, std::size_t t) const {
    std::vector<R> out(geo_.at(l).out_elems());
    outputs_into(l, t, out);
    return out;
  }

  /// Pre-reset membrane of layer l at t; cached mode only.
  std::vector<R> membrane(std::size_t l, std::size_t t) const {
    if (membrane_tape_.empty()) throw state_error("membranes are only retained in cached mode");
    return membrane_tape_.at(t * spec_.spiking_layers() + l);
  }

  /// Sum of outputs per spiking layer over the last forward pass.
  const std::vector<R>& spike_counts() const noexcept { return spike_counts_; }
  const memory_counters& counters() const noexcept { return counters_; }
  const network_spec& spec() const noexcept { return spec_; }
  const engine_options& options() const noexcept { return opts_; }
  const std::vector<layer_geometry>& geometry() const noexcept { return geo_; }
  const std::vector<block_spec>& blocks() const noexcept { return block_specs_; }
  const sharing_block<R>& block(std::size_t b) const { return blocks_.at(b); }

 private:
  void outputs_into(std::size_t l, std::size_t t, std::span<R> out, std::size_t offset = 0) const {
    const std::size_t idx = t * spec_.spiking_layers() + l;
    if (opts_.fire == fire_mode::spike) {
      if (idx >= spike_tape_.size()) throw state_error("spike tape has no entry for this layer/timestep");
      spike_tape_[idx].unpack_into(out, offset);
    } else {
      if (idx >= relaxed_tape_.size()) throw state_error("activation tape has no entry for this layer/timestep");
      std::copy_n(relaxed_tape_[idx].begin() + static_cast<std::ptrdiff_t>(offset), out.size(), out.begin());
    }
  }

  network_spec spec_;
  engine_options opts_;
  std::vector<layer_geometry> geo_;
  std::vector<block_spec> block_specs_;
  std::vector<sharing_block<R>> blocks_;
  std::vector<std::size_t> block_of_, member_of_;

  std::vector<float> input_;
  std::vector<bit_tensor> spike_tape_;
  std::vector<std::vector<R>> relaxed_tape_;
  std::vector<std::vector<R>> membrane_tape_;
  bool have_tape_ = false;

  std::vector<std::vector<R>> act_;
  std::vector<R> x_, u_, scratch_a_, scratch_b_, scratch_c_, g_out_, g_in_;
  std::vector<R> spike_counts_;
  memory_counters counters_;
};

}  // namespace efflif
