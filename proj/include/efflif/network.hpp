#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "efflif/error.hpp"
#include "efflif/lif.hpp"
#include "efflif/sharing.hpp"
#include "efflif/tensor.hpp"

namespace efflif {

enum class layer_kind { dense, conv1d };

struct layer_spec {
  layer_kind kind = layer_kind::dense;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;   // conv1d only
  std::size_t padding = 0;  // conv1d only
};

/// Contiguous run of spiking layers [first, last] sharing membranes.
struct block_spec {
  std::size_t first = 0;
  std::size_t last = 0;
  sharing_scheme scheme;

  std::size_t members() const { return last - first + 1; }
};

/// Declarative architecture. Every layer but the last is a spiking LIF layer;
/// the last one is a non-spiking readout whose weighted inputs are averaged
/// over positions and summed over timesteps into class logits. Spiking layers
/// not covered by a block get a single-layer baseline block.
struct network_spec {
  std::size_t input_channels = 1;
  std::size_t input_length = 1;
  std::vector<layer_spec> layers;
  std::vector<block_spec> blocks;
  lif_params lif;
  std::size_t timesteps = 5;

  std::size_t spiking_layers() const { return layers.empty() ? 0 : layers.size() - 1; }
  std::size_t n_classes() const { return layers.empty() ? 0 : layers.back().out_channels; }
};

struct layer_geometry {
  layer_kind kind;
  std::size_t in_channels, in_length;
  std::size_t out_channels, out_length;
  std::size_t kernel, padding;

  std::size_t in_elems() const { return in_channels * in_length; }
  std::size_t out_elems() const { return out_channels * out_length; }
  shape_t out_shape() const { return {out_channels, out_length}; }
  shape_t weight_shape() const {
    return kind == layer_kind::dense ? shape_t{out_channels, in_elems()} : shape_t{out_channels, in_channels, kernel};
  }
  std::size_t weight_count() const { return shape_numel(weight_shape()); }
  std::size_t fan_in() const { return kind == layer_kind::dense ? in_elems() : in_channels * kernel; }
  kernels::conv1d_dims conv_dims() const { return {in_channels, out_channels, kernel, padding, in_length}; }
};

inline std::vector<layer_geometry> compute_geometry(const network_spec& spec) {
  if (spec.layers.size() < 2) throw config_error("network needs at least one spiking layer and a readout layer");
  if (spec.input_channels == 0 || spec.input_length == 0) throw config_error("input shape must be positive");
  std::vector<layer_geometry> geo;
  std::size_t c = spec.input_channels, len = spec.input_length;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.out_channels == 0) throw config_error("layer " + std::to_string(i) + " has zero outputs");
    layer_geometry g{l.kind, c, len, l.out_channels, 1, 1, 0};
    if (l.kind == layer_kind::conv1d) {
      if (l.kernel == 0 || l.kernel > len + 2 * l.padding)
        throw config_error("layer " + std::to_string(i) + ": kernel " + std::to_string(l.kernel) +
                           " does not fit padded length " + std::to_string(len + 2 * l.padding));
      g.kernel = l.kernel;
      g.padding = l.padding;
      g.out_length = len + 2 * l.padding - l.kernel + 1;
    }
    geo.push_back(g);
    c = g.out_channels;
    len = g.out_length;
  }
  return geo;
}

/// Validated blocks covering every spiking layer exactly once, in layer order.
inline std::vector<block_spec> resolve_blocks(const network_spec& spec) {
  const auto geo = compute_geometry(spec);
  const std::size_t n = spec.spiking_layers();
  std::vector<int> owner(n, -1);
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& blk = spec.blocks[b];
    if (blk.first > blk.last || blk.last >= n)
      throw config_error("block " + std::to_string(b) + " covers layers outside the spiking range [0, " +
                         std::to_string(n) + ")");
    for (std::size_t l = blk.first; l <= blk.last; ++l) {
      if (owner[l] >= 0) throw config_error("layer " + std::to_string(l) + " belongs to two blocks");
      owner[l] = static_cast<int>(b);
      if (geo[l].out_shape() != geo[blk.first].out_shape())
        throw config_error("block " + std::to_string(b) + ": layer " + std::to_string(l) + " shape " +
                           shape_str(geo[l].out_shape()) + " differs from " +
                           shape_str(geo[blk.first].out_shape()));
    }
    const auto groups = blk.scheme.channel_groups();
    if (groups == 0 || geo[blk.first].out_channels % groups != 0)
      throw config_error("block " + std::to_string(b) + ": " + std::to_string(geo[blk.first].out_channels) +
                         " channels not divisible into " + std::to_string(groups) + " groups");
  }
  std::vector<block_spec> out;
  for (std::size_t l = 0; l < n;) {
    if (owner[l] >= 0) {
      out.push_back(spec.blocks[static_cast<std::size_t>(owner[l])]);
      l = out.back().last + 1;
    } else {
      out.push_back({l, l, {}});
      ++l;
    }
  }
  return out;
}

inline void validate(const network_spec& spec) {
  spec.lif.validate();
  if (spec.timesteps == 0) throw config_error("timesteps must be at least 1");
  if (spec.n_classes() < 2) throw config_error("readout layer needs at least 2 classes");
  resolve_blocks(spec);
}

/// Copy of `spec` whose spiking layers all use `scheme`. Existing block
/// boundaries are kept; with no blocks declared, maximal runs of
/// identically shaped spiking layers become blocks.
inline network_spec with_scheme(const network_spec& spec, const sharing_scheme& scheme) {
  network_spec out = spec;
  if (out.blocks.empty()) {
    const auto geo = compute_geometry(spec);
    for (std::size_t l = 0; l < spec.spiking_layers();) {
      std::size_t e = l;
      while (e + 1 < spec.spiking_layers() && geo[e + 1].out_shape() == geo[l].out_shape()) ++e;
      out.blocks.push_back({l, e, scheme});
      l = e + 1;
    }
  } else {
    for (auto& b : out.blocks) b.scheme = scheme;
  }
  return out;
}

/// Trainable weights, one fp32 tensor per layer.
struct model {
  std::vector<tensor> weights;
};

/// Fan-in scaled uniform init, bound sqrt(6 / fan_in).
inline model init_model(const network_spec& spec, std::uint64_t seed) {
  const auto geo = compute_geometry(spec);
  std::mt19937_64 rng(seed);
  model m;
  for (const auto& g : geo) {
    const double bound = std::sqrt(6.0 / static_cast<double>(g.fan_in()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    tensor w(g.weight_shape());
    for (auto& v : w.data()) v = static_cast<float>(dist(rng));
    m.weights.push_back(std::move(w));
  }
  return m;
}

inline void check_model(const network_spec& spec, const model& m) {
  const auto geo = compute_geometry(spec);
  if (m.weights.size() != geo.size())
    throw config_error("model has " + std::to_string(m.weights.size()) + " weight tensors, spec needs " +
                       std::to_string(geo.size()));
  for (std::size_t i = 0; i < geo.size(); ++i)
    if (m.weights[i].shape() != geo[i].weight_shape())
      throw config_error("layer " + std::to_string(i) + " weights " + shape_str(m.weights[i].shape()) +
                         " do not match spec shape " + shape_str(geo[i].weight_shape()));
}

template <class Acc, class In>
void layer_forward(const layer_geometry& g, const tensor& w, std::span<const In> in, std::span<Acc> out) {
  if (g.kind == layer_kind::dense)
    kernels::dense_forward<Acc, In>(w.data(), g.out_channels, g.in_elems(), in, out);
  else
    kernels::conv1d_forward<Acc, In>(w.data(), g.conv_dims(), in, out);
}

template <class Acc>
void layer_backward_input(const layer_geometry& g, const tensor& w, std::span<const Acc> gout,
                          std::span<Acc> gin) {
  if (g.kind == layer_kind::dense)
    kernels::dense_backward_input<Acc>(w.data(), g.out_channels, g.in_elems(), gout, gin);
  else
    kernels::conv1d_backward_input<Acc>(w.data(), g.conv_dims(), gout, gin);
}

template <class Acc, class In>
void layer_weight_grad(const layer_geometry& g, std::span<const Acc> gout, std::span<const In> in,
                       std::span<Acc> gw) {
  if (g.kind == layer_kind::dense)
    kernels::dense_weight_grad<Acc, In>(g.out_channels, g.in_elems(), gout, in, gw);
  else
    kernels::conv1d_weight_grad<Acc, In>(g.conv_dims(), gout, in, gw);
}

}  // namespace efflif
