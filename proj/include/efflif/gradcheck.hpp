#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "efflif/engine.hpp"
#include "efflif/network.hpp"

namespace efflif {

// Finite-difference check of the engine's surrogate gradients. The spiking
// threshold is replaced by the arctan relaxation so the loss is smooth and
// the surrogate gradient becomes the true gradient.

struct gradcheck_options {
  sharing_scheme scheme;
  std::size_t layers = 2;
  std::size_t neurons = 4;
  std::size_t inputs = 3;
  std::size_t classes = 2;
  std::size_t timesteps = 3;
  std::size_t seeds = 20;
  std::uint64_t seed = 0;
  backward_mode backward = backward_mode::cached;
  lif_params lif;
  double weight_scale = 1.5;
};

struct gradcheck_result {
  double max_rel_error = 0;
  std::uint64_t worst_seed = 0;
  std::size_t cases = 0;
  std::size_t weights_checked = 0;
};

/// Dense network of `layers` spiking layers of `neurons` each in one block.
inline network_spec gradcheck_spec(const gradcheck_options& o) {
  network_spec s;
  s.input_channels = o.inputs;
  s.input_length = 1;
  s.timesteps = o.timesteps;
  s.lif = o.lif;
  for (std::size_t l = 0; l < o.layers; ++l) s.layers.push_back({layer_kind::dense, o.neurons});
  s.layers.push_back({layer_kind::dense, o.classes});
  if (o.layers > 0) s.blocks.push_back({0, o.layers - 1, o.scheme});
  validate(s);
  return s;
}

/// Step 2^-10. Weights are snapped to multiples of 2^-20 (and |w| < 8) so
/// every stencil point w +- k*h is exact in fp32.
inline constexpr double fd_step = 1.0 / 1024.0;

inline void snap_for_fd(model& m) {
  for (auto& w : m.weights)
    for (auto& v : w.data()) {
      const double c = std::clamp(static_cast<double>(v), -7.5, 7.5);
      v = static_cast<float>(std::round(c * 1048576.0) / 1048576.0);
    }
}

/// dL/dw by a five-point central stencil on the relaxed forward pass.
inline std::vector<std::vector<double>> numeric_gradient(const network_spec& spec, model m,
                                                         std::span<const float> input, std::size_t label) {
  network_engine<double> eng(spec, {fire_mode::relaxed, backward_mode::none, false});
  auto loss = [&] { return softmax_cross_entropy<double>(eng.forward(m, input), label).loss; };
  std::vector<std::vector<double>> g(m.weights.size());
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    auto w = m.weights[l].data();
    g[l].resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      const float w0 = w[i];
      auto at = [&](double d) {
        w[i] = static_cast<float>(w0 + d);
        return loss();
      };
      const double h = fd_step;
      g[l][i] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
      w[i] = w0;
    }
  }
  return g;
}

/// |a - b| / max(|a|, |b|, 1e-7), maximized over all weights and cases.
inline gradcheck_result run_gradcheck(const gradcheck_options& o) {
  const auto spec = gradcheck_spec(o);
  gradcheck_result r;
  for (std::size_t k = 0; k < o.seeds; ++k) {
    const std::uint64_t seed = o.seed + k;
    auto m = init_model(spec, seed);
    for (auto& w : m.weights)
      for (auto& v : w.data()) v = static_cast<float>(v * o.weight_scale);
    snap_for_fd(m);
    std::mt19937_64 rng(seed ^ 0x2545f4914f6cdd1dull);
    std::uniform_real_distribution<float> in(-1.5f, 1.5f);
    std::vector<float> x(spec.input_channels);
    for (auto& v : x) v = in(rng);
    const std::size_t label = std::uniform_int_distribution<std::size_t>(0, o.classes - 1)(rng);

    network_engine<double> eng(spec, {fire_mode::relaxed, o.backward, false});
    const auto logits = eng.forward(m, x);
    const auto grads = eng.backward(m, softmax_cross_entropy<double>(logits, label).dlogits);
    const auto fd = numeric_gradient(spec, m, x, label);
    for (std::size_t l = 0; l < fd.size(); ++l) {
      const auto a = grads.weights[l].data();
      for (std::size_t i = 0; i < fd[l].size(); ++i) {
        const double den = std::max({std::abs(a[i]), std::abs(fd[l][i]), 1e-7});
        const double e = std::abs(a[i] - fd[l][i]) / den;
        if (e > r.max_rel_error) {
          r.max_rel_error = e;
          r.worst_seed = seed;
        }
        ++r.weights_checked;
      }
    }
    ++r.cases;
  }
  return r;
}

}  // namespace efflif
