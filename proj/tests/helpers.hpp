#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "efflif/engine.hpp"
#include "efflif/network.hpp"
#include "oracle.hpp"

namespace testing_util {

/// Dense network spec with one block over all spiking layers.
inline efflif::network_spec dense_spec(std::size_t n_in, const std::vector<std::size_t>& widths, std::size_t classes,
                                       efflif::sharing_scheme scheme, std::size_t timesteps,
                                       efflif::lif_params lif = {}) {
  efflif::network_spec s;
  s.input_channels = n_in;
  s.input_length = 1;
  for (auto w : widths) s.layers.push_back({efflif::layer_kind::dense, w});
  s.layers.push_back({efflif::layer_kind::dense, classes});
  s.blocks.push_back({0, widths.size() - 1, scheme});
  s.lif = lif;
  s.timesteps = timesteps;
  return s;
}

inline std::string oracle_scheme(const efflif::sharing_scheme& s) { return efflif::to_string(s.kind); }

inline oracle::dense_net to_oracle(const efflif::network_spec& s, const efflif::model& m, bool relaxed) {
  oracle::dense_net n;
  n.n_in = s.input_channels;
  for (std::size_t l = 0; l + 1 < s.layers.size(); ++l) n.widths.push_back(s.layers[l].out_channels);
  n.n_classes = s.n_classes();
  for (const auto& w : m.weights) n.w.emplace_back(w.values().begin(), w.values().end());
  n.scheme = oracle_scheme(s.blocks.at(0).scheme);
  n.groups = s.blocks.at(0).scheme.channel_groups();
  n.timesteps = s.timesteps;
  n.lambda = s.lif.lambda;
  n.theta = s.lif.theta;
  n.soft = s.lif.reset == efflif::reset_mode::soft;
  n.relaxed = relaxed;
  return n;
}

struct random_case {
  efflif::network_spec spec;
  efflif::model model;
  std::vector<float> input;
  std::size_t label;
};

/// Small random dense network: 1-3 spiking layers of equal width (<= 8,
/// divisible by the group count), T in 1..4, inputs in [-1.5, 1.5].
inline random_case make_random_case(efflif::sharing_scheme scheme, std::uint64_t seed, std::size_t max_t = 4) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const std::size_t n = scheme.channel_groups();
  const std::size_t width = n * pick(std::max<std::size_t>(1, 2 / n), 8 / n);
  const std::size_t layers = pick(1, 3);
  const std::size_t classes = pick(2, 3);
  random_case c{dense_spec(pick(1, 5), std::vector<std::size_t>(layers, width), classes, scheme, pick(1, max_t)),
                {},
                {},
                0};
  c.model = efflif::init_model(c.spec, seed ^ 0x9e3779b97f4a7c15ull);
  // scale up so membranes cross threshold regularly
  for (auto& w : c.model.weights)
    for (auto& v : w.data()) v *= 1.5f;
  std::uniform_real_distribution<float> in(-1.5f, 1.5f);
  for (std::size_t i = 0; i < c.spec.input_channels; ++i) c.input.push_back(in(rng));
  c.label = pick(0, classes - 1);
  return c;
}

/// max |a - b| / max(|a|, |b|, floor) over all entries.
inline double max_rel_error(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                            double floor = 1e-7) {
  double worst = 0;
  for (std::size_t l = 0; l < a.size(); ++l)
    for (std::size_t i = 0; i < a[l].size(); ++i) {
      const double den = std::max({std::abs(a[l][i]), std::abs(b[l][i]), floor});
      worst = std::max(worst, std::abs(a[l][i] - b[l][i]) / den);
    }
  return worst;
}

template <class R>
std::vector<std::vector<double>> to_nested(const efflif::gradient_set<R>& g) {
  std::vector<std::vector<double>> out;
  for (const auto& t : g.weights) out.emplace_back(t.values().begin(), t.values().end());
  return out;
}

/// Engine gradient of the softmax cross-entropy for one case.
inline efflif::gradient_set<double> engine_gradient(const random_case& c, efflif::engine_options opts) {
  efflif::network_engine<double> eng(c.spec, opts);
  const auto logits = eng.forward(c.model, c.input);
  const auto lr = efflif::softmax_cross_entropy<double>(logits, c.label);
  return eng.backward(c.model, lr.dlogits);
}

/// ResNet19-class conv1d stack: activation sizes 131072 (stem and stage 1),
/// 65536 (stage 2) and 32768 (stage 3), as in a CIFAR ResNet19 at
/// 128/256/512 channels. Length is held at 1024 and the channel count
/// carries the size. Sharing blocks follow the residual pairs; the stem
/// joins the first pair (m = 3), every other block has m = 2.
inline efflif::network_spec resnet19_class_spec(efflif::sharing_scheme scheme, std::size_t timesteps = 5) {
  using namespace efflif;
  network_spec s;
  s.input_channels = 3;
  s.input_length = 1024;
  s.timesteps = timesteps;
  const std::size_t widths[] = {128, 128, 128, 128, 128, 128, 128, 64, 64, 64, 64, 64, 64, 32, 32, 32, 32};
  for (auto w : widths) s.layers.push_back({layer_kind::conv1d, w, 3, 1});
  s.layers.push_back({layer_kind::dense, 10});
  s.blocks = {{0, 2, scheme}, {3, 4, scheme}, {5, 6, scheme}, {7, 8, scheme},
              {9, 10, scheme}, {11, 12, scheme}, {13, 14, scheme}, {15, 16, scheme}};
  return s;
}

/// Uniform conv1d stack of `layers` layers of [channels x length] in one block.
inline efflif::network_spec uniform_conv_spec(std::size_t layers, std::size_t channels, std::size_t length,
                                              efflif::sharing_scheme scheme, std::size_t timesteps) {
  using namespace efflif;
  network_spec s;
  s.input_channels = 2;
  s.input_length = length;
  s.timesteps = timesteps;
  for (std::size_t l = 0; l < layers; ++l) s.layers.push_back({layer_kind::conv1d, channels, 3, 1});
  s.layers.push_back({layer_kind::conv1d, 4, 1, 0});
  s.blocks = {{0, layers - 1, scheme}};
  return s;
}

inline std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace testing_util
