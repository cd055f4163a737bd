#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "efflif/data.hpp"
#include "efflif/engine.hpp"
#include "efflif/error.hpp"
#include "efflif/network.hpp"

namespace efflif {

struct train_config {
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t epochs = 50;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  backward_mode backward = backward_mode::cached;
  std::size_t threads = 1;

  void validate() const {
    if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw config_error("lr0 must be a finite value >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw config_error("momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw config_error("weight_decay must be >= 0");
    if (batch == 0) throw config_error("batch must be at least 1");
    if (threads == 0) throw config_error("threads must be at least 1");
    if (backward == backward_mode::none) throw config_error("training needs backward mode cached or recompute");
  }
};

/// Cosine schedule: lr0 * 0.5 * (1 + cos(pi * epoch / epochs)), epoch 0-based.
inline double cosine_lr(double lr0, std::size_t epoch, std::size_t epochs) {
  if (epochs == 0) return lr0;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs)));
}

struct eval_metrics {
  double accuracy = 0;
  double loss = 0;
  std::vector<double> spike_rates;  // per spiking layer, spikes / (neurons * T * samples)
  std::size_t samples = 0;
};

struct epoch_metrics {
  std::size_t epoch = 0;  // 1-based
  double lr = 0;
  double loss = 0;        // mean training loss over the epoch
  double train_acc = 0;   // accuracy of the training forward passes
  double val_acc = 0;     // NaN when there is no validation split
  std::vector<double> spike_rates;
  double seconds = 0;
};

inline std::string to_record(const epoch_metrics& m) {
  std::ostringstream os;
  os.precision(6);
  os << "epoch=" << m.epoch << " lr=" << m.lr << " loss=" << m.loss << " train_acc=" << m.train_acc
     << " val_acc=" << m.val_acc << " spike_rate=";
  for (std::size_t i = 0; i < m.spike_rates.size(); ++i) os << (i ? "," : "") << m.spike_rates[i];
  os << " seconds=" << m.seconds;
  return os.str();
}

struct train_result {
  model final_model;
  model best_model;         // highest validation accuracy, earliest on ties
  std::size_t best_epoch = 0;  // 0: no epoch ran (initial weights)
  std::vector<epoch_metrics> history;
};

namespace detail {

// Samples are reduced in fixed chunks of this size, and chunk results in
// chunk order, so sums do not depend on the thread count.
inline constexpr std::size_t reduce_chunk = 8;

struct chunk_acc {
  std::vector<std::vector<double>> grads;
  double loss = 0;
  std::size_t correct = 0;
  std::vector<double> spikes;
};

inline std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/// Runs `work(engine_index, chunk_index)` for every chunk on up to
/// `threads` workers, chunk c on worker c % threads.
inline void for_chunks(std::size_t chunks, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& work) {
  const std::size_t workers = std::min(threads, chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(0, c);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < chunks; c += workers) work(w, c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void check_data(const network_spec& spec, const sequence_dataset& data) {
  if (data.channels != spec.input_channels || data.length != spec.input_length)
    throw config_error("data shape [" + std::to_string(data.channels) + "x" + std::to_string(data.length) +
                       "] does not match network input [" + std::to_string(spec.input_channels) + "x" +
                       std::to_string(spec.input_length) + "]");
  if (data.n_classes > spec.n_classes())
    throw config_error("data has " + std::to_string(data.n_classes) + " classes, network outputs " +
                       std::to_string(spec.n_classes()));
}

}  // namespace detail

/// Accuracy, mean loss and per-layer spike rates over a whole split.
inline eval_metrics evaluate(const model& m, const network_spec& spec, const sequence_dataset& data,
                             std::size_t threads = 1, fire_mode fire = fire_mode::spike) {
  validate(spec);
  check_model(spec, m);
  detail::check_data(spec, data);
  const std::size_t L = spec.spiking_layers();
  const std::size_t n = data.size();
  const std::size_t chunks = (n + detail::reduce_chunk - 1) / detail::reduce_chunk;
  std::vector<network_engine<double>> engines;
  for (std::size_t w = 0; w < std::max<std::size_t>(1, std::min(threads, chunks)); ++w)
    engines.emplace_back(spec, engine_options{fire, backward_mode::none, false});
  std::vector<detail::chunk_acc> acc(chunks);
  detail::for_chunks(chunks, threads, [&](std::size_t w, std::size_t c) {
    auto& a = acc[c];
    a.spikes.assign(L, 0.0);
    for (std::size_t i = c * detail::reduce_chunk; i < std::min(n, (c + 1) * detail::reduce_chunk); ++i) {
      const auto& s = data.samples[i];
      const auto logits = engines[w].forward(m, s.features);
      a.loss += softmax_cross_entropy<double>(logits, s.label).loss;
      if (detail::argmax(logits) == s.label) ++a.correct;
      for (std::size_t l = 0; l < L; ++l) a.spikes[l] += engines[w].spike_counts()[l];
    }
  });
  eval_metrics r;
  r.samples = n;
  r.spike_rates.assign(L, 0.0);
  std::size_t correct = 0;
  for (const auto& a : acc) {
    r.loss += a.loss;
    correct += a.correct;
    for (std::size_t l = 0; l < L; ++l) r.spike_rates[l] += a.spikes[l];
  }
  if (n > 0) {
    const auto geo = compute_geometry(spec);
    r.loss /= static_cast<double>(n);
    r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    for (std::size_t l = 0; l < L; ++l)
      r.spike_rates[l] /= static_cast<double>(geo[l].out_elems() * spec.timesteps * n);
  }
  return r;
}

inline std::vector<double> spike_rate_report(const model& m, const network_spec& spec, const sequence_dataset& data,
                                             std::size_t threads = 1) {
  return evaluate(m, spec, data, threads).spike_rates;
}

/// SGD with momentum (v = mu*v + g + wd*w; w -= lr*v), cosine schedule,
/// softmax cross-entropy on the time-accumulated readout. Deterministic for
/// a given (spec, data, cfg), independent of cfg.threads.
inline train_result train(const network_spec& spec, const sequence_dataset& data, const train_config& cfg,
                          const sequence_dataset* val = nullptr,
                          const std::function<void(const epoch_metrics&)>& on_epoch = {},
                          const model* init = nullptr) {
  validate(spec);
  cfg.validate();
  detail::check_data(spec, data);
  if (val) detail::check_data(spec, *val);
  if (data.size() == 0 && cfg.epochs > 0) throw data_error("training split is empty");

  train_result res;
  res.final_model = init ? *init : init_model(spec, cfg.seed);
  check_model(spec, res.final_model);
  res.best_model = res.final_model;
  model& m = res.final_model;

  const auto geo = compute_geometry(spec);
  const std::size_t L = spec.spiking_layers();
  std::vector<std::vector<double>> velocity;
  for (const auto& w : m.weights) velocity.emplace_back(w.numel(), 0.0);

  const std::size_t max_chunks = (cfg.batch + detail::reduce_chunk - 1) / detail::reduce_chunk;
  std::vector<network_engine<double>> engines;
  for (std::size_t w = 0; w < std::max<std::size_t>(1, std::min(cfg.threads, max_chunks)); ++w)
    engines.emplace_back(spec, engine_options{fire_mode::spike, cfg.backward, false});
  std::vector<detail::chunk_acc> acc(max_chunks);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5851f42d4c957f2dull);
  std::vector<std::size_t> order(data.size());
  double best_val = -1.0;

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cosine_lr(cfg.lr0, e, cfg.epochs);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0;
    std::size_t epoch_correct = 0;
    std::vector<double> epoch_spikes(L, 0.0);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch);
      const std::size_t chunks = (stop - start + detail::reduce_chunk - 1) / detail::reduce_chunk;
      detail::for_chunks(chunks, cfg.threads, [&](std::size_t w, std::size_t c) {
        auto& a = acc[c];
        a.grads.resize(geo.size());
        for (std::size_t l = 0; l < geo.size(); ++l) a.grads[l].assign(geo[l].weight_count(), 0.0);
        a.loss = 0;
        a.correct = 0;
        a.spikes.assign(L, 0.0);
        auto& eng = engines[w];
        const std::size_t lo = start + c * detail::reduce_chunk;
        for (std::size_t i = lo; i < std::min(stop, lo + detail::reduce_chunk); ++i) {
          const auto& s = data.samples[order[i]];
          const auto logits = eng.forward(m, s.features);
          const auto lr_ = softmax_cross_entropy<double>(logits, s.label);
          if (!std::isfinite(lr_.loss))
            throw numeric_error("non-finite loss at epoch " + std::to_string(e + 1) + ", sample " +
                                std::to_string(order[i]) + "; lower lr0 or check the input scale");
          a.loss += lr_.loss;
          if (detail::argmax(logits) == s.label) ++a.correct;
          for (std::size_t l = 0; l < L; ++l) a.spikes[l] += eng.spike_counts()[l];
          const auto g = eng.backward(m, lr_.dlogits);
          for (std::size_t l = 0; l < geo.size(); ++l) {
            const auto src = g.weights[l].data();
            for (std::size_t k = 0; k < src.size(); ++k) a.grads[l][k] += src[k];
          }
        }
      });
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < geo.size(); ++l) {
        auto w = m.weights[l].data();
        auto& v = velocity[l];
        for (std::size_t k = 0; k < w.size(); ++k) {
          double g = 0;
          for (std::size_t c = 0; c < chunks; ++c) g += acc[c].grads[l][k];
          g *= inv;
          v[k] = cfg.momentum * v[k] + g + cfg.weight_decay * static_cast<double>(w[k]);
          w[k] = static_cast<float>(static_cast<double>(w[k]) - lr * v[k]);
        }
      }
      for (std::size_t c = 0; c < chunks; ++c) {
        epoch_loss += acc[c].loss;
        epoch_correct += acc[c].correct;
        for (std::size_t l = 0; l < L; ++l) epoch_spikes[l] += acc[c].spikes[l];
      }
    }

    epoch_metrics em;
    em.epoch = e + 1;
    em.lr = lr;
    const double n = static_cast<double>(data.size());
    em.loss = epoch_loss / n;
    em.train_acc = static_cast<double>(epoch_correct) / n;
    em.spike_rates.resize(L);
    for (std::size_t l = 0; l < L; ++l)
      em.spike_rates[l] = epoch_spikes[l] / (static_cast<double>(geo[l].out_elems() * spec.timesteps) * n);
    em.val_acc = std::numeric_limits<double>::quiet_NaN();
    if (val && val->size() > 0) em.val_acc = evaluate(m, spec, *val, cfg.threads).accuracy;
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool have_val = !std::isnan(em.val_acc);
    if (!have_val || em.val_acc > best_val) {
      best_val = have_val ? em.val_acc : best_val;
      res.best_model = m;
      res.best_epoch = em.epoch;
    }
    res.history.push_back(em);
    if (on_epoch) on_epoch(em);
  }
  return res;
}

}  // namespace efflif
