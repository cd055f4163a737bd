#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>

#include "efflif/error.hpp"
#include "efflif/tensor.hpp"

namespace efflif {

enum class reset_mode { soft, hard };

/// How a neuron turns its membrane into an output. `spike` is the binary
/// Heaviside used for training and inference; `relaxed` replaces it with the
/// smooth arctan relaxation so the whole network becomes differentiable and
/// can be checked against finite differences.
enum class fire_mode { spike, relaxed };

struct lif_params {
  double lambda = 0.5;  // decay; a power of two keeps reverse recomputation well conditioned
  double theta = 1.0;
  reset_mode reset = reset_mode::soft;

  void validate() const {
    if (!(lambda > 0.0 && lambda <= 1.0))
      throw config_error("lambda must be in (0, 1], got " + std::to_string(lambda));
    if (!(theta > 0.0)) throw config_error("theta must be positive, got " + std::to_string(theta));
  }
};

inline std::string to_string(reset_mode r) { return r == reset_mode::soft ? "soft" : "hard"; }

inline reset_mode parse_reset_mode(const std::string& s) {
  if (s == "soft") return reset_mode::soft;
  if (s == "hard") return reset_mode::hard;
  throw config_error("unknown reset mode '" + s + "' (expected soft or hard)");
}

/// f(x) = atan(pi x)/pi + 1/2 and its derivative 1/(1 + (pi x)^2).
struct arctan_surrogate {
  template <class R>
  static R relax(R x) {
    return std::atan(std::numbers::pi_v<R> * x) / std::numbers::pi_v<R> + R(0.5);
  }
  template <class R>
  static R derivative(R x) {
    const R px = std::numbers::pi_v<R> * x;
    return R(1) / (R(1) + px * px);
  }
};

/// Elementwise surrogate derivative, evaluated at (u - theta) by callers.
template <class R>
basic_tensor<R> surrogate_derivative(const basic_tensor<R>& u_minus_theta) {
  basic_tensor<R> out(u_minus_theta.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = arctan_surrogate::derivative(u_minus_theta[i]);
  return out;
}

namespace kernels {

/// One shared-neuron update over a slab:
///   u = lambda * reset(u_carry, o_carry) + x,  o = fire(u - theta)
/// with reset = u - theta*o (soft) or u*(1-o) (hard). `u_out` may alias `u_carry`.
template <class R>
void lif_update(std::span<const R> u_carry, std::span<const R> o_carry, std::span<const R> x,
                const lif_params& p, fire_mode fire, std::span<R> u_out, std::span<R> o_out) {
  const R lambda = static_cast<R>(p.lambda);
  const R theta = static_cast<R>(p.theta);
  const bool soft = p.reset == reset_mode::soft;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const R carried = soft ? u_carry[i] - theta * o_carry[i] : u_carry[i] * (R(1) - o_carry[i]);
    const R u = lambda * carried + x[i];
    u_out[i] = u;
    if (fire == fire_mode::spike)
      o_out[i] = u > theta ? R(1) : R(0);  // strict: u == theta does not fire
    else
      o_out[i] = arctan_surrogate::relax(u - theta);
  }
}

}  // namespace kernels

template <class R>
struct membrane_state {
  basic_tensor<R> u;
};

template <class R>
struct step_result {
  membrane_state<R> u_next;
  bit_tensor spikes;
};

namespace detail {
template <class R>
void check_step_inputs(const basic_tensor<R>& u, const basic_tensor<R>& x) {
  if (u.shape() != x.shape())
    throw dimension_error("membrane " + shape_str(u.shape()) + " and input " + shape_str(x.shape()) +
                          " differ in shape");
  for (std::size_t i = 0; i < x.numel(); ++i)
    if (!std::isfinite(static_cast<double>(x[i])) || !std::isfinite(static_cast<double>(u[i])))
      throw numeric_error("non-finite value in LIF step input");
}
}  // namespace detail

/// Baseline per-layer step. `u_prev` is post-reset; the returned membrane is
/// post-reset as well, so chaining calls gives the standard LIF recurrence.
template <class R>
step_result<R> lif_step(const membrane_state<R>& u_prev, const basic_tensor<R>& x, const lif_params& p) {
  p.validate();
  detail::check_step_inputs(u_prev.u, x);
  const auto n = x.numel();
  std::vector<R> zeros(n, R(0)), u(n), o(n);
  kernels::lif_update<R>(u_prev.u.data(), zeros, x.data(), p, fire_mode::spike, u, o);
  for (std::size_t i = 0; i < n; ++i) {
    if (o[i] == R(0)) continue;
    u[i] = p.reset == reset_mode::soft ? u[i] - static_cast<R>(p.theta) : R(0);
  }
  return {{basic_tensor<R>(x.shape(), std::move(u))}, bit_tensor::pack(x.shape(), o)};
}

/// Shared-neuron step: the carried membrane and spikes of the previous
/// layer/group are reset and decayed before adding this slab's input. The
/// returned membrane is pre-reset; its reset happens when the next consumer
/// calls shared_step with it.
template <class R>
step_result<R> shared_step(const membrane_state<R>& u_carry, const bit_tensor& o_carry, const basic_tensor<R>& x,
                           const lif_params& p) {
  p.validate();
  detail::check_step_inputs(u_carry.u, x);
  if (o_carry.shape() != x.shape())
    throw dimension_error("carried spikes " + shape_str(o_carry.shape()) + " and input " +
                          shape_str(x.shape()) + " differ in shape");
  const auto n = x.numel();
  const auto oc = o_carry.unpack<R>();
  std::vector<R> u(n), o(n);
  kernels::lif_update<R>(u_carry.u.data(), oc, x.data(), p, fire_mode::spike, u, o);
  return {{basic_tensor<R>(x.shape(), std::move(u))}, bit_tensor::pack(x.shape(), o)};
}

}  // namespace efflif
