#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "efflif/error.hpp"
#include "efflif/lif.hpp"
#include "efflif/tensor.hpp"

namespace efflif {

namespace kernels {

/// In place: u <- (u - x) / lambda + theta * o_prev. Inverts lif_update
/// under soft reset, recovering the predecessor's pre-reset membrane from
/// the successor's membrane, the successor's input and the predecessor's
/// output.
template <class R>
void lif_reverse(std::span<R> u, std::span<const R> x, std::span<const R> o_prev, const lif_params& p) {
  const R lambda = static_cast<R>(p.lambda);
  const R theta = static_cast<R>(p.theta);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (u[i] - x[i]) / lambda + theta * o_prev[i];
}

}  // namespace kernels

inline void check_reversible(const lif_params& p) {
  if (p.reset != reset_mode::soft)
    throw config_error("reverse membrane recomputation needs soft reset; hard reset discards the residual");
  if (p.lambda == 0.0) throw numeric_error("reverse membrane recomputation divides by lambda = 0");
}

/// Membrane of the previous layer (or of the block's last layer at the
/// previous timestep) from the next one: the algebraic inverse of
/// shared_step under soft reset.
template <class R>
basic_tensor<R> reverse_layer(const basic_tensor<R>& u_next, const basic_tensor<R>& x_next, const bit_tensor& o_prev,
                              const lif_params& p) {
  check_reversible(p);
  if (u_next.shape() != x_next.shape() || o_prev.shape() != u_next.shape())
    throw dimension_error("reverse_layer: shapes " + shape_str(u_next.shape()) + ", " + shape_str(x_next.shape()) +
                          ", " + shape_str(o_prev.shape()) + " disagree");
  basic_tensor<R> u = u_next;
  const auto o = o_prev.unpack<R>();
  kernels::lif_reverse<R>(u.data(), x_next.data(), o, p);
  return u;
}

/// Same inverse applied to one channel group (or group N at the previous
/// timestep); shapes are per group.
template <class R>
basic_tensor<R> reverse_group(const basic_tensor<R>& u_next_group, const basic_tensor<R>& x_next_group,
                              const bit_tensor& o_prev_group, const lif_params& p) {
  return reverse_layer(u_next_group, x_next_group, o_prev_group, p);
}

}  // namespace efflif
