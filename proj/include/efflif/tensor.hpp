#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "efflif/error.hpp"

namespace efflif {

using shape_t = std::vector<std::size_t>;

inline std::string shape_str(const shape_t& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

inline std::size_t shape_numel(const shape_t& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

namespace detail {
inline void check_shape(const shape_t& shape) {
  if (shape.empty()) throw dimension_error("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw dimension_error("tensor dimension must be positive, got " + shape_str(shape));
}
}  // namespace detail

/// Dense row-major array. The leading axis is the channel axis, so channel
/// groups are contiguous slabs of the buffer.
template <class T>
class basic_tensor {
 public:
  using value_type = T;

  explicit basic_tensor(shape_t shape) : shape_(std::move(shape)) {
    detail::check_shape(shape_);
    data_.assign(shape_numel(shape_), T{});
  }

  basic_tensor(shape_t shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    detail::check_shape(shape_);
    if (data_.size() != shape_numel(shape_))
      throw dimension_error("tensor of shape " + shape_str(shape_) + " needs " +
                            std::to_string(shape_numel(shape_)) + " values, got " +
                            std::to_string(data_.size()));
  }

  const shape_t& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  friend bool operator==(const basic_tensor& a, const basic_tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  shape_t shape_;
  std::vector<T> data_;
};

using tensor = basic_tensor<float>;

/// Binary tensor packed 8 values per byte, least significant bit first.
class bit_tensor {
 public:
  explicit bit_tensor(shape_t shape) : shape_(std::move(shape)) {
    detail::check_shape(shape_);
    numel_ = shape_numel(shape_);
    bytes_.assign((numel_ + 7) / 8, 0);
  }

  /// Packs 0/1 values. Any other value is a numeric error.
  template <class T>
  static bit_tensor pack(shape_t shape, std::span<const T> values) {
    bit_tensor out(std::move(shape));
    if (values.size() != out.numel_)
      throw dimension_error("cannot pack " + std::to_string(values.size()) + " values into " +
                            shape_str(out.shape_));
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] == T{1})
        out.set(i, true);
      else if (values[i] != T{0})
        throw numeric_error("bit_tensor only stores 0/1 values");
    }
    return out;
  }

  template <class T>
  static bit_tensor pack(shape_t shape, const std::vector<T>& values) {
    return pack(std::move(shape), std::span<const T>(values));
  }

  template <class T = float>
  std::vector<T> unpack() const {
    std::vector<T> out(numel_);
    unpack_into(std::span<T>(out));
    return out;
  }

  template <class T>
  void unpack_into(std::span<T> out, std::size_t offset = 0) const {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = get(offset + i) ? T{1} : T{0};
  }

  bool get(std::size_t i) const { return (bytes_[i >> 3] >> (i & 7)) & 1u; }

  void set(std::size_t i, bool v) {
    const auto mask = static_cast<std::uint8_t>(1u << (i & 7));
    if (v)
      bytes_[i >> 3] |= mask;
    else
      bytes_[i >> 3] &= static_cast<std::uint8_t>(~mask);
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
    return n;
  }

  const shape_t& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return numel_; }
  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

  friend bool operator==(const bit_tensor& a, const bit_tensor& b) {
    return a.shape_ == b.shape_ && a.bytes_ == b.bytes_;
  }

 private:
  shape_t shape_;
  std::size_t numel_ = 0;
  std::vector<std::uint8_t> bytes_;
};

// Span kernels shared by the tensor ops and the network engine. Summation
// order is fixed (input index ascending) so results are reproducible and a
// binary input gives the same bits as a masked row sum.
namespace kernels {

template <class Acc, class In>
void dense_forward(std::span<const float> w, std::size_t out, std::size_t in, std::span<const In> x,
                   std::span<Acc> y) {
  for (std::size_t i = 0; i < out; ++i) {
    const float* row = w.data() + i * in;
    Acc s{0};
    for (std::size_t j = 0; j < in; ++j)
      if (x[j] != In{0}) s += static_cast<Acc>(row[j]) * static_cast<Acc>(x[j]);
    y[i] = s;
  }
}

template <class Acc>
void dense_backward_input(std::span<const float> w, std::size_t out, std::size_t in,
                          std::span<const Acc> gy, std::span<Acc> gx) {
  std::fill(gx.begin(), gx.end(), Acc{0});
  for (std::size_t i = 0; i < out; ++i) {
    const Acc g = gy[i];
    if (g == Acc{0}) continue;
    const float* row = w.data() + i * in;
    for (std::size_t j = 0; j < in; ++j) gx[j] += static_cast<Acc>(row[j]) * g;
  }
}

template <class Acc, class In>
void dense_weight_grad(std::size_t out, std::size_t in, std::span<const Acc> gy, std::span<const In> x,
                       std::span<Acc> gw) {
  for (std::size_t i = 0; i < out; ++i) {
    const Acc g = gy[i];
    if (g == Acc{0}) continue;
    Acc* row = gw.data() + i * in;
    for (std::size_t j = 0; j < in; ++j)
      if (x[j] != In{0}) row[j] += g * static_cast<Acc>(x[j]);
  }
}

struct conv1d_dims {
  std::size_t cin, cout, kernel, padding, len_in;
  std::size_t len_out() const { return len_in + 2 * padding - kernel + 1; }
};

// Valid output positions [lo, hi) for kernel tap k.
inline std::pair<std::size_t, std::size_t> conv1d_tap_range(const conv1d_dims& d, std::size_t k) {
  const std::size_t lo = k < d.padding ? d.padding - k : 0;
  const std::size_t hi = std::min(d.len_out(), d.len_in + d.padding - k);
  return {lo, std::max(lo, hi)};
}

// Loops run (co, ci, k, p) with p innermost; each output still sums its
// terms in (ci, k) order.
template <class Acc, class In>
void conv1d_forward(std::span<const float> w, const conv1d_dims& d, std::span<const In> x,
                    std::span<Acc> y) {
  const std::size_t lo = d.len_out();
  for (std::size_t co = 0; co < d.cout; ++co) {
    Acc* __restrict yr = y.data() + co * lo;
    std::fill(yr, yr + lo, Acc{0});
    for (std::size_t ci = 0; ci < d.cin; ++ci) {
      const float* wk = w.data() + (co * d.cin + ci) * d.kernel;
      const In* __restrict xr = x.data() + ci * d.len_in;
      for (std::size_t k = 0; k < d.kernel; ++k) {
        const auto [a, b] = conv1d_tap_range(d, k);
        const Acc wv = static_cast<Acc>(wk[k]);
        const std::size_t off = k - d.padding;  // modular; p + off >= 0 for p >= a
        for (std::size_t p = a; p < b; ++p) {
          const In v = xr[p + off];
          const Acc prod = wv * static_cast<Acc>(v);  // masked below, so 0 * inf never lands
          yr[p] += v != In{0} ? prod : Acc{0};
        }
      }
    }
  }
}

// Taps run in descending k so each input gradient sums over ascending p.
template <class Acc>
void conv1d_backward_input(std::span<const float> w, const conv1d_dims& d, std::span<const Acc> gy,
                           std::span<Acc> gx) {
  std::fill(gx.begin(), gx.end(), Acc{0});
  const std::size_t lo = d.len_out();
  for (std::size_t co = 0; co < d.cout; ++co) {
    const Acc* __restrict gr = gy.data() + co * lo;
    for (std::size_t ci = 0; ci < d.cin; ++ci) {
      const float* wk = w.data() + (co * d.cin + ci) * d.kernel;
      Acc* __restrict gs0 = gx.data() + ci * d.len_in;
      for (std::size_t k = d.kernel; k-- > 0;) {
        const auto [a, b] = conv1d_tap_range(d, k);
        const Acc wv = static_cast<Acc>(wk[k]);
        const std::size_t off = k - d.padding;
        for (std::size_t p = a; p < b; ++p) {
          const Acc prod = wv * gr[p];
          gs0[p + off] += gr[p] != Acc{0} ? prod : Acc{0};
        }
      }
    }
  }
}

// Each tap sums over p in four interleaved partial sums (p mod 4), combined
// in a fixed order.
template <class Acc, class In>
void conv1d_weight_grad(const conv1d_dims& d, std::span<const Acc> gy, std::span<const In> x,
                        std::span<Acc> gw) {
  const std::size_t lo = d.len_out();
  for (std::size_t co = 0; co < d.cout; ++co) {
    const Acc* __restrict gr = gy.data() + co * lo;
    for (std::size_t ci = 0; ci < d.cin; ++ci) {
      Acc* gk = gw.data() + (co * d.cin + ci) * d.kernel;
      const In* __restrict xr = x.data() + ci * d.len_in;
      for (std::size_t k = 0; k < d.kernel; ++k) {
        const auto [a, b] = conv1d_tap_range(d, k);
        const std::size_t off = k - d.padding;
        auto term = [&](std::size_t p) {
          const In v = xr[p + off];
          const Acc prod = gr[p] * static_cast<Acc>(v);
          return (gr[p] != Acc{0}) & (v != In{0}) ? prod : Acc{0};
        };
        Acc s0{0}, s1{0}, s2{0}, s3{0};
        std::size_t p = a;
        for (; p + 4 <= b; p += 4) {
          s0 += term(p);
          s1 += term(p + 1);
          s2 += term(p + 2);
          s3 += term(p + 3);
        }
        for (; p < b; ++p) s0 += term(p);
        gk[k] += (s0 + s1) + (s2 + s3);
      }
    }
  }
}

}  // namespace kernels

/// W[out x in] times a binary input: a masked row sum.
inline tensor matvec(const tensor& weights, const bit_tensor& input) {
  if (weights.rank() != 2 || weights.dim(1) != input.numel())
    throw dimension_error("matvec: weights " + shape_str(weights.shape()) + " incompatible with input " +
                          shape_str(input.shape()));
  const auto x = input.unpack<float>();
  tensor out({weights.dim(0)});
  kernels::dense_forward<float, float>(weights.data(), weights.dim(0), weights.dim(1), x, out.data());
  return out;
}

/// Cross-correlation of W[Cout x Cin x K] over a binary input [Cin x L] with
/// symmetric zero padding. Output length is L + 2*padding - K + 1.
inline tensor conv1d(const tensor& weights, const bit_tensor& input, std::size_t padding) {
  if (weights.rank() != 3 || input.shape().size() != 2 || weights.dim(1) != input.shape()[0])
    throw dimension_error("conv1d: weights " + shape_str(weights.shape()) + " incompatible with input " +
                          shape_str(input.shape()));
  const kernels::conv1d_dims d{weights.dim(1), weights.dim(0), weights.dim(2), padding, input.shape()[1]};
  if (d.kernel > d.len_in + 2 * padding)
    throw dimension_error("conv1d: kernel " + std::to_string(d.kernel) + " larger than padded input " +
                          std::to_string(d.len_in + 2 * padding));
  const auto x = input.unpack<float>();
  tensor out({d.cout, d.len_out()});
  kernels::conv1d_forward<float, float>(weights.data(), d, x, out.data());
  return out;
}

/// Splits along the leading (channel) axis into n contiguous slabs.
template <class T>
std::vector<basic_tensor<T>> channel_split(const basic_tensor<T>& x, std::size_t n_groups) {
  const std::size_t c = x.dim(0);
  if (n_groups == 0 || c % n_groups != 0)
    throw dimension_error("channel_split: " + std::to_string(c) + " channels not divisible into " +
                          std::to_string(n_groups) + " groups");
  shape_t gshape = x.shape();
  gshape[0] = c / n_groups;
  const std::size_t stride = x.numel() / n_groups;
  std::vector<basic_tensor<T>> out;
  out.reserve(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    auto first = x.values().begin() + static_cast<std::ptrdiff_t>(g * stride);
    out.emplace_back(gshape, std::vector<T>(first, first + static_cast<std::ptrdiff_t>(stride)));
  }
  return out;
}

template <class T>
basic_tensor<T> channel_concat(const std::vector<basic_tensor<T>>& parts) {
  if (parts.empty()) throw dimension_error("channel_concat: no parts");
  shape_t shape = parts.front().shape();
  std::vector<T> data;
  std::size_t channels = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1))
      throw dimension_error("channel_concat: mismatched part shape " + shape_str(p.shape()));
    channels += p.dim(0);
    data.insert(data.end(), p.values().begin(), p.values().end());
  }
  shape[0] = channels;
  return basic_tensor<T>(std::move(shape), std::move(data));
}

}  // namespace efflif
