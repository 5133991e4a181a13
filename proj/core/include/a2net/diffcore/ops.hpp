#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "a2net/diffcore/tensor.hpp"

namespace a2net::diff {

/// Geometry of a 2-D convolution.
///
/// For conv2d the weight is [out_channels, in_channels, kernel_h, kernel_w].
/// For conv_transpose2d it is [in_channels, out_channels, kernel_h, kernel_w],
/// so that conv_transpose2d(., W) is the adjoint of conv2d(., W) with the
/// same weight tensor and mirrored channel counts.
struct ConvSpec {
  std::size_t out_channels = 1;
  std::size_t in_channels = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;

  void validate() const;
  std::size_t conv_extent(std::size_t in, std::size_t kernel, const char* axis) const;
  std::size_t transpose_extent(std::size_t in, std::size_t kernel, const char* axis) const;
  /// Channel counts swapped, for the transposed direction.
  ConvSpec mirrored() const;
};

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvSpec& spec);

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, const ConvSpec& spec);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> inputs);

/// Channels [begin, begin + count) of every batch item.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& x);

/// Gradient passes where lo <= x <= hi.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset);

/// Mean over all elements as a one-element tensor, accumulated in double.
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

/// Batch of `count` copies of item `index`.
template <typename T>
Tensor<T> repeat_item(const Tensor<T>& input, std::size_t index, std::size_t count);

}  // namespace a2net::diff
