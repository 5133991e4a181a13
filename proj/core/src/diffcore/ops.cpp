#include "a2net/diffcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "a2net/errors.hpp"

namespace a2net::diff {

void ConvSpec::validate() const {
  if (stride < 1) throw ShapeError("conv: stride must be >= 1");
  if (kernel_h < 1 || kernel_w < 1) throw ShapeError("conv: kernel extents must be >= 1");
  if (in_channels < 1 || out_channels < 1) throw ShapeError("conv: channel counts must be >= 1");
}

std::size_t ConvSpec::conv_extent(std::size_t in, std::size_t kernel, const char* axis) const {
  const std::size_t padded = in + 2 * padding;
  if (padded < kernel) {
    throw ShapeError(std::string("conv2d: non-positive output ") + axis + " (input " +
                     std::to_string(in) + ", kernel " + std::to_string(kernel) + ", padding " +
                     std::to_string(padding) + ")");
  }
  return (padded - kernel) / stride + 1;
}

std::size_t ConvSpec::transpose_extent(std::size_t in, std::size_t kernel,
                                       const char* axis) const {
  if (in == 0 || (in - 1) * stride + kernel <= 2 * padding) {
    throw ShapeError(std::string("conv_transpose2d: non-positive output ") + axis +
                     " (input " + std::to_string(in) + ", kernel " + std::to_string(kernel) +
                     ", padding " + std::to_string(padding) + ")");
  }
  return (in - 1) * stride + kernel - 2 * padding;
}

ConvSpec ConvSpec::mirrored() const {
  ConvSpec out = *this;
  std::swap(out.in_channels, out.out_channels);
  return out;
}

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

struct Geometry {
  std::size_t channels, height, width;    // image side
  std::size_t kh, kw, stride, pad;
  std::size_t out_h, out_w;               // column side
  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return out_h * out_w; }
};

// Output columns [lo, hi) whose input column ow * stride - pad + j is inside [0, width).
std::pair<std::size_t, std::size_t> valid_span(const Geometry& g, std::size_t j) {
  const auto pad = static_cast<std::ptrdiff_t>(g.pad), off = static_cast<std::ptrdiff_t>(j);
  const auto s = static_cast<std::ptrdiff_t>(g.stride), W = static_cast<std::ptrdiff_t>(g.width);
  // Smallest ow with ow * s >= pad - off, and smallest ow with ow * s >= W + pad - off.
  const auto ceil_div = [s](std::ptrdiff_t a) { return a <= 0 ? 0 : (a + s - 1) / s; };
  const auto lo = std::min<std::ptrdiff_t>(ceil_div(pad - off), g.out_w);
  const auto hi = std::min<std::ptrdiff_t>(ceil_div(W + pad - off), g.out_w);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
}

// col[(c, i, j), (oh - oh0, ow)] = img[c, oh*s - p + i, ow*s - p + j] for
// oh in [oh0, oh1), zero outside the image.
template <typename T>
void im2col(const T* img, const Geometry& g, std::size_t oh0, std::size_t oh1, T* col) {
  const std::size_t cols = (oh1 - oh0) * g.out_w;
  for (std::size_t j = 0; j < g.kw; ++j) {
    const auto [lo, hi] = valid_span(g, j);
    for (std::size_t c = 0; c < g.channels; ++c) {
      const T* plane = img + c * g.height * g.width;
      for (std::size_t i = 0; i < g.kh; ++i) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * cols;
        for (std::size_t oh = oh0; oh < oh1; ++oh) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                                   static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + (oh - oh0) * g.out_w;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height) || lo == hi) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(y) * g.width + lo * g.stride + j - g.pad;
          std::fill(dst, dst + lo, T(0));
          if (g.stride == 1) {
            std::copy(src, src + (hi - lo), dst + lo);
          } else {
            for (std::size_t ow = lo; ow < hi; ++ow) dst[ow] = src[(ow - lo) * g.stride];
          }
          std::fill(dst + hi, dst + g.out_w, T(0));
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back into the image.
template <typename T>
void col2im(const T* col, const Geometry& g, std::size_t oh0, std::size_t oh1, T* img) {
  const std::size_t cols = (oh1 - oh0) * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = img + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const auto [lo, hi] = valid_span(g, j);
        if (lo == hi) continue;
        const T* row = col + ((c * g.kh + i) * g.kw + j) * cols;
        for (std::size_t oh = oh0; oh < oh1; ++oh) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                                   static_cast<std::ptrdiff_t>(g.pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = plane + static_cast<std::size_t>(y) * g.width + lo * g.stride + j - g.pad;
          const T* src = row + (oh - oh0) * g.out_w;
          if (g.stride == 1) {
            for (std::size_t ow = lo; ow < hi; ++ow) dst[ow - lo] += src[ow];
          } else {
            for (std::size_t ow = lo; ow < hi; ++ow) dst[(ow - lo) * g.stride] += src[ow];
          }
        }
      }
    }
  }
}

// Output rows per im2col block, sized so one column block stays cache resident.
template <typename T>
std::size_t block_rows(const Geometry& g) {
  constexpr std::size_t kBlockBytes = std::size_t{1} << 19;
  const std::size_t per_row = g.rows() * g.out_w * sizeof(T);
  return std::clamp<std::size_t>(kBlockBytes / std::max<std::size_t>(per_row, 1), 1, g.out_h);
}

template <typename T>
void check_bias(const Tensor<T>& bias, std::size_t channels, const char* op) {
  if (bias.defined() && bias.numel() != channels) {
    throw ShapeError(std::string(op) + ": bias has " + std::to_string(bias.numel()) +
                     " elements, expected " + std::to_string(channels));
  }
}

template <typename T>
void add_bias(std::vector<T>& out, const Tensor<T>& bias, const Shape& shape) {
  if (!bias.defined()) return;
  const auto b = bias.data();
  const std::size_t plane = shape.plane();
  for (std::size_t n = 0; n < shape.n; ++n) {
    for (std::size_t c = 0; c < shape.c; ++c) {
      T* dst = out.data() + (n * shape.c + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += b[c];
    }
  }
}

template <typename T>
void accumulate_bias_grad(const Tensor<T>& bias, const std::vector<T>& grad_out,
                          const Shape& shape) {
  if (!bias.defined() || !bias.requires_grad()) return;
  auto gb = bias.node()->grad_buffer();
  const std::size_t plane = shape.plane();
  for (std::size_t c = 0; c < shape.c; ++c) {
    double acc = 0.0;
    for (std::size_t n = 0; n < shape.n; ++n) {
      const T* src = grad_out.data() + (n * shape.c + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) acc += src[p];
    }
    gb[c] += static_cast<T>(acc);
  }
}

template <typename T>
std::vector<Tensor<T>> inputs_of(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& c) {
  std::vector<Tensor<T>> v{a, b};
  if (c.defined()) v.push_back(c);
  return v;
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

template <typename T, typename F, typename G>
Tensor<T> unary(const Tensor<T>& x, F forward, G derivative) {
  const auto src = x.data();
  std::vector<T> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = forward(src[i]);
  const Tensor<T> inputs[] = {x};
  return Tensor<T>::make_result(
      x.shape(), std::move(out), inputs, [x, derivative](const detail::Node<T>& self) {
        auto gx = x.node()->grad_buffer();
        const auto xs = x.data();
        for (std::size_t i = 0; i < gx.size(); ++i) {
          gx[i] += self.grad[i] * derivative(xs[i], self.data[i]);
        }
      });
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const ConvSpec& spec) {
  spec.validate();
  const Shape& is = input.shape();
  const Shape expected_w{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w};
  if (weight.shape() != expected_w) {
    throw ShapeError("conv2d: weight shape " + weight.shape().str() + ", expected " +
                     expected_w.str());
  }
  if (is.c != spec.in_channels) {
    throw ShapeError("conv2d: input channels " + std::to_string(is.c) + ", expected " +
                     std::to_string(spec.in_channels));
  }
  check_bias(bias, spec.out_channels, "conv2d");

  const Geometry g{is.c,
                   is.h,
                   is.w,
                   spec.kernel_h,
                   spec.kernel_w,
                   spec.stride,
                   spec.padding,
                   spec.conv_extent(is.h, spec.kernel_h, "height"),
                   spec.conv_extent(is.w, spec.kernel_w, "width")};
  const Shape os{is.n, spec.out_channels, g.out_h, g.out_w};
  const std::size_t rows = g.rows(), cols = g.cols();

  const std::size_t block = block_rows<T>(g);
  const auto oc = static_cast<Eigen::Index>(spec.out_channels);
  const auto span_of = [out_w = g.out_w](std::size_t oh0, std::size_t oh1) {
    return std::pair{static_cast<Eigen::Index>(oh0 * out_w),
                     static_cast<Eigen::Index>((oh1 - oh0) * out_w)};
  };

  std::vector<T> out(os.numel());
  std::vector<T> col(rows * block * g.out_w);
  const CMapR<T> w(weight.data().data(), oc, static_cast<Eigen::Index>(rows));
  for (std::size_t n = 0; n < is.n; ++n) {
    MapR<T> o(out.data() + n * os.item(), oc, static_cast<Eigen::Index>(cols));
    for (std::size_t oh0 = 0; oh0 < g.out_h; oh0 += block) {
      const std::size_t oh1 = std::min(g.out_h, oh0 + block);
      const auto [first, width] = span_of(oh0, oh1);
      im2col(input.data().data() + n * is.item(), g, oh0, oh1, col.data());
      const CMapR<T> c(col.data(), static_cast<Eigen::Index>(rows), width);
      o.middleCols(first, width).noalias() = w * c;
    }
  }
  add_bias(out, bias, os);

  const auto inputs = inputs_of(input, weight, bias);
  return Tensor<T>::make_result(
      os, std::move(out), inputs,
      [input, weight, bias, g, os, block, span_of](const detail::Node<T>& self) {
        const Shape& is = input.shape();
        const std::size_t rows = g.rows(), cols = g.cols();
        const auto oc = static_cast<Eigen::Index>(os.c);
        const CMapR<T> w(weight.data().data(), oc, static_cast<Eigen::Index>(rows));
        const bool want_w = weight.requires_grad(), want_x = input.requires_grad();
        std::vector<T> col(rows * block * g.out_w);
        std::vector<T> dw;
        if (want_w) dw.assign(os.c * rows, T(0));
        MapR<T> gw(dw.data(), want_w ? oc : 0, static_cast<Eigen::Index>(rows));
        for (std::size_t n = 0; n < is.n; ++n) {
          const CMapR<T> go(self.grad.data() + n * os.item(), oc, static_cast<Eigen::Index>(cols));
          for (std::size_t oh0 = 0; oh0 < g.out_h; oh0 += block) {
            const std::size_t oh1 = std::min(g.out_h, oh0 + block);
            const auto [first, width] = span_of(oh0, oh1);
            MapR<T> c(col.data(), static_cast<Eigen::Index>(rows), width);
            if (want_w) {
              im2col(input.data().data() + n * is.item(), g, oh0, oh1, col.data());
              gw.noalias() += go.middleCols(first, width) * c.transpose();
            }
            if (want_x) {
              c.noalias() = w.transpose() * go.middleCols(first, width);
              col2im(col.data(), g, oh0, oh1, input.node()->grad_buffer().data() + n * is.item());
            }
          }
        }
        if (want_w) {
          auto g_w = weight.node()->grad_buffer();
          for (std::size_t i = 0; i < dw.size(); ++i) g_w[i] += dw[i];
        }
        accumulate_bias_grad(bias, self.grad, os);
      });
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, const ConvSpec& spec) {
  spec.validate();
  const Shape& is = input.shape();
  const Shape expected_w{spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w};
  if (weight.shape() != expected_w) {
    throw ShapeError("conv_transpose2d: weight shape " + weight.shape().str() + ", expected " +
                     expected_w.str());
  }
  if (is.c != spec.in_channels) {
    throw ShapeError("conv_transpose2d: input channels " + std::to_string(is.c) + ", expected " +
                     std::to_string(spec.in_channels));
  }
  check_bias(bias, spec.out_channels, "conv_transpose2d");

  const std::size_t oh = spec.transpose_extent(is.h, spec.kernel_h, "height");
  const std::size_t ow = spec.transpose_extent(is.w, spec.kernel_w, "width");
  // The output image plays the role of the convolution input.
  const Geometry g{spec.out_channels, oh,          ow,          spec.kernel_h, spec.kernel_w,
                   spec.stride,       spec.padding, is.h,        is.w};
  const Shape os{is.n, spec.out_channels, oh, ow};
  const std::size_t rows = g.rows(), cols = g.cols();
  const auto ic = static_cast<Eigen::Index>(spec.in_channels);

  const std::size_t block = block_rows<T>(g);
  const auto span_of = [out_w = g.out_w](std::size_t oh0, std::size_t oh1) {
    return std::pair{static_cast<Eigen::Index>(oh0 * out_w),
                     static_cast<Eigen::Index>((oh1 - oh0) * out_w)};
  };

  std::vector<T> out(os.numel(), T(0));
  std::vector<T> col(rows * block * g.out_w);
  const CMapR<T> w(weight.data().data(), ic, static_cast<Eigen::Index>(rows));
  for (std::size_t n = 0; n < is.n; ++n) {
    const CMapR<T> x(input.data().data() + n * is.item(), ic, static_cast<Eigen::Index>(cols));
    for (std::size_t oh0 = 0; oh0 < g.out_h; oh0 += block) {
      const std::size_t oh1 = std::min(g.out_h, oh0 + block);
      const auto [first, width] = span_of(oh0, oh1);
      MapR<T> c(col.data(), static_cast<Eigen::Index>(rows), width);
      c.noalias() = w.transpose() * x.middleCols(first, width);
      col2im(col.data(), g, oh0, oh1, out.data() + n * os.item());
    }
  }
  add_bias(out, bias, os);

  const auto inputs = inputs_of(input, weight, bias);
  return Tensor<T>::make_result(
      os, std::move(out), inputs,
      [input, weight, bias, g, os, block, span_of](const detail::Node<T>& self) {
        const Shape& is = input.shape();
        const std::size_t rows = g.rows(), cols = g.cols();
        const auto ic = static_cast<Eigen::Index>(is.c);
        const CMapR<T> w(weight.data().data(), ic, static_cast<Eigen::Index>(rows));
        const bool want_w = weight.requires_grad(), want_x = input.requires_grad();
        std::vector<T> col(rows * block * g.out_w);
        std::vector<T> dw;
        if (want_w) dw.assign(is.c * rows, T(0));
        MapR<T> gw(dw.data(), want_w ? ic : 0, static_cast<Eigen::Index>(rows));
        for (std::size_t n = 0; n < is.n; ++n) {
          const CMapR<T> x(input.data().data() + n * is.item(), ic, static_cast<Eigen::Index>(cols));
          for (std::size_t oh0 = 0; oh0 < g.out_h; oh0 += block) {
            const std::size_t oh1 = std::min(g.out_h, oh0 + block);
            const auto [first, width] = span_of(oh0, oh1);
            im2col(self.grad.data() + n * os.item(), g, oh0, oh1, col.data());
            const CMapR<T> gc(col.data(), static_cast<Eigen::Index>(rows), width);
            if (want_x) {
              MapR<T> gx(input.node()->grad_buffer().data() + n * is.item(), ic,
                         static_cast<Eigen::Index>(cols));
              gx.middleCols(first, width).noalias() += w * gc;
            }
            if (want_w) gw.noalias() += x.middleCols(first, width) * gc.transpose();
          }
        }
        if (want_w) {
          auto g_w = weight.node()->grad_buffer();
          for (std::size_t i = 0; i < dw.size(); ++i) g_w[i] += dw[i];
        }
        accumulate_bias_grad(bias, self.grad, os);
      });
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> inputs) {
  if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& first = inputs[0].shape();
  std::size_t channels = 0;
  for (const auto& t : inputs) {
    const Shape& s = t.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: batch/spatial mismatch " + s.str() + " vs " +
                       first.str());
    }
    channels += s.c;
  }
  const Shape os{first.n, channels, first.h, first.w};
  std::vector<T> out(os.numel());
  const std::size_t plane = os.plane();
  for (std::size_t n = 0; n < os.n; ++n) {
    T* dst = out.data() + n * os.item();
    for (const auto& t : inputs) {
      const std::size_t len = t.shape().c * plane;
      const T* src = t.data().data() + n * len;
      dst = std::copy(src, src + len, dst);
    }
  }
  std::vector<Tensor<T>> kept(inputs.begin(), inputs.end());
  return Tensor<T>::make_result(os, std::move(out), inputs,
                                [kept, os](const detail::Node<T>& self) {
    const std::size_t plane = os.plane();
    for (std::size_t n = 0; n < os.n; ++n) {
      const T* src = self.grad.data() + n * os.item();
      for (const auto& t : kept) {
        const std::size_t len = t.shape().c * plane;
        if (t.requires_grad()) {
          T* dst = t.node()->grad_buffer().data() + n * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
        src += len;
      }
    }
  });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count) {
  const Shape& is = input.shape();
  if (count == 0 || begin + count > is.c) {
    throw ShapeError("slice_channels: channels [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + is.str());
  }
  const Shape os{is.n, count, is.h, is.w};
  std::vector<T> out(os.numel());
  const std::size_t len = count * is.plane();
  for (std::size_t n = 0; n < is.n; ++n) {
    const T* src = input.data().data() + n * is.item() + begin * is.plane();
    std::copy(src, src + len, out.data() + n * len);
  }
  const Tensor<T> inputs[] = {input};
  return Tensor<T>::make_result(os, std::move(out), inputs,
                                [input, begin, len](const detail::Node<T>& self) {
    const Shape& is = input.shape();
    auto gx = input.node()->grad_buffer();
    for (std::size_t n = 0; n < is.n; ++n) {
      T* dst = gx.data() + n * is.item() + begin * is.plane();
      const T* src = self.grad.data() + n * len;
      for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return unary(
      x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(
      x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset) {
  return unary(
      x, [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  const Tensor<T> inputs[] = {a, b};
  return Tensor<T>::make_result(a.shape(), std::move(out), inputs,
                                [a, b](const detail::Node<T>& self) {
    for (const auto* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto g = t->node()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  const Tensor<T> inputs[] = {a, b};
  return Tensor<T>::make_result(a.shape(), std::move(out), inputs,
                                [a, b](const detail::Node<T>& self) {
    if (a.requires_grad()) {
      auto g = a.node()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b.requires_grad()) {
      auto g = b.node()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  const Tensor<T> inputs[] = {a, b};
  return Tensor<T>::make_result(a.shape(), std::move(out), inputs,
                                [a, b](const detail::Node<T>& self) {
    if (a.requires_grad()) {
      auto g = a.node()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b.data()[i];
    }
    if (b.requires_grad()) {
      auto g = b.node()->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a.data()[i];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  for (T v : x.data()) acc += static_cast<double>(v);
  const double n = static_cast<double>(x.numel());
  const Tensor<T> inputs[] = {x};
  return Tensor<T>::make_result(Shape{1, 1, 1, 1}, {static_cast<T>(acc / n)}, inputs,
                                [x, n](const detail::Node<T>& self) {
    auto g = x.node()->grad_buffer();
    const T share = static_cast<T>(static_cast<double>(self.grad[0]) / n);
    for (auto& v : g) v += share;
  });
}

template <typename T>
Tensor<T> repeat_item(const Tensor<T>& input, std::size_t index, std::size_t count) {
  const Shape& is = input.shape();
  if (index >= is.n) throw ShapeError("repeat_item: item " + std::to_string(index) + " of " + is.str());
  const Shape os{count, is.c, is.h, is.w};
  std::vector<T> out(os.numel());
  const T* src = input.data().data() + index * is.item();
  for (std::size_t n = 0; n < count; ++n) std::copy(src, src + is.item(), out.data() + n * is.item());
  const Tensor<T> inputs[] = {input};
  return Tensor<T>::make_result(os, std::move(out), inputs,
                                [input, index, os](const detail::Node<T>& self) {
    T* dst = input.node()->grad_buffer().data() + index * os.item();
    for (std::size_t n = 0; n < os.n; ++n) {
      const T* src = self.grad.data() + n * os.item();
      for (std::size_t i = 0; i < os.item(); ++i) dst[i] += src[i];
    }
  });
}

#define A2NET_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                            const ConvSpec&);                                                 \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                      const ConvSpec&);                                       \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                             \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> relu(const Tensor<T>&);                                                  \
  template Tensor<T> tanh_act(const Tensor<T>&);                                              \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scale(const Tensor<T>&, T);                                              \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                         \
  template Tensor<T> mean(const Tensor<T>&);                                                  \
  template Tensor<T> repeat_item(const Tensor<T>&, std::size_t, std::size_t);

A2NET_INSTANTIATE_OPS(float)
A2NET_INSTANTIATE_OPS(double)

#undef A2NET_INSTANTIATE_OPS

}  // namespace a2net::diff
