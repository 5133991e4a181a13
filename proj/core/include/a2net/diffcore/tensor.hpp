#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace a2net::diff {

/// Extents of a batch-channel-height-width tensor. Data is row-major with
/// width varying fastest.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t numel() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  constexpr std::size_t item() const { return c * h * w; }
  constexpr std::size_t offset(std::size_t in, std::size_t ic, std::size_t ih,
                               std::size_t iw) const {
    return ((in * c + ic) * h + ih) * w + iw;
  }

  friend bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool recording();

 private:
  bool previous_;
};

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty means "no gradient yet"
  bool requires_grad = false;

  // Set only for results of recorded operations.
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Node&)> backward;

  /// Zero-initialized gradient storage, allocated on first use.
  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Reference-counted handle to a 4-D array with optional gradient.
///
/// Copies share storage. Results of operations are never mutated after
/// creation; only leaves (parameters, inputs) expose mutable data, and only
/// outside of a live recorded computation.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = detail::Node<T>;
  using BackwardFn = std::function<void(const Node&)>;

  /// Undefined handle; only defined() may be called on it.
  Tensor();
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return node_->data[node_->shape.offset(n, c, h, w)];
  }
  /// Value of a one-element tensor.
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return !node_->backward; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  /// Drops the gradient; a later backward starts from zero.
  void zero_grad() { node_->grad.clear(); }

  /// Reverse-mode sweep from this one-element tensor. Leaf gradients
  /// accumulate across calls; intermediate gradients are released.
  void backward() const;

  /// Deep copy as a fresh leaf with the same requires_grad flag.
  Tensor clone() const;
  /// Deep copy as a leaf that does not require grad.
  Tensor detach() const;

  /// Builds an operation result. The graph edge is recorded only when
  /// recording is enabled and some input requires grad.
  static Tensor make_result(Shape shape, std::vector<T> values,
                            std::span<const Tensor> inputs, BackwardFn backward);

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

/// Element-type conversion producing a leaf.
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  std::vector<To> values(src.data().begin(), src.data().end());
  Tensor<To> out(src.shape(), std::move(values));
  out.set_requires_grad(src.requires_grad());
  return out;
}

}  // namespace a2net::diff
