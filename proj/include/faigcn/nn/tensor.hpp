// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense row-major tensors with tape-free reverse-mode differentiation: every
// op result keeps shared handles to its inputs plus a closure that pushes its
// gradient back. backward() walks that DAG once in reverse topological order
// and then releases it.

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace faigcn::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

namespace detail {

// Value-initialization becomes default-initialization, so sized buffers that
// are fully overwritten skip the zero-fill pass. Storage is cache-line
// aligned: vectorized kernels peel scalar iterations up to the first aligned
// address, so a fixed alignment keeps every reduction order, and therefore
// every result bit, independent of where the heap placed the buffer.
template <class T>
struct UninitAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  UninitAllocator() = default;
  template <class U>
  UninitAllocator(const UninitAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t n) noexcept { ::operator delete(p, n * sizeof(T), kAlignment); }

  template <class U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }

  template <class U>
  friend bool operator==(const UninitAllocator&, const UninitAllocator<U>&) noexcept {
    return true;
  }
};

}  // namespace detail

/// Tensor storage. `Buffer b(n)` leaves the elements uninitialized.
using Buffer = std::vector<double, detail::UninitAllocator<double>>;

namespace detail {

struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;  // lazily allocated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  double* grad_data() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad.data();
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  /// Mutable storage; intended for leaves (parameters, inputs).
  std::span<double> mutable_values() { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient after backward(); empty when nothing reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return std::span<double>(node_->grad_data(), numel()); }
  void zero_grad();

  /// Same values, no history, requires_grad = false.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires a
/// gradient, then frees the intermediate graph. Throws ContractError unless
/// `loss` holds exactly one element.
void backward(const Tensor& loss);

/// While alive, ops on this thread record no history.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

}  // namespace faigcn::nn
