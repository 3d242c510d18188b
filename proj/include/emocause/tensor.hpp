#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace emocause {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  // Empty until the node takes part in a backward pass.
  std::vector<double> grad;
  bool requires_grad = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into its parents' grads (accumulating).
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

// Dense row-major array of doubles taking part in a reverse-mode gradient
// graph. Copies share the underlying node; use `clone()` for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Leading dimension of a rank-2 tensor.
  std::size_t rows() const;
  // Trailing dimension of a rank-2 tensor.
  std::size_t cols() const;

  std::span<const double> data() const;
  // Writable view of the values. Only meaningful for leaf tensors; writing
  // into an interior node does not update its consumers.
  std::span<double> mutable_data();
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Leaf copy of the values with no graph history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  // Reverse-mode sweep from this scalar. Throws GraphError when the tensor is
  // not a scalar or when backward already ran from it.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

inline void backward(const Tensor& loss) { loss.backward(); }

// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

}  // namespace emocause
