#include "emocause/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "emocause/error.hpp"

namespace emocause {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimension of size 0 in " + shape_to_string(shape));
  }
}

const detail::Node& require(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw GraphError("use of an undefined tensor");
  return *node;
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  std::vector<double> data(numel(shape), value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  check_shape(shape);
  if (numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return from_node(std::move(node));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return from_data({r, c}, std::move(data), requires_grad);
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from_data({1, n}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return require(node_).shape; }

std::size_t Tensor::size() const { return require(node_).value.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  if (s.size() != 2) throw DimensionError("rows() on tensor of shape " + shape_to_string(s));
  return s[0];
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  if (s.size() != 2) throw DimensionError("cols() on tensor of shape " + shape_to_string(s));
  return s[1];
}

std::span<const double> Tensor::data() const { return require(node_).value; }

std::span<double> Tensor::mutable_data() {
  require(node_);
  return node_->value;
}

double Tensor::at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return require(node_).requires_grad; }

void Tensor::set_requires_grad(bool value) {
  require(node_);
  node_->requires_grad = value;
}

bool Tensor::has_grad() const {
  const auto& n = require(node_);
  return !n.grad.empty() && n.grad.size() == n.value.size();
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw GraphError("tensor has no gradient buffer");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require(node_);
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  require(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = require(node_);
  return from_data(n.shape, n.value, false);
}

void Tensor::backward() const {
  require(node_);
  if (node_->value.size() != 1) {
    throw GraphError("backward() requires a scalar loss, got shape " + shape_to_string(node_->shape));
  }
  if (node_->backward_done) throw GraphError("backward() already ran on this loss; rebuild the graph first");
  node_->backward_done = true;
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior buffers restart from zero so a subgraph shared by two losses
  // does not carry stale adjoints; leaves accumulate.
  for (detail::Node* n : order) {
    if (n->backward) {
      n->grad.assign(n->value.size(), 0.0);
    } else {
      n->ensure_grad();
    }
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

}  // namespace emocause
