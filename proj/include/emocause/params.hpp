#pragma once

#include <string>
#include <utility>
#include <vector>

#include "emocause/rng.hpp"
#include "emocause/tensor.hpp"

namespace emocause {

// Ordered collection of named trainable leaves. Order is insertion order and
// is what checkpoints and optimizer state follow.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  // Adds a leaf with requires_grad set. Duplicate names -> ConfigError.
  Tensor& add(std::string name, Tensor tensor);
  Tensor& add_uniform(std::string name, Shape shape, double scale, Rng& rng);
  Tensor& add_constant(std::string name, Shape shape, double value);

  bool contains(const std::string& name) const;
  // Throws NotFoundError for unknown names.
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_values() const;

  void zero_grad();
  // Deep copy of every value (fresh leaves, no shared nodes).
  ParamStore clone() const;
  // Overwrites values from `other`, which must have identical names/shapes.
  void assign_values(const ParamStore& other);

 private:
  std::vector<Entry> entries_;
};

}  // namespace emocause
