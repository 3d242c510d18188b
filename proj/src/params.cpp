#include "emocause/params.hpp"

#include <algorithm>

#include "emocause/error.hpp"

namespace emocause {

Tensor& ParamStore::add(std::string name, Tensor tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  tensor.set_requires_grad(true);
  entries_.push_back({std::move(name), std::move(tensor)});
  return entries_.back().tensor;
}

Tensor& ParamStore::add_uniform(std::string name, Shape shape, double scale, Rng& rng) {
  std::vector<double> values(numel(shape));
  for (double& v : values) v = rng.uniform(-scale, scale);
  return add(std::move(name), Tensor::from_data(std::move(shape), std::move(values)));
}

Tensor& ParamStore::add_constant(std::string name, Shape shape, double value) {
  return add(std::move(name), Tensor::full(std::move(shape), value));
}

bool ParamStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw NotFoundError("no parameter named '" + name + "'");
}

Tensor& ParamStore::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParamStore&>(*this).get(name));
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.tensor.size();
  return n;
}

void ParamStore::zero_grad() {
  for (Entry& e : entries_) e.tensor.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const Entry& e : entries_) out.add(e.name, e.tensor.detach());
  return out;
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) throw DimensionError("parameter sets differ in size");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& src = other.entries_[i];
    Entry& dst = entries_[i];
    if (src.name != dst.name || src.tensor.shape() != dst.tensor.shape()) {
      throw DimensionError("parameter '" + dst.name + "' does not match '" + src.name + "'");
    }
    std::copy(src.tensor.data().begin(), src.tensor.data().end(), dst.tensor.mutable_data().begin());
  }
}

}  // namespace emocause
