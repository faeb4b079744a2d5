#include "gmnmt/model/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

Tensor ParameterStore::create(const std::string& name, Shape shape) {
  if (index_.count(name)) throw UsageError("duplicate parameter name " + name);
  Tensor t = Tensor::zeros(std::move(shape), true);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, t});
  return t;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter " + name);
  return entries_[it->second].tensor;
}

bool ParameterStore::contains(const std::string& name) const { return index_.count(name) != 0; }

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::string parameter_group(const std::string& name) {
  static const std::regex layer(R"(\.layer\d+)");
  std::string g = std::regex_replace(name, layer, "");
  // Keep at least two segments so embeddings stay distinct from their module.
  const auto dot = g.rfind('.');
  if (dot == std::string::npos || g.find('.') == dot) return g;
  return g.substr(0, dot);
}

std::vector<GroupCount> parameter_report(const ParameterStore& store) {
  std::vector<GroupCount> out;
  for (const auto& e : store.entries()) {
    const std::string g = parameter_group(e.name);
    auto it = std::find_if(out.begin(), out.end(), [&](const GroupCount& c) { return c.group == g; });
    if (it == out.end()) it = out.insert(out.end(), GroupCount{g, 0, 0});
    it->tensors += 1;
    it->scalars += e.tensor.numel();
  }
  return out;
}

void init_xavier_uniform(Tensor& t, Rng& rng) {
  if (t.rank() != 2) throw UsageError("xavier init expects a matrix");
  const double limit = std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
  for (double& v : t.mutable_data()) v = rng.uniform(-limit, limit);
}

void init_normal(Tensor& t, Rng& rng, double stddev) {
  for (double& v : t.mutable_data()) v = rng.normal(0.0, stddev);
}

void init_constant(Tensor& t, double value) {
  for (double& v : t.mutable_data()) v = value;
}

}  // namespace gmnmt
