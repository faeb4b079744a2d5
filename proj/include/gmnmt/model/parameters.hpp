#pragma once

#include <map>
#include <string>
#include <vector>

#include "gmnmt/core/rng.hpp"
#include "gmnmt/core/tensor.hpp"

namespace gmnmt {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// Ordered registry of trainable tensors. Names are unique; a tensor shared
/// between two roles is registered once.
class ParameterStore {
 public:
  Tensor create(const std::string& name, Shape shape);

  const std::vector<NamedParameter>& entries() const { return entries_; }
  std::vector<NamedParameter>& entries() { return entries_; }
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<NamedParameter> entries_;
  std::map<std::string, std::size_t> index_;
};

/// "enc.layer1.text.attn.w_q" -> "enc.text.attn": layer index and leaf removed.
std::string parameter_group(const std::string& name);

struct GroupCount {
  std::string group;
  std::size_t tensors = 0;
  std::size_t scalars = 0;
};
/// Per-group totals in first-appearance order.
std::vector<GroupCount> parameter_report(const ParameterStore& store);

void init_xavier_uniform(Tensor& t, Rng& rng);
void init_normal(Tensor& t, Rng& rng, double stddev);
void init_constant(Tensor& t, double value);

}  // namespace gmnmt
