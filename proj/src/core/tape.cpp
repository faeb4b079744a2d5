#include "gmnmt/core/tape.hpp"

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

void Tape::record(std::function<void()> backward_rule) {
  if (consumed_) throw UsageError("recording onto a consumed tape");
  entries_.push_back(std::move(backward_rule));
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw UsageError("backward on a consumed tape");
  if (loss.numel() != 1) throw UsageError("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  consumed_ = true;
  if (!loss.requires_grad()) return;
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
}

}  // namespace gmnmt
