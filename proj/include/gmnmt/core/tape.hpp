#pragma once

#include <functional>
#include <vector>

#include "gmnmt/core/tensor.hpp"

namespace gmnmt {

/// Ordered log of executed differentiable operations.
///
/// Ops append a backward closure when recording is enabled and at least one
/// input requires a gradient. `backward` replays the closures in reverse and
/// consumes the tape; a second call is a usage error.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_ && !consumed_; }
  bool consumed() const { return consumed_; }
  std::size_t size() const { return entries_.size(); }

  void record(std::function<void()> backward_rule);

  /// Seeds d(loss)/d(loss) = 1 and accumulates into every reachable
  /// requires_grad tensor.
  void backward(const Tensor& loss);

 private:
  bool recording_;
  bool consumed_ = false;
  std::vector<std::function<void()>> entries_;
};

}  // namespace gmnmt
