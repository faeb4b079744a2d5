#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gmnmt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct TensorStorage {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major float64 array with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage. Values are
/// written once by the op that creates them; only parameters are updated in
/// place (by the optimizer), and gradients accumulate during backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// 2-D convenience: `Tensor::matrix({{1,2},{3,4}})`.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  /// Dimension size; negative indices count from the back.
  std::size_t dim(int axis) const;
  std::size_t numel() const { return s_->data.size(); }

  std::span<const double> data() const { return s_->data; }
  /// In-place access for parameter updates and test fixtures.
  std::span<double> mutable_data() { return s_->data; }
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return s_->requires_grad; }
  /// Enables gradient tracking and allocates a zeroed grad buffer.
  void set_requires_grad(bool on);
  std::span<const double> grad() const { return s_->grad; }
  /// Gradients accumulate through any handle, including const ones.
  std::span<double> mutable_grad() const { return s_->grad; }
  void zero_grad();

  /// Deep copy of data (no gradient, not tracked).
  Tensor detach_clone() const;
  bool same_storage(const Tensor& other) const { return s_ == other.s_; }
  bool all_finite() const;

 private:
  std::shared_ptr<detail::TensorStorage> s_;
};

}  // namespace gmnmt
