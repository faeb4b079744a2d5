#include "gmnmt/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gmnmt/core/errors.hpp"

namespace gmnmt {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("tensor shape " + shape_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  Tensor t;
  t.s_ = std::make_shared<detail::TensorStorage>();
  t.s_->shape = std::move(shape);
  t.s_->data = std::move(values);
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from({r, c}, std::move(values), requires_grad);
}

std::size_t Tensor::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r)
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape()));
  return s_->shape[static_cast<std::size_t>(a)];
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return s_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw DimensionError("index rank mismatch");
  std::size_t off = 0;
  std::size_t i = 0;
  for (std::size_t v : index) {
    if (v >= s_->shape[i]) throw UsageError("index out of range");
    off = off * s_->shape[i] + v;
    ++i;
  }
  return s_->data[off];
}

void Tensor::set_requires_grad(bool on) {
  s_->requires_grad = on;
  if (on)
    s_->grad.assign(s_->data.size(), 0.0);
  else
    s_->grad.clear();
}

void Tensor::zero_grad() { std::fill(s_->grad.begin(), s_->grad.end(), 0.0); }

Tensor Tensor::detach_clone() const { return from(s_->shape, s_->data, false); }

bool Tensor::all_finite() const {
  return std::all_of(s_->data.begin(), s_->data.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace gmnmt
