// SPDX-License-Identifier: Apache-2.0

#include "coral8/tensor.hpp"

#include <cmath>
#include <sstream>

namespace coral8 {

std::string to_string(const Shape& dims) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << " x ";
    os << dims[i];
  }
  os << ')';
  return os.str();
}

std::size_t element_count(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Tensor::Tensor(Shape dims, double fill) : dims_(std::move(dims)) {
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + to_string(dims_));
  data_.assign(element_count(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + to_string(dims_));
  if (element_count(dims_) != data_.size())
    throw ShapeError("dims " + to_string(dims_) + " do not match " +
                     std::to_string(data_.size()) + " values");
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, std::vector<double>{value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values));
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  if (dims_.size() < 2) return 1;
  return dims_[0];
}

std::size_t Tensor::cols() const {
  if (dims_.empty()) return 0;
  return dims_.back();
}

Tensor Tensor::reshaped(Shape dims) const {
  if (element_count(dims) != data_.size())
    throw ShapeError("cannot reshape " + to_string(dims_) + " to " + to_string(dims));
  return Tensor(std::move(dims), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(dims_));
  return data_[0];
}

}  // namespace coral8
