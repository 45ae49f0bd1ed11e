#include "wavattack/grad/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "wavattack/error.hpp"

namespace wavattack::grad {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  const std::size_t n = element_count(shape_);
  values_.assign(n, 0.0);
  grad_.assign(n, 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (element_count(shape_) != values_.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " does not match " + std::to_string(values_.size()) +
                     " values");
  }
  grad_.assign(values_.size(), 0.0);
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

void Tensor::reshape(Shape shape) {
  if (element_count(shape) != values_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  shape_ = std::move(shape);
}

}  // namespace wavattack::grad
