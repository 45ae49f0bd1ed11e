#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace wavattack::grad {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major array of doubles with a same-shaped gradient slot.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> grad() noexcept { return grad_; }
  std::span<const double> grad() const noexcept { return grad_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  void zero_grad();
  // Reinterprets the same elements under a new shape of equal element count.
  void reshape(Shape shape);

  bool operator==(const Tensor& other) const { return shape_ == other.shape_ && values_ == other.values_; }

 private:
  Shape shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
};

}  // namespace wavattack::grad
