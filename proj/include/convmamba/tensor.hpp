#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace convmamba {

using Shape = std::vector<std::size_t>;

std::string ShapeString(const Shape& shape);
std::size_t ShapeNumel(const Shape& shape);

// Dense row-major array of doubles. A zero dimension gives an empty tensor
// (empty datasets, zero-length sequences).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double value);
  static Tensor FromRows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor FromVector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  const double& operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double at(std::initializer_list<std::size_t> coord) const;
  double& at(std::initializer_list<std::size_t> coord);

  // Scalar value of a one-element tensor.
  double item() const;

  std::vector<std::size_t> Strides() const;
  std::size_t FlatIndex(std::span<const std::size_t> coord) const;
  std::vector<std::size_t> Coordinates(std::size_t flat) const;

  Tensor Reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace convmamba
