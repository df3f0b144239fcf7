#include "convmamba/tensor.hpp"

#include <sstream>

#include "convmamba/error.hpp"

namespace convmamba {

std::string ShapeString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t ShapeNumel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(ShapeNumel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (ShapeNumel(shape_) != data_.size()) {
    Fail(ErrorKind::kDimension, "shape " + ShapeString(shape_) + " needs " +
                                    std::to_string(ShapeNumel(shape_)) +
                                    " values, got " +
                                    std::to_string(data_.size()));
  }
}

Tensor Tensor::Scalar(double value) { return Tensor(Shape{1}, {value}); }

Tensor Tensor::FromRows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(n_rows * n_cols);
  for (const auto& row : rows) {
    if (row.size() != n_cols) {
      Fail(ErrorKind::kDimension, "ragged rows in tensor literal");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{n_rows, n_cols}, std::move(data));
}

Tensor Tensor::FromVector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

double Tensor::at(std::initializer_list<std::size_t> coord) const {
  return data_[FlatIndex(std::span<const std::size_t>(coord.begin(), coord.size()))];
}

double& Tensor::at(std::initializer_list<std::size_t> coord) {
  return data_[FlatIndex(std::span<const std::size_t>(coord.begin(), coord.size()))];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    Fail(ErrorKind::kContract,
         "item() on tensor of shape " + ShapeString(shape_));
  }
  return data_[0];
}

std::vector<std::size_t> Tensor::Strides() const {
  std::vector<std::size_t> strides(shape_.size(), 1);
  for (std::size_t i = shape_.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * shape_[i];
  }
  return strides;
}

std::size_t Tensor::FlatIndex(std::span<const std::size_t> coord) const {
  if (coord.size() != shape_.size()) {
    Fail(ErrorKind::kDimension, "coordinate rank " +
                                    std::to_string(coord.size()) +
                                    " for shape " + ShapeString(shape_));
  }
  std::size_t flat = 0;
  for (std::size_t i = 0; i < coord.size(); ++i) {
    if (coord[i] >= shape_[i]) {
      Fail(ErrorKind::kDimension, "coordinate out of range for shape " +
                                      ShapeString(shape_));
    }
    flat = flat * shape_[i] + coord[i];
  }
  return flat;
}

std::vector<std::size_t> Tensor::Coordinates(std::size_t flat) const {
  std::vector<std::size_t> coord(shape_.size());
  for (std::size_t i = shape_.size(); i-- > 0;) {
    coord[i] = flat % shape_[i];
    flat /= shape_[i];
  }
  return coord;
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (ShapeNumel(shape) != data_.size()) {
    Fail(ErrorKind::kDimension, "cannot reshape " + ShapeString(shape_) +
                                    " to " + ShapeString(shape));
  }
  return Tensor(std::move(shape), data_);
}

}  // namespace convmamba
