#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace tae {

// Dense row-major float64 tensor, rank 1 (vector) or 2 (matrix).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor vec(std::vector<double> values);
  static Tensor scalar(double v);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape[0]; }
  std::size_t cols() const { return shape[1]; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool is_scalar() const { return size() == 1; }
  bool all_finite() const;

  double l2_norm() const;
};

std::string shape_str(const Tensor& t);

}  // namespace tae
