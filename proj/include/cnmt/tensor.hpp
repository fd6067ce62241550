#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnmt {

/// Raised when operand shapes do not conform; the message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major array of doubles. Rank 1 and 2 are used throughout; a
/// rank-1 tensor of length n behaves as a 1 x n row.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  // Empty unless the tensor is tracked for differentiation.
  std::vector<double> grad;

  Tensor() = default;
  Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor row(std::vector<double> data) {
    const std::size_t n = data.size();
    return Tensor({1, n}, std::move(data));
  }
  static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

  std::size_t size() const { return values.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool tracked() const { return !grad.empty(); }
  void track() { grad.assign(values.size(), 0.0); }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
};

std::string shape_string(const std::vector<std::size_t>& shape);
std::size_t shape_count(const std::vector<std::size_t>& shape);

}  // namespace cnmt
