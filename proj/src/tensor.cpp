#include "cnmt/tensor.hpp"

#include <sstream>

namespace cnmt {

std::size_t shape_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), values(shape_count(shape), fill) {
  if (shape.empty() || shape.size() > 2)
    throw ShapeError("tensor rank must be 1 or 2, got " + shape_string(shape));
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : shape(std::move(dims)), values(std::move(data)) {
  if (shape.empty() || shape.size() > 2)
    throw ShapeError("tensor rank must be 1 or 2, got " + shape_string(shape));
  if (values.size() != shape_count(shape))
    throw ShapeError("tensor of shape " + shape_string(shape) + " given " +
                     std::to_string(values.size()) + " values");
}

std::size_t Tensor::rows() const { return shape.size() == 1 ? 1 : shape[0]; }
std::size_t Tensor::cols() const { return shape.size() == 1 ? shape[0] : shape[1]; }

}  // namespace cnmt
