#include "partstack/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace partstack {

int Tensor::volume(const std::vector<int>& s) {
  int n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive, got " + shape_string(s));
    n *= d;
  }
  return n;
}

std::string Tensor::shape_string(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  values.assign(static_cast<std::size_t>(volume(shape)), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (volume(shape) != static_cast<int>(values.size())) {
    throw std::invalid_argument("tensor value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_string(shape));
  }
}

void Tensor::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
  if (!grad.empty()) grad.assign(values.size(), 0.0);
}

bool Tensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::grad_all_finite() const {
  for (double g : grad) {
    if (!std::isfinite(g)) return false;
  }
  return true;
}

TensorPtr make_tensor(std::vector<int> shape) { return std::make_shared<Tensor>(std::move(shape)); }

TensorPtr make_tensor(std::vector<int> shape, std::vector<double> values) {
  return std::make_shared<Tensor>(std::move(shape), std::move(values));
}

}  // namespace partstack
