#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace partstack {

// Dense row-major tensor of doubles with an optional gradient buffer.
// 4-D tensors use NCHW layout throughout.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until ensure_grad()

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<double> v);

  int size() const { return static_cast<int>(values.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad();
  void zero_grad();

  bool all_finite() const;          // values only
  bool grad_all_finite() const;

  static int volume(const std::vector<int>& s);
  static std::string shape_string(const std::vector<int>& s);
  std::string shape_string() const { return shape_string(shape); }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape);
TensorPtr make_tensor(std::vector<int> shape, std::vector<double> values);

}  // namespace partstack
