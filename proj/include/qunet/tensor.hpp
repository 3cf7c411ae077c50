#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qunet {

// Dense row-major real tensor with an optional gradient buffer of equal
// length. Shapes are (batch, channels, height, width) or any degenerate
// prefix of that; the layout is always contiguous row-major.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless ensure_grad() was called

  Tensor() = default;

  explicit Tensor(std::vector<int> s, double fill = 0.0)
      : shape(std::move(s)), data(static_cast<std::size_t>(count(shape)), fill) {}

  static long long count(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

  int size() const { return static_cast<int>(data.size()); }
  bool empty() const { return data.empty(); }
  int dims() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  // Flat offsets for 3-d (C,H,W) and 4-d (B,C,H,W) shapes.
  int idx3(int c, int y, int x) const { return (c * shape[1] + y) * shape[2] + x; }
  int idx4(int b, int c, int y, int x) const {
    return ((b * shape[1] + c) * shape[2] + y) * shape[3] + x;
  }

  double& at3(int c, int y, int x) { return data[static_cast<std::size_t>(idx3(c, y, x))]; }
  double at3(int c, int y, int x) const { return data[static_cast<std::size_t>(idx3(c, y, x))]; }
  double& at4(int b, int c, int y, int x) { return data[static_cast<std::size_t>(idx4(b, c, y, x))]; }
  double at4(int b, int c, int y, int x) const { return data[static_cast<std::size_t>(idx4(b, c, y, x))]; }
};

inline void require_shape(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace qunet
