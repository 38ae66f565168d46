#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ealab {

// Dense 64-bit float vector.
struct Tensor1 {
  std::vector<double> v;

  Tensor1() = default;
  explicit Tensor1(std::size_t n, double fill = 0.0) : v(n, fill) {}
  Tensor1(std::initializer_list<double> init) : v(init) {}

  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
};

// Dense row-major 64-bit float matrix.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), v(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return v[r * cols + c];
  }
  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }
  std::size_t size() const { return v.size(); }
};

[[noreturn]] void shape_error(const std::string& what);

inline void check_same_shape(const Tensor2& a, const Tensor2& b,
                             const char* op) {
  if (a.rows != b.rows || a.cols != b.cols)
    shape_error(std::string(op) + ": shape mismatch");
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// a * b^T without materializing the transpose.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
Tensor2 add(const Tensor2& a, const Tensor2& b);
Tensor1 add(const Tensor1& a, const Tensor1& b);
Tensor2 scale(const Tensor2& a, double s);
Tensor1 scale(const Tensor1& a, double s);
Tensor2 transpose(const Tensor2& a);
Tensor2 tanh_map(const Tensor2& a);
Tensor1 tanh_map(const Tensor1& a);

// Row-wise softmax; each output row is nonnegative and sums to 1.
Tensor2 row_softmax(const Tensor2& a);

// (x - mean) / sqrt(var + eps) * gain + bias, population variance.
Tensor1 layer_norm(const Tensor1& x, const Tensor1& gain, const Tensor1& bias,
                   double eps);

bool all_finite(std::span<const double> xs);

}  // namespace ealab
