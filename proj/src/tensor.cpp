#include "ealab/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace ealab {

void shape_error(const std::string& what) {
  throw std::invalid_argument(what);
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows) shape_error("matmul: inner dimensions differ");
  Tensor2 out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    const double* ar = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = ar[k];
      const double* br = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) o[j] += aik * br[j];
    }
  }
  return out;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.cols) shape_error("matmul_nt: inner dimensions differ");
  Tensor2 out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* o = out.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* br = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += ar[k] * br[k];
      o[j] = acc;
    }
  }
  return out;
}

Tensor2 add(const Tensor2& a, const Tensor2& b) {
  check_same_shape(a, b, "add");
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
  return out;
}

Tensor1 add(const Tensor1& a, const Tensor1& b) {
  if (a.size() != b.size()) shape_error("add: length mismatch");
  Tensor1 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor2 scale(const Tensor2& a, double s) {
  Tensor2 out = a;
  for (double& x : out.v) x *= s;
  return out;
}

Tensor1 scale(const Tensor1& a, double s) {
  Tensor1 out = a;
  for (double& x : out.v) x *= s;
  return out;
}

Tensor2 transpose(const Tensor2& a) {
  Tensor2 out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

Tensor2 tanh_map(const Tensor2& a) {
  Tensor2 out = a;
  for (double& x : out.v) x = std::tanh(x);
  return out;
}

Tensor1 tanh_map(const Tensor1& a) {
  Tensor1 out = a;
  for (double& x : out.v) x = std::tanh(x);
  return out;
}

Tensor2 row_softmax(const Tensor2& a) {
  Tensor2 out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ar = a.row(i);
    double* o = out.row(i);
    double mx = ar[0];
    for (std::size_t j = 1; j < a.cols; ++j) mx = std::max(mx, ar[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      o[j] = std::exp(ar[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < a.cols; ++j) o[j] /= sum;
  }
  return out;
}

Tensor1 layer_norm(const Tensor1& x, const Tensor1& gain, const Tensor1& bias,
                   double eps) {
  if (x.size() != gain.size() || x.size() != bias.size())
    shape_error("layer_norm: length mismatch");
  const std::size_t n = x.size();
  if (n == 0) return {};
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Tensor1 out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = (x[i] - mean) * inv_std * gain[i] + bias[i];
  return out;
}

bool all_finite(std::span<const double> xs) {
  for (double x : xs)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace ealab
