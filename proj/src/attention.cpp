#include "ealab/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace ealab {

void AttentionKernelSpec::validate() const {
  if (!(beta > 0.0))
    throw std::invalid_argument("attention beta must be positive");
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "dpa") return AttentionKind::DPA;
  if (name == "ea") return AttentionKind::EA;
  throw std::invalid_argument("unknown attention kernel \"" + name +
                              "\" (expected \"dpa\" or \"ea\")");
}

std::string to_string(AttentionKind kind) {
  return kind == AttentionKind::DPA ? "dpa" : "ea";
}

Tensor2 scores(const Tensor2& q, const Tensor2& k) {
  if (q.rows != k.rows || q.cols != k.cols)
    shape_error("scores: Q and K must both be (N_con, d)");
  return matmul_nt(q, k);
}

Tensor2 dpa_weights(const Tensor2& z, double beta) {
  if (z.rows != z.cols) shape_error("dpa_weights: score matrix must be square");
  Tensor2 a(z.rows, z.cols);
  for (std::size_t m = 0; m < z.rows; ++m) {
    const double* zr = z.row(m);
    double* ar = a.row(m);
    double mx = zr[0];
    for (std::size_t k = 1; k <= m; ++k) mx = std::max(mx, zr[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
      ar[k] = std::exp(beta * (zr[k] - mx));
      sum += ar[k];
    }
    for (std::size_t k = 0; k <= m; ++k) ar[k] /= sum;
  }
  return a;
}

Tensor2 ea_weights(const Tensor2& z) {
  if (z.rows != z.cols) shape_error("ea_weights: score matrix must be square");
  Tensor2 a(z.rows, z.cols);
  for (std::size_t m = 0; m < z.rows; ++m) {
    const double* zr = z.row(m);
    double* ar = a.row(m);
    double norm = 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
      const double z2 = zr[k] * zr[k];
      ar[k] = z2 / (1.0 + z2);
      norm += ar[k];
    }
    if (norm < kEaDegenerateThreshold) {
      const double uniform = 1.0 / static_cast<double>(m + 1);
      for (std::size_t k = 0; k <= m; ++k) ar[k] = uniform;
    } else {
      for (std::size_t k = 0; k <= m; ++k) ar[k] /= norm;
    }
  }
  return a;
}

Tensor2 attention_weights(const AttentionKernelSpec& kernel, const Tensor2& z) {
  kernel.validate();
  return kernel.kind == AttentionKind::DPA ? dpa_weights(z, kernel.beta)
                                           : ea_weights(z);
}

Tensor2 apply_attention(const Tensor2& a, const Tensor2& v) {
  if (a.cols != v.rows) shape_error("apply_attention: shape mismatch");
  return matmul(a, v);
}

Tensor2 attention_weights_backward(const AttentionKernelSpec& kernel,
                                   const Tensor2& z, const Tensor2& a,
                                   const Tensor2& da) {
  check_same_shape(z, a, "attention_weights_backward");
  check_same_shape(z, da, "attention_weights_backward");
  Tensor2 dz(z.rows, z.cols);
  for (std::size_t m = 0; m < z.rows; ++m) {
    const double* zr = z.row(m);
    const double* ar = a.row(m);
    const double* dar = da.row(m);
    double* dzr = dz.row(m);
    // Row-stochastic normalization couples the row: subtract the weighted
    // mean of the incoming gradient.
    double dot = 0.0;
    for (std::size_t k = 0; k <= m; ++k) dot += dar[k] * ar[k];
    if (kernel.kind == AttentionKind::DPA) {
      for (std::size_t k = 0; k <= m; ++k)
        dzr[k] = kernel.beta * ar[k] * (dar[k] - dot);
    } else {
      double norm = 0.0;
      for (std::size_t k = 0; k <= m; ++k) {
        const double z2 = zr[k] * zr[k];
        norm += z2 / (1.0 + z2);
      }
      if (norm < kEaDegenerateThreshold) continue;  // uniform fallback row
      for (std::size_t k = 0; k <= m; ++k) {
        const double denom = 1.0 + zr[k] * zr[k];
        const double du = (dar[k] - dot) / norm;
        dzr[k] = du * 2.0 * zr[k] / (denom * denom);
      }
    }
  }
  return dz;
}

Tensor2 attention_log_heatmap(const Tensor2& a) {
  Tensor2 out = a;
  for (double& x : out.v) x = std::log10(std::max(x, kLogHeatmapFloor));
  return out;
}

void write_matrix_csv(std::ostream& os, const Tensor2& m) {
  char buf[32];
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.12g", m(r, c));
      if (c) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

void write_matrix_csv_file(const std::string& path, const Tensor2& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_matrix_csv(os, m);
}

}  // namespace ealab
