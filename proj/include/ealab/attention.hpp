#pragma once

#include <iosfwd>
#include <string>

#include "ealab/tensor.hpp"

namespace ealab {

// DPA: a_mk proportional to exp(beta * Q_m.K_k)  (softmax over k <= m)
// EA:  a_mk proportional to z^2 / (1 + z^2) with z = Q_m.K_k
enum class AttentionKind { DPA, EA };

struct AttentionKernelSpec {
  AttentionKind kind = AttentionKind::DPA;
  double beta = 1.0;  // DPA temperature; EA has none

  void validate() const;
};

AttentionKind parse_attention_kind(const std::string& name);  // "dpa" | "ea"
std::string to_string(AttentionKind kind);

// Below the fallback threshold on an EA row normalizer the row degenerates to
// a uniform distribution over the unmasked entries, with zero gradient.
inline constexpr double kEaDegenerateThreshold = 1e-30;
inline constexpr double kLogHeatmapFloor = 1e-12;

// z = Q K^T; Q and K are (N_con, d).
Tensor2 scores(const Tensor2& q, const Tensor2& k);

// Causally masked row-stochastic weights. Masked entries (k > m) are exactly
// zero; each row sums to one. DPA is stabilized by per-row max subtraction.
Tensor2 dpa_weights(const Tensor2& z, double beta);
Tensor2 ea_weights(const Tensor2& z);
Tensor2 attention_weights(const AttentionKernelSpec& kernel, const Tensor2& z);

// y = a V
Tensor2 apply_attention(const Tensor2& a, const Tensor2& v);

// dL/dz from dL/da for the given kernel; `a` as returned by the matching
// forward call. Masked entries of the result are zero, as are degenerate EA
// rows.
Tensor2 attention_weights_backward(const AttentionKernelSpec& kernel,
                                   const Tensor2& z, const Tensor2& a,
                                   const Tensor2& da);

// Elementwise log10(max(a, 1e-12)) for plotting.
Tensor2 attention_log_heatmap(const Tensor2& a);

void write_matrix_csv(std::ostream& os, const Tensor2& m);
void write_matrix_csv_file(const std::string& path, const Tensor2& m);

}  // namespace ealab
