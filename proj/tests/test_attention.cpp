#include "ealab/attention.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ealab/grad_check.hpp"
#include "ealab/rng.hpp"

namespace ealab {
namespace {

Tensor2 random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor2 m(r, c);
  for (double& x : m.v) x = rng.gaussian();
  return m;
}

void expect_row_stochastic_causal(const Tensor2& a, double tol = 1e-12) {
  for (std::size_t m = 0; m < a.rows; ++m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.cols; ++k) {
      if (k > m) {
        EXPECT_EQ(a(m, k), 0.0);
      } else {
        EXPECT_GE(a(m, k), 0.0);
        sum += a(m, k);
      }
    }
    EXPECT_NEAR(sum, 1.0, tol);
  }
}

TEST(Scores, ExamplesAndOracle) {
  Tensor2 eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  const Tensor2 z = scores(eye, eye);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_EQ(z(i, j), i == j ? 1.0 : 0.0);

  Rng rng(1);
  const Tensor2 q = random_matrix(5, 4, rng);
  const Tensor2 k = random_matrix(5, 4, rng);
  const Tensor2 zz = scores(q, k);
  const Tensor2 zneg = scores(q, scale(k, -1.0));
  for (std::size_t m = 0; m < 5; ++m)
    for (std::size_t j = 0; j < 5; ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < 4; ++i) dot += q(m, i) * k(j, i);
      EXPECT_NEAR(zz(m, j), dot, 1e-12);
      EXPECT_NEAR(zneg(m, j), -dot, 1e-12);
    }

  Tensor2 bad(4, 3);
  EXPECT_THROW(scores(q, bad), std::invalid_argument);
}

TEST(DpaWeights, Examples) {
  // row 1 has two equal unmasked scores
  Tensor2 z(2, 2);
  z(1, 0) = 0.7;
  z(1, 1) = 0.7;
  const Tensor2 a = dpa_weights(z, 1.0);
  EXPECT_EQ(a(0, 0), 1.0);  // single unmasked entry regardless of score
  EXPECT_NEAR(a(1, 0), 0.5, 1e-12);
  EXPECT_NEAR(a(1, 1), 0.5, 1e-12);

  Tensor2 z2(2, 2);
  z2(1, 0) = std::log(2.0);
  z2(1, 1) = 0.0;
  const Tensor2 a2 = dpa_weights(z2, 1.0);
  EXPECT_NEAR(a2(1, 0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(a2(1, 1), 1.0 / 3.0, 1e-12);
}

TEST(DpaWeights, LargeScoresStayFinite) {
  Tensor2 z(2, 2);
  z(1, 0) = 5000.0;
  z(1, 1) = -5000.0;
  const Tensor2 a = dpa_weights(z, 1.0);
  EXPECT_NEAR(a(1, 0), 1.0, 1e-12);
  EXPECT_EQ(a(1, 1), 0.0);
}

TEST(EaWeights, Examples) {
  // z = [1, -1]: both map to 0.5 before normalization
  Tensor2 z(2, 2);
  z(1, 0) = 1.0;
  z(1, 1) = -1.0;
  const Tensor2 a = ea_weights(z);
  EXPECT_NEAR(a(1, 0), 0.5, 1e-12);
  EXPECT_NEAR(a(1, 1), 0.5, 1e-12);

  // z = [3, 0]: 0.9 and 0 normalize to 1 and 0
  Tensor2 z2(2, 2);
  z2(1, 0) = 3.0;
  z2(1, 1) = 0.0;
  const Tensor2 a2 = ea_weights(z2);
  EXPECT_EQ(a2(1, 0), 1.0);
  EXPECT_EQ(a2(1, 1), 0.0);  // orthogonal suppression is exact

  // an all-zero row falls back to uniform
  Tensor2 z3(3, 3);
  z3(2, 0) = 2.0;  // row 2 non-degenerate, row 1 all zero
  const Tensor2 a3 = ea_weights(z3);
  EXPECT_NEAR(a3(1, 0), 0.5, 1e-12);
  EXPECT_NEAR(a3(1, 1), 0.5, 1e-12);
  EXPECT_EQ(a3(0, 0), 1.0);  // row 0 degenerate too: uniform over one entry
}

TEST(Kernels, RowStochasticCausalOnRandomDraws) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Tensor2 q = random_matrix(6, 3, rng);
    const Tensor2 k = random_matrix(6, 3, rng);
    const Tensor2 z = scores(q, k);
    expect_row_stochastic_causal(dpa_weights(z, 1.0));
    expect_row_stochastic_causal(ea_weights(z));
  }
}

TEST(Kernels, EaSignInvarianceDpaContrast) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor2 q = random_matrix(5, 3, rng);
    const Tensor2 k = random_matrix(5, 3, rng);
    const Tensor2 a = ea_weights(scores(q, k));
    const Tensor2 a_negq = ea_weights(scores(scale(q, -1.0), k));
    const Tensor2 a_negk = ea_weights(scores(q, scale(k, -1.0)));
    for (std::size_t i = 0; i < a.v.size(); ++i) {
      EXPECT_NEAR(a.v[i], a_negq.v[i], 1e-12);
      EXPECT_NEAR(a.v[i], a_negk.v[i], 1e-12);
    }
  }

  // DPA is not sign invariant: two keys with distinct scores flip order.
  Tensor2 q(2, 2), k(2, 2);
  q(1, 0) = 1.0;
  k(0, 0) = 1.0;
  k(1, 0) = -1.0;
  const Tensor2 a = dpa_weights(scores(q, k), 1.0);
  const Tensor2 a_neg = dpa_weights(scores(scale(q, -1.0), k), 1.0);
  EXPECT_GT(std::abs(a(1, 0) - a_neg(1, 0)), 0.4);
}

TEST(Kernels, EaUnnormalizedTermsBounded) {
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double z = rng.gaussian(0.0, 10.0);
    const double u = z * z / (1.0 + z * z);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Kernels, DpaRowShiftInvariance) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor2 z = random_matrix(5, 5, rng);
    const Tensor2 a = dpa_weights(z, 1.3);
    const double shift = rng.gaussian(0.0, 3.0);
    Tensor2 shifted = z;
    for (std::size_t k = 0; k < 5; ++k) shifted(3, k) += shift;
    const Tensor2 a2 = dpa_weights(shifted, 1.3);
    for (std::size_t k = 0; k < 5; ++k)
      EXPECT_NEAR(a(3, k), a2(3, k), 1e-12);
  }
}

TEST(ApplyAttention, ExamplesAndOracle) {
  Rng rng(6);
  const Tensor2 v = random_matrix(4, 3, rng);
  Tensor2 eye(4, 4);
  for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 1.0;
  const Tensor2 self = apply_attention(eye, v);
  for (std::size_t i = 0; i < v.v.size(); ++i) EXPECT_EQ(self.v[i], v.v[i]);

  Tensor2 uniform2(4, 4);
  uniform2(1, 0) = 0.5;
  uniform2(1, 1) = 0.5;
  const Tensor2 mixed = apply_attention(uniform2, v);
  for (std::size_t c = 0; c < 3; ++c)
    EXPECT_NEAR(mixed(1, c), 0.5 * (v(0, c) + v(1, c)), 1e-12);

  const Tensor2 a = random_matrix(4, 4, rng);
  const Tensor2 av = apply_attention(a, v);
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) acc += a(m, k) * v(k, c);
      EXPECT_NEAR(av(m, c), acc, 1e-12);
    }
}

TEST(LogHeatmap, FloorsAtMinusTwelve) {
  Tensor2 a(1, 3);
  a.v = {1.0, 0.0, 0.01};
  const Tensor2 lg = attention_log_heatmap(a);
  EXPECT_EQ(lg.v[0], 0.0);
  EXPECT_EQ(lg.v[1], -12.0);
  EXPECT_NEAR(lg.v[2], -2.0, 1e-12);
}

// Both kernels inside a scalar loss L = sum c_mk a_mk(QK^T) against central
// differences over the Q and K entries.
TEST(Kernels, GradientsPassFiniteDifferenceCheck) {
  for (const AttentionKind kind : {AttentionKind::DPA, AttentionKind::EA}) {
    Rng rng(7);
    const std::size_t nc = 4, d = 3;
    Tensor2 q = random_matrix(nc, d, rng);
    Tensor2 k = random_matrix(nc, d, rng);
    const Tensor2 c = random_matrix(nc, nc, rng);
    AttentionKernelSpec kernel{kind, 0.9};

    GradCheckProblem problem;
    problem.loss = [&] {
      const Tensor2 a = attention_weights(kernel, scores(q, k));
      double acc = 0.0;
      for (std::size_t m = 0; m < nc; ++m)
        for (std::size_t j = 0; j <= m; ++j) acc += c(m, j) * a(m, j);
      return acc;
    };
    problem.analytic_gradient = [&] {
      const Tensor2 z = scores(q, k);
      const Tensor2 a = attention_weights(kernel, z);
      Tensor2 da(nc, nc);
      for (std::size_t m = 0; m < nc; ++m)
        for (std::size_t j = 0; j <= m; ++j) da(m, j) = c(m, j);
      const Tensor2 dz = attention_weights_backward(kernel, z, a, da);
      Tensor2 dq(nc, d), dk(nc, d);
      for (std::size_t m = 0; m < nc; ++m)
        for (std::size_t j = 0; j <= m; ++j)
          for (std::size_t i = 0; i < d; ++i) {
            dq(m, i) += dz(m, j) * k(j, i);
            dk(j, i) += dz(m, j) * q(m, i);
          }
      std::vector<double> grad;
      grad.insert(grad.end(), dq.v.begin(), dq.v.end());
      grad.insert(grad.end(), dk.v.begin(), dk.v.end());
      return grad;
    };
    for (double& x : q.v) problem.coords.push_back(&x);
    for (double& x : k.v) problem.coords.push_back(&x);

    const GradCheckReport report =
        finite_difference_check(problem, 1e-5, 1e-4, rng);
    EXPECT_TRUE(report.pass) << to_string(kind)
                             << " max_rel_err=" << report.max_rel_err;
  }
}

TEST(MatrixCsv, RowMajorOutput) {
  Tensor2 m(2, 2);
  m.v = {1.0, 0.25, -3.0, 0.0};
  std::ostringstream os;
  write_matrix_csv(os, m);
  EXPECT_EQ(os.str(), "1,0.25\n-3,0\n");
}

}  // namespace
}  // namespace ealab
