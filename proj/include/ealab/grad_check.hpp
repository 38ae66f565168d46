#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ealab/rng.hpp"

namespace ealab {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::size_t n_checked = 0;
  std::size_t worst_coord = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckProblem {
  // Scalar loss at the current parameter values.
  std::function<double()> loss;
  // Full analytic gradient at the current parameter values, in coordinate
  // order matching `coords`.
  std::function<std::vector<double>()> analytic_gradient;
  // Mutable parameter coordinates.
  std::vector<double*> coords;
};

// Central differences (loss(p+h) - loss(p-h)) / 2h against the analytic
// gradient on a random subsample of at least `min_coords` coordinates (all of
// them when there are fewer). Relative error uses a max(|a|,|b|,1e-8)
// denominator. Throws on a non-finite loss.
GradCheckReport finite_difference_check(const GradCheckProblem& problem,
                                        double h, double tol, Rng& rng,
                                        std::size_t min_coords = 200);

}  // namespace ealab
