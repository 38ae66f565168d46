#include "ealab/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ealab {

GradCheckReport finite_difference_check(const GradCheckProblem& problem,
                                        double h, double tol, Rng& rng,
                                        std::size_t min_coords) {
  if (h <= 0.0) throw std::invalid_argument("finite_difference_check: h <= 0");
  const std::size_t n = problem.coords.size();
  if (n == 0)
    throw std::invalid_argument("finite_difference_check: no coordinates");

  const std::vector<double> analytic = problem.analytic_gradient();
  if (analytic.size() != n)
    throw std::invalid_argument(
        "finite_difference_check: gradient size does not match coords");

  // Partial Fisher-Yates picks the subsample without bias.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(n, std::max(min_coords, std::size_t{1}));
  for (std::size_t i = 0; i < take; ++i) {
    const auto j =
        i + static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n - i)));
    std::swap(order[i], order[j]);
  }

  GradCheckReport report;
  report.n_checked = take;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t c = order[i];
    double* coord = problem.coords[c];
    const double saved = *coord;
    *coord = saved + h;
    const double plus = problem.loss();
    *coord = saved - h;
    const double minus = problem.loss();
    *coord = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw std::runtime_error(
          "finite_difference_check: non-finite loss encountered");
    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic[c];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_coord = c;
      report.analytic_at_worst = a;
      report.numeric_at_worst = numeric;
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace ealab
