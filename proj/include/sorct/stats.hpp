#pragma once

#include <vector>

#include "sorct/types.hpp"

namespace sorct {

struct TTestResult {
  Scalar mean_diff = 0.0;
  Scalar ci_lo = 0.0;
  Scalar ci_hi = 0.0;
  Scalar t_stat = 0.0;
  Scalar p_value = 1.0;
  int df = 0;
  bool degenerate = false;  // zero variance with nonzero mean
};

// Two-sided paired t-test on samples paired by index, with a (1-alpha)
// confidence interval for the mean difference.
TTestResult paired_t_test(const std::vector<Scalar>& sample_a,
                          const std::vector<Scalar>& sample_b,
                          Scalar alpha = 0.05);

// Regularized incomplete beta function I_x(a, b).
Scalar incomplete_beta(Scalar a, Scalar b, Scalar x);

Scalar student_t_cdf(Scalar t, int df);

// Inverse CDF by bisection; prob in (0, 1).
Scalar student_t_quantile(Scalar prob, int df);

// Rank correlation with average ranks on ties.
Scalar spearman_rho(const std::vector<Scalar>& x, const std::vector<Scalar>& y);

}  // namespace sorct
