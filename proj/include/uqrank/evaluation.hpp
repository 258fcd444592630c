#pragma once

#include <span>
#include <vector>

#include "uqrank/core_data.hpp"

namespace uqrank {

// Fraction of the relevant candidates that appear in the top `cutoff` of a
// ranked list of n candidates.
double recall_at_k(const RankedList& ranked, const std::vector<int>& labels, std::size_t n, std::size_t cutoff);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  // Set when every difference equals the same non-zero constant: the sample
  // variance is zero, t is infinite and p is reported as 0.
  bool degenerate_variance = false;
};

// Paired Student's t-test on per-query differences a_i - b_i, two-sided,
// n - 1 degrees of freedom.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta function I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

}  // namespace uqrank
