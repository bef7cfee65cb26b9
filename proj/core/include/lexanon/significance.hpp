#pragma once

#include <span>

namespace lexanon {

struct PairedTTest {
  double t = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 0.0;  // P(T >= t): evidence that mean(a - b) > 0
};

/// Classic paired t statistic on a - b with a one-tailed p-value from
/// Student's t with n - 1 degrees of freedom. Throws PreconditionError for
/// mismatched lengths, n < 2, or zero variance of the differences.
PairedTTest paired_t_test_one_tailed(std::span<const double> a, std::span<const double> b);

}  // namespace lexanon
