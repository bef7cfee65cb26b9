#include "lexanon/significance.hpp"

#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "lexanon/error.hpp"

namespace lexanon {

PairedTTest paired_t_test_one_tailed(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw PreconditionError("paired t-test needs equal-length samples");
  const auto n = a.size();
  if (n < 2) throw PreconditionError("paired t-test needs at least two pairs");

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double variance = ss / static_cast<double>(n - 1);
  if (!(variance > 0.0)) throw PreconditionError("paired differences have zero variance");

  PairedTTest result;
  result.degrees_of_freedom = static_cast<int>(n - 1);
  result.t = mean / std::sqrt(variance / static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(result.degrees_of_freedom));
  result.p_value = boost::math::cdf(boost::math::complement(dist, result.t));
  return result;
}

}  // namespace lexanon
