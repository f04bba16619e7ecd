// Test-only reference for the trimmed KS distance, independent of the
// bisection + interval-propagation route in the library.
//
// Unrolling the chain of constraints on h over the distinct source levels
// u_1 < ... < u_K (with virtual endpoints h(0) = 0, h(1) = 1, slope cap
// s = 1/(1-alpha), and band T_max_j - t <= h(u_j) <= T_min_j + t) shows the
// smallest feasible t is the largest of a closed set of pairwise bounds:
//
//   t >= (Tmax_j - Tmin_i - (u_j - u_i) s) / 2   for i <= j   (climb i -> j)
//   t >= (Tmax_i - Tmin_j) / 2                   for i <= j   (monotonicity)
//   t >=  Tmax_j - u_j s                                      (climb from 0)
//   t >=  1 - Tmin_i - (1 - u_i) s                            (climb to 1)
//   t >=  0
//
// Each bound is necessary; sufficiency follows because the forward
// reachable set at every level is an interval whose endpoints are exactly
// the binding chains above, so when every pairwise bound holds the
// intervals stay nonempty all the way to h(1) = 1.
#ifndef TRIMKS_TESTS_TRIM_REFERENCE_HPP_
#define TRIMKS_TESTS_TRIM_REFERENCE_HPP_

#include <algorithm>
#include <vector>

#include "trimks/ecdf.hpp"

namespace trimks::testref {

inline double trimmed_ks_pairwise(const Ecdf& target, const Ecdf& source,
                                  double alpha) {
  const std::vector<double> support = merged_support(target, source);
  // Group merged points by distinct source level.
  std::vector<double> u, tmin, tmax;
  for (double x : support) {
    const double su = source.eval(x);
    const double tv = target.eval(x);
    if (!u.empty() && su == u.back()) {
      tmin.back() = std::min(tmin.back(), tv);
      tmax.back() = std::max(tmax.back(), tv);
    } else {
      u.push_back(su);
      tmin.push_back(tv);
      tmax.push_back(tv);
    }
  }
  const double s = 1.0 / (1.0 - alpha);
  double t = 0.0;
  const std::size_t k = u.size();
  for (std::size_t j = 0; j < k; ++j) {
    t = std::max(t, tmax[j] - u[j] * s);                    // climb from h(0)=0
    t = std::max(t, 1.0 - tmin[j] - (1.0 - u[j]) * s);      // climb to h(1)=1
    for (std::size_t i = 0; i <= j; ++i) {
      t = std::max(t, 0.5 * (tmax[j] - tmin[i] - (u[j] - u[i]) * s));
      t = std::max(t, 0.5 * (tmax[i] - tmin[j]));
    }
  }
  return t;
}

}  // namespace trimks::testref

#endif  // TRIMKS_TESTS_TRIM_REFERENCE_HPP_
