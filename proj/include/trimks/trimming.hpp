#ifndef TRIMKS_TRIMMING_HPP_
#define TRIMKS_TRIMMING_HPP_

#include <cstddef>
#include <vector>

#include "trimks/ecdf.hpp"

namespace trimks {

/// Additive slack on the slope constraint of a trimming function:
/// h(u') - h(u) <= (u' - u) / (1 - alpha) + kSlopeSlack per segment.
/// Absorbs rounding in the cumulative interval propagation so that, e.g.,
/// the identity function stays feasible at alpha = 0.
inline constexpr double kSlopeSlack = 1e-12;

/// Piecewise-linear monotone map h : [0,1] -> [0,1] with h(0) = 0,
/// h(1) = 1 and per-segment growth bounded by 1/(1-alpha). Composing
/// h with a CDF F yields an alpha-trimming of F: a distribution absolutely
/// continuous w.r.t. F whose density never exceeds 1/(1-alpha).
struct TrimmingFunction {
  std::vector<double> breakpoints;  // strictly increasing, 0 = u_0 < ... < u_K = 1
  std::vector<double> values;       // nondecreasing, values[0] = 0, values[K] = 1
  double alpha = 0.0;               // trimming level in [0,1)

  /// Linear interpolation between breakpoints; u must lie in [0,1].
  double eval(double u) const;

  /// Throws ValidationError unless all structural invariants hold
  /// (endpoints, monotonicity, slope bound for `alpha`).
  void validate() const;
};

/// Right-continuous step function with atoms `xs` and post-jump values
/// `vals`; 0 to the left of the support. This is the shape of a trimmed
/// CDF h(F(x)): unlike an Ecdf its values are not multiples of 1/n.
struct StepCdf {
  std::vector<double> xs;    // strictly increasing
  std::vector<double> vals;  // nondecreasing, same length

  double eval(double x) const;
};

/// The trimmed CDF x -> h(F(x)). Validates h first. Every jump of the
/// result is at most 1/(1-alpha) times the corresponding jump of F plus
/// kSlopeSlack, which is the testable form of the density bound.
StepCdf apply_trimming(const TrimmingFunction& h, const Ecdf& f);

/// sup_x |target(x) - trimmed(x)|, exact for step functions.
double sup_distance(const Ecdf& target, const StepCdf& trimmed);

/// Feasibility kernel: given both CDFs evaluated on their merged support,
/// decides whether some valid trimming function h of level alpha keeps
/// |target_vals[i] - h(source_vals[i])| <= t for every i.
///
/// Works by forward interval propagation over the distinct source levels:
/// the reachable set of h-values at each level is an interval, clipped by
/// the band the target imposes there and grown by at most
/// delta_u/(1-alpha) per step; h(0) = 0 and h(1) = 1 pin the ends.
bool band_feasible(const std::vector<double>& target_vals,
                   const std::vector<double>& source_vals, double alpha,
                   double t);

/// Outcome of one trimmed-distance minimization.
struct TrimmedDistanceResult {
  double distance = 0.0;      // min over alpha-trimmings of sup |target - h(source)|
  TrimmingFunction witness;   // attains `distance` up to the bisection tolerance
  double alpha = 0.0;
  int iterations = 0;         // bisection steps taken
};

/// Minimal Kolmogorov distance from `target` to the alpha-trimming set of
/// `source`: bisection on t over [0, ks_distance(target, source)] with
/// band_feasible as the feasibility test. The returned distance is the
/// smallest feasible t to within `tol` (one-sided: true minimum <= distance
/// < minimum + tol), and the witness is reconstructed by a backward pass
/// choosing the midpoint of each feasible interval.
TrimmedDistanceResult min_trimmed_ks(const Ecdf& target, const Ecdf& source,
                                     double alpha, double tol = 1e-9);

/// Brute-force reference for min_trimmed_ks: exhaustive dynamic program
/// over h-values discretized to `grid_step` at each distinct source level.
/// Only intended for tiny instances; refuses sources with more than 8
/// distinct values. Agreement with min_trimmed_ks is within 2 * grid_step.
double trimmed_ks_oracle(const Ecdf& target, const Ecdf& source, double alpha,
                         double grid_step);

}  // namespace trimks

#endif  // TRIMKS_TRIMMING_HPP_
