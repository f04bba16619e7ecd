#ifndef TRIMKS_ECDF_HPP_
#define TRIMKS_ECDF_HPP_

#include <cstddef>
#include <vector>

namespace trimks {

/// Empirical CDF of a finite sample: the right-continuous step function
/// F(x) = (#samples <= x) / n. Values land on the lattice {0, 1/n, ..., 1};
/// ties are represented by step heights k/n rather than jitter so the
/// sup-norm machinery downstream stays exact.
class Ecdf {
 public:
  /// Sorts and validates; throws ValidationError on empty input or any
  /// non-finite value.
  explicit Ecdf(std::vector<double> samples);

  /// F(x); throws ValidationError if x is NaN.
  double eval(double x) const;

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted_samples() const { return sorted_; }
  double min_sample() const { return sorted_.front(); }
  double max_sample() const { return sorted_.back(); }

 private:
  std::vector<double> sorted_;
};

/// Sorted, deduplicated union of the two supports. The sup of |F - G| over
/// the reals is attained at one of these points.
std::vector<double> merged_support(const Ecdf& f, const Ecdf& g);

/// Kolmogorov-Smirnov distance sup_x |F(x) - G(x)|, computed exactly by
/// walking the merged jump points.
double ks_distance(const Ecdf& f, const Ecdf& g);

/// Evaluates both CDFs at every merged support point. Output vectors are
/// nondecreasing, end at 1, and feed the trimming feasibility machinery.
void evaluate_on_merged_support(const Ecdf& target, const Ecdf& source,
                                std::vector<double>& target_vals,
                                std::vector<double>& source_vals);

/// Two-sample sup-norm threshold tau solving 2*exp(-2*n*tau^2) = delta,
/// i.e. tau = sqrt(ln(2/delta) / (2n)). The constant 2 in the tail bound is
/// only valid for n > 458, so smaller n is refused rather than warned:
/// applying it below the validity condition would be anti-conservative.
/// Throws ValidationError for n <= 458 or delta outside (0,1).
double dkw_threshold(std::size_t n, double delta);

/// Smallest sample count dkw_threshold accepts (n > 458).
inline constexpr std::size_t kMinDkwSamples = 459;

}  // namespace trimks

#endif  // TRIMKS_ECDF_HPP_
