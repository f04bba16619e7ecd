#ifndef TRIMKS_MODEL_METRICS_HPP_
#define TRIMKS_MODEL_METRICS_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "trimks/ecdf.hpp"

namespace trimks {

/// M models evaluated on a shared test set of N' points: one row of logit
/// gaps per model, plus the true labels. Central table of every pipeline.
struct LogitGapMatrix {
  std::size_t n_models = 0;
  std::size_t n_points = 0;
  std::vector<double> gaps;          // row-major, n_models x n_points
  std::vector<int> labels;           // length n_points, each 0 or 1
  std::vector<std::string> model_ids;
  std::vector<std::string> point_ids;

  double at(std::size_t model, std::size_t point) const {
    return gaps[model * n_points + point];
  }
  double& at(std::size_t model, std::size_t point) {
    return gaps[model * n_points + point];
  }
  std::vector<double> row(std::size_t model) const;

  /// Dimension/label/finiteness consistency; throws ValidationError.
  void validate() const;
};

/// m = m_plus - m_minus; throws on non-finite inputs.
double logit_gap(double m_plus, double m_minus);

/// Predicted class: 1 when the gap is >= 0 (the boundary gap 0 maps to 1).
int predict(double gap);

/// Fraction of points where predict(gap) equals the label.
double test_accuracy(const std::vector<double>& gaps_row,
                     const std::vector<int>& labels);

/// Fraction of points where the two rows' predictions disagree.
double churn(const std::vector<double>& gaps_a, const std::vector<double>& gaps_b);

/// Leave-one-out ensemble gaps: per-point mean over every model except
/// `exclude`. Requires at least two models.
std::vector<double> looe_gaps(const LogitGapMatrix& matrix, std::size_t exclude);

/// Per-point mean over all models.
std::vector<double> ensemble_mean_gaps(const LogitGapMatrix& matrix);

Ecdf candidate_cdf(const LogitGapMatrix& matrix, std::size_t model);
Ecdf looe_cdf(const LogitGapMatrix& matrix, std::size_t exclude);

/// Normalized histogram with optional per-bin envelope across models.
/// Bins are right-open [e_i, e_{i+1}) except the last, which is closed.
struct HistogramData {
  std::vector<double> bin_edges;     // ascending, >= 2 edges
  std::vector<double> probabilities; // length edges-1, sums to 1
  std::vector<double> envelope_min;  // empty unless built by histogram_envelope
  std::vector<double> envelope_max;
};

/// Bins `gaps` into the given edges. Values outside [first, last] edge are
/// rejected unless `clip` pulls them into the end bins.
HistogramData histogram(const std::vector<double>& gaps,
                        const std::vector<double>& bin_edges, bool clip = false);

/// Histogram of the full-ensemble mean gaps, plus the min and max
/// probability each bin attains across the per-model histograms.
HistogramData histogram_envelope(const LogitGapMatrix& matrix,
                                 const std::vector<double>& bin_edges,
                                 bool clip = false);

}  // namespace trimks

#endif  // TRIMKS_MODEL_METRICS_HPP_
