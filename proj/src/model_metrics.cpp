#include "trimks/model_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trimks/errors.hpp"

namespace trimks {

std::vector<double> LogitGapMatrix::row(std::size_t model) const {
  if (model >= n_models) {
    throw ValidationError("LogitGapMatrix::row: model index out of range");
  }
  return std::vector<double>(gaps.begin() + static_cast<std::ptrdiff_t>(model * n_points),
                             gaps.begin() + static_cast<std::ptrdiff_t>((model + 1) * n_points));
}

void LogitGapMatrix::validate() const {
  if (n_models == 0 || n_points == 0) {
    throw ValidationError("LogitGapMatrix: empty dimensions");
  }
  if (gaps.size() != n_models * n_points) {
    throw ValidationError("LogitGapMatrix: gap storage does not match dimensions");
  }
  if (labels.size() != n_points) {
    throw ValidationError("LogitGapMatrix: label count does not match points");
  }
  for (int label : labels) {
    if (label != 0 && label != 1) {
      throw ValidationError("LogitGapMatrix: labels must be 0 or 1");
    }
  }
  for (double gap : gaps) {
    if (!std::isfinite(gap)) {
      throw ValidationError("LogitGapMatrix: non-finite gap value");
    }
  }
  if (!model_ids.empty() && model_ids.size() != n_models) {
    throw ValidationError("LogitGapMatrix: model_ids size mismatch");
  }
  if (!point_ids.empty() && point_ids.size() != n_points) {
    throw ValidationError("LogitGapMatrix: point_ids size mismatch");
  }
}

double logit_gap(double m_plus, double m_minus) {
  if (!std::isfinite(m_plus) || !std::isfinite(m_minus)) {
    throw ValidationError("logit_gap: non-finite logit");
  }
  return m_plus - m_minus;
}

int predict(double gap) { return gap >= 0.0 ? 1 : 0; }

double test_accuracy(const std::vector<double>& gaps_row,
                     const std::vector<int>& labels) {
  if (gaps_row.size() != labels.size() || gaps_row.empty()) {
    throw ValidationError("test_accuracy: length mismatch or empty input");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gaps_row.size(); ++i) {
    if (predict(gaps_row[i]) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gaps_row.size());
}

double churn(const std::vector<double>& gaps_a, const std::vector<double>& gaps_b) {
  if (gaps_a.size() != gaps_b.size() || gaps_a.empty()) {
    throw ValidationError("churn: length mismatch or empty input");
  }
  std::size_t flips = 0;
  for (std::size_t i = 0; i < gaps_a.size(); ++i) {
    if (predict(gaps_a[i]) != predict(gaps_b[i])) ++flips;
  }
  return static_cast<double>(flips) / static_cast<double>(gaps_a.size());
}

std::vector<double> looe_gaps(const LogitGapMatrix& matrix, std::size_t exclude) {
  if (matrix.n_models < 2) {
    throw ValidationError("looe_gaps: needs at least 2 models");
  }
  if (exclude >= matrix.n_models) {
    throw ValidationError("looe_gaps: exclude index out of range");
  }
  std::vector<double> out(matrix.n_points, 0.0);
  for (std::size_t k = 0; k < matrix.n_models; ++k) {
    if (k == exclude) continue;
    for (std::size_t j = 0; j < matrix.n_points; ++j) {
      out[j] += matrix.at(k, j);
    }
  }
  const double scale = 1.0 / static_cast<double>(matrix.n_models - 1);
  for (double& v : out) v *= scale;
  return out;
}

std::vector<double> ensemble_mean_gaps(const LogitGapMatrix& matrix) {
  if (matrix.n_models == 0) {
    throw ValidationError("ensemble_mean_gaps: empty matrix");
  }
  std::vector<double> out(matrix.n_points, 0.0);
  for (std::size_t k = 0; k < matrix.n_models; ++k) {
    for (std::size_t j = 0; j < matrix.n_points; ++j) {
      out[j] += matrix.at(k, j);
    }
  }
  const double scale = 1.0 / static_cast<double>(matrix.n_models);
  for (double& v : out) v *= scale;
  return out;
}

Ecdf candidate_cdf(const LogitGapMatrix& matrix, std::size_t model) {
  return Ecdf(matrix.row(model));
}

Ecdf looe_cdf(const LogitGapMatrix& matrix, std::size_t exclude) {
  return Ecdf(looe_gaps(matrix, exclude));
}

namespace {

void validate_edges(const std::vector<double>& edges) {
  if (edges.size() < 2) {
    throw ValidationError("histogram: need at least 2 bin edges");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw ValidationError("histogram: bin edges must be strictly ascending");
    }
  }
}

// Right-open bins, last bin closed at the top edge.
std::size_t bin_index(const std::vector<double>& edges, double x, bool clip) {
  if (x < edges.front() || x > edges.back()) {
    if (!clip) {
      throw ValidationError("histogram: value outside bin range (pass clip to clamp)");
    }
    x = std::clamp(x, edges.front(), edges.back());
  }
  if (x == edges.back()) return edges.size() - 2;
  const auto it = std::upper_bound(edges.begin(), edges.end(), x);
  return static_cast<std::size_t>(it - edges.begin()) - 1;
}

}  // namespace

HistogramData histogram(const std::vector<double>& gaps,
                        const std::vector<double>& bin_edges, bool clip) {
  if (gaps.empty()) {
    throw ValidationError("histogram: empty gap vector");
  }
  validate_edges(bin_edges);
  HistogramData out;
  out.bin_edges = bin_edges;
  out.probabilities.assign(bin_edges.size() - 1, 0.0);
  const double weight = 1.0 / static_cast<double>(gaps.size());
  for (double gap : gaps) {
    if (!std::isfinite(gap)) {
      throw ValidationError("histogram: non-finite gap value");
    }
    out.probabilities[bin_index(bin_edges, gap, clip)] += weight;
  }
  return out;
}

HistogramData histogram_envelope(const LogitGapMatrix& matrix,
                                 const std::vector<double>& bin_edges,
                                 bool clip) {
  if (matrix.n_models < 2) {
    throw ValidationError("histogram_envelope: needs at least 2 models");
  }
  HistogramData out = histogram(ensemble_mean_gaps(matrix), bin_edges, clip);
  out.envelope_min.assign(out.probabilities.size(), 1.0);
  out.envelope_max.assign(out.probabilities.size(), 0.0);
  for (std::size_t k = 0; k < matrix.n_models; ++k) {
    const HistogramData per_model = histogram(matrix.row(k), bin_edges, clip);
    for (std::size_t b = 0; b < per_model.probabilities.size(); ++b) {
      out.envelope_min[b] = std::min(out.envelope_min[b], per_model.probabilities[b]);
      out.envelope_max[b] = std::max(out.envelope_max[b], per_model.probabilities[b]);
    }
  }
  return out;
}

}  // namespace trimks
