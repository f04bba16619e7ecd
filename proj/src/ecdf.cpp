#include "trimks/ecdf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trimks/errors.hpp"

namespace trimks {

Ecdf::Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
  if (sorted_.empty()) {
    throw ValidationError("Ecdf: sample vector is empty");
  }
  for (std::size_t i = 0; i < sorted_.size(); ++i) {
    if (!std::isfinite(sorted_[i])) {
      throw ValidationError("Ecdf: non-finite sample at index " +
                            std::to_string(i));
    }
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::eval(double x) const {
  if (std::isnan(x)) {
    throw ValidationError("Ecdf::eval: x is NaN");
  }
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) /
         static_cast<double>(sorted_.size());
}

std::vector<double> merged_support(const Ecdf& f, const Ecdf& g) {
  const auto& a = f.sorted_samples();
  const auto& b = g.sorted_samples();
  std::vector<double> merged;
  merged.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged));
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  return merged;
}

namespace {

// Walks the distinct merged values once, maintaining counts of samples <= v
// in each array. Calls visit(F(v), G(v)) for every merged jump point v.
template <typename Visit>
void walk_merged(const Ecdf& f, const Ecdf& g, Visit visit) {
  const auto& a = f.sorted_samples();
  const auto& b = g.sorted_samples();
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
      v = a[i];
    } else {
      v = b[j];
    }
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    visit(static_cast<double>(i) / na, static_cast<double>(j) / nb);
  }
}

}  // namespace

double ks_distance(const Ecdf& f, const Ecdf& g) {
  double sup = 0.0;
  walk_merged(f, g, [&](double fv, double gv) {
    sup = std::max(sup, std::fabs(fv - gv));
  });
  return sup;
}

void evaluate_on_merged_support(const Ecdf& target, const Ecdf& source,
                                std::vector<double>& target_vals,
                                std::vector<double>& source_vals) {
  target_vals.clear();
  source_vals.clear();
  walk_merged(target, source, [&](double tv, double sv) {
    target_vals.push_back(tv);
    source_vals.push_back(sv);
  });
}

double dkw_threshold(std::size_t n, double delta) {
  if (n < kMinDkwSamples) {
    throw ValidationError(
        "dkw_threshold: n = " + std::to_string(n) +
        " is too small; the constant-2 tail bound requires n > 458");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ValidationError("dkw_threshold: delta must lie in (0,1)");
  }
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

}  // namespace trimks
