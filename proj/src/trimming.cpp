#include "trimks/trimming.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "trimks/errors.hpp"

namespace trimks {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// The interval propagation works with half the validator's slack so that a
// reconstructed witness clears TrimmingFunction::validate() with margin to
// spare even after rounding.
constexpr double kPropagationSlack = 0.5 * kSlopeSlack;

// Distinct source levels in ascending order with the range of target values
// pinned to each level. Both input vectors are nondecreasing, so the target
// extrema per group are its first and last entries.
struct MergedLevels {
  std::vector<double> u;
  std::vector<double> t_min;
  std::vector<double> t_max;
};

MergedLevels build_levels(const std::vector<double>& target_vals,
                          const std::vector<double>& source_vals) {
  MergedLevels levels;
  const std::size_t n = source_vals.size();
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && source_vals[j + 1] == source_vals[i]) ++j;
    levels.u.push_back(source_vals[i]);
    levels.t_min.push_back(target_vals[i]);
    levels.t_max.push_back(target_vals[j]);
    i = j + 1;
  }
  return levels;
}

// Band of admissible h-values at one level: [t_max - t, t_min + t] ∩ [0,1].
inline double band_lo(const MergedLevels& lv, std::size_t j, double t) {
  return std::max(0.0, lv.t_max[j] - t);
}
inline double band_hi(const MergedLevels& lv, std::size_t j, double t) {
  return std::min(1.0, lv.t_min[j] + t);
}

// Forward interval propagation. When `flo`/`fhi` are non-null they receive
// the per-level reachable intervals for witness reconstruction.
bool forward_pass(const MergedLevels& lv, double slope_max, double t,
                  std::vector<double>* flo, std::vector<double>* fhi) {
  double prev_u = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  if (flo) {
    flo->clear();
    fhi->clear();
  }
  for (std::size_t j = 0; j < lv.u.size(); ++j) {
    const double du = lv.u[j] - prev_u;
    // No slack on the zero-width step at level 0: h(0) = 0 is pinned exactly.
    const double growth = du > 0.0 ? du * slope_max + kPropagationSlack : 0.0;
    hi = std::min(hi + growth, band_hi(lv, j, t));
    lo = std::max(lo, band_lo(lv, j, t));
    if (lo > hi) return false;
    if (flo) {
      flo->push_back(lo);
      fhi->push_back(hi);
    }
    prev_u = lv.u[j];
  }
  // h(1) = 1 must remain reachable from the last level.
  const double tail = (1.0 - prev_u) * slope_max + kPropagationSlack;
  return lo <= 1.0 && 1.0 - hi <= tail;
}

TrimmingFunction build_witness(const MergedLevels& lv, double slope_max,
                               double t, double alpha) {
  std::vector<double> flo, fhi;
  if (!forward_pass(lv, slope_max, t, &flo, &fhi)) {
    throw NumericError("min_trimmed_ks: witness pass found t infeasible");
  }
  const std::size_t k = lv.u.size();
  std::vector<double> w(k);
  // Rounding can invert an interval by an ulp; collapsing onto hi keeps the
  // values monotone and leaves the remaining half of the validator's slope
  // slack to absorb the error.
  const auto pick = [](double lo, double hi) {
    return lo > hi ? hi : std::min(0.5 * (lo + hi), hi);
  };
  {
    // Last level: must be able to climb to h(1) = 1.
    const double reach = 1.0 - (1.0 - lv.u[k - 1]) * slope_max - kPropagationSlack;
    const double lo = std::max(flo[k - 1], reach);
    const double hi = std::min(fhi[k - 1], 1.0);
    w[k - 1] = pick(lo, hi);
  }
  for (std::size_t j = k - 1; j-- > 0;) {
    const double du = lv.u[j + 1] - lv.u[j];
    const double lo = std::max(flo[j], w[j + 1] - du * slope_max - kPropagationSlack);
    const double hi = std::min(fhi[j], w[j + 1]);
    w[j] = pick(lo, hi);
  }

  TrimmingFunction h;
  h.alpha = alpha;
  h.breakpoints.push_back(0.0);
  h.values.push_back(0.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (lv.u[j] == 0.0) continue;  // h(0) = 0 already pinned
    h.breakpoints.push_back(lv.u[j]);
    h.values.push_back(std::clamp(w[j], 0.0, 1.0));
  }
  if (h.breakpoints.back() < 1.0) {
    h.breakpoints.push_back(1.0);
    h.values.push_back(1.0);
  } else {
    h.values.back() = 1.0;
  }
  return h;
}

void validate_merged_vals(const std::vector<double>& target_vals,
                          const std::vector<double>& source_vals) {
  if (target_vals.empty() || target_vals.size() != source_vals.size()) {
    throw ValidationError("band_feasible: value vectors empty or mismatched");
  }
  auto check = [](const std::vector<double>& v, const char* name) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
        throw ValidationError(std::string("band_feasible: ") + name +
                              " has a value outside [0,1]");
      }
      if (i > 0 && v[i] < v[i - 1]) {
        throw ValidationError(std::string("band_feasible: ") + name +
                              " is not nondecreasing");
      }
    }
  };
  check(target_vals, "target_vals");
  check(source_vals, "source_vals");
}

void validate_alpha(double alpha, const char* where) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ValidationError(std::string(where) + ": alpha must lie in [0,1)");
  }
}

}  // namespace

double TrimmingFunction::eval(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw ValidationError("TrimmingFunction::eval: u outside [0,1]");
  }
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), u);
  if (it == breakpoints.begin()) return values.front();
  if (it == breakpoints.end()) return values.back();
  const std::size_t j = static_cast<std::size_t>(it - breakpoints.begin());
  const double u0 = breakpoints[j - 1];
  const double u1 = breakpoints[j];
  const double w = (u - u0) / (u1 - u0);
  return values[j - 1] + w * (values[j] - values[j - 1]);
}

void TrimmingFunction::validate() const {
  validate_alpha(alpha, "TrimmingFunction");
  if (breakpoints.size() < 2 || breakpoints.size() != values.size()) {
    throw ValidationError("TrimmingFunction: need >= 2 matched breakpoints/values");
  }
  if (breakpoints.front() != 0.0 || breakpoints.back() != 1.0) {
    throw ValidationError("TrimmingFunction: breakpoints must span [0,1]");
  }
  if (values.front() != 0.0 || values.back() != 1.0) {
    throw ValidationError("TrimmingFunction: h(0) = 0 and h(1) = 1 required");
  }
  const double slope_max = 1.0 / (1.0 - alpha);
  for (std::size_t j = 1; j < breakpoints.size(); ++j) {
    const double du = breakpoints[j] - breakpoints[j - 1];
    const double dv = values[j] - values[j - 1];
    if (du <= 0.0) {
      throw ValidationError("TrimmingFunction: breakpoints not strictly increasing");
    }
    if (dv < 0.0) {
      throw ValidationError("TrimmingFunction: values not nondecreasing");
    }
    if (dv > du * slope_max + kSlopeSlack) {
      throw ValidationError("TrimmingFunction: slope bound 1/(1-alpha) violated");
    }
  }
}

double StepCdf::eval(double x) const {
  if (std::isnan(x)) {
    throw ValidationError("StepCdf::eval: x is NaN");
  }
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin()) return 0.0;
  return vals[static_cast<std::size_t>(it - xs.begin()) - 1];
}

StepCdf apply_trimming(const TrimmingFunction& h, const Ecdf& f) {
  h.validate();
  StepCdf out;
  const auto& s = f.sorted_samples();
  const double n = static_cast<double>(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1] == s[i]) ++j;
    out.xs.push_back(s[i]);
    out.vals.push_back(h.eval(static_cast<double>(j + 1) / n));
    i = j + 1;
  }
  return out;
}

double sup_distance(const Ecdf& target, const StepCdf& trimmed) {
  std::vector<double> points = target.sorted_samples();
  points.insert(points.end(), trimmed.xs.begin(), trimmed.xs.end());
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  double sup = 0.0;
  for (double x : points) {
    sup = std::max(sup, std::fabs(target.eval(x) - trimmed.eval(x)));
  }
  return sup;
}

bool band_feasible(const std::vector<double>& target_vals,
                   const std::vector<double>& source_vals, double alpha,
                   double t) {
  validate_merged_vals(target_vals, source_vals);
  validate_alpha(alpha, "band_feasible");
  if (!(t >= 0.0)) {
    throw ValidationError("band_feasible: t must be >= 0");
  }
  const MergedLevels lv = build_levels(target_vals, source_vals);
  return forward_pass(lv, 1.0 / (1.0 - alpha), t, nullptr, nullptr);
}

TrimmedDistanceResult min_trimmed_ks(const Ecdf& target, const Ecdf& source,
                                     double alpha, double tol) {
  validate_alpha(alpha, "min_trimmed_ks");
  if (!(tol > 0.0)) {
    throw ValidationError("min_trimmed_ks: tol must be positive");
  }
  std::vector<double> target_vals, source_vals;
  evaluate_on_merged_support(target, source, target_vals, source_vals);
  const MergedLevels lv = build_levels(target_vals, source_vals);
  const double slope_max = 1.0 / (1.0 - alpha);

  double ks = 0.0;
  for (std::size_t i = 0; i < target_vals.size(); ++i) {
    ks = std::max(ks, std::fabs(target_vals[i] - source_vals[i]));
  }

  TrimmedDistanceResult result;
  result.alpha = alpha;
  if (forward_pass(lv, slope_max, 0.0, nullptr, nullptr)) {
    result.distance = 0.0;
    result.witness = build_witness(lv, slope_max, 0.0, alpha);
    return result;
  }

  // Invariant: t_lo infeasible, t_hi feasible. The identity function makes
  // t = ks feasible for every alpha.
  double t_lo = 0.0;
  double t_hi = ks;
  int iterations = 0;
  while (t_hi - t_lo > tol && iterations < 200) {
    const double mid = 0.5 * (t_lo + t_hi);
    if (forward_pass(lv, slope_max, mid, nullptr, nullptr)) {
      t_hi = mid;
    } else {
      t_lo = mid;
    }
    ++iterations;
  }
  result.distance = t_hi;
  result.iterations = iterations;
  result.witness = build_witness(lv, slope_max, t_hi, alpha);
  return result;
}

double trimmed_ks_oracle(const Ecdf& target, const Ecdf& source, double alpha,
                         double grid_step) {
  validate_alpha(alpha, "trimmed_ks_oracle");
  if (!(grid_step > 0.0 && grid_step <= 1e-3)) {
    throw ValidationError("trimmed_ks_oracle: grid_step must lie in (0, 1e-3]");
  }
  {
    const auto& s = source.sorted_samples();
    std::size_t distinct = s.empty() ? 0 : 1;
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i] != s[i - 1]) ++distinct;
    }
    if (distinct > 8) {
      throw ValidationError(
          "trimmed_ks_oracle: refused, source has more than 8 distinct values");
    }
  }

  // Independent evaluation path: point-wise Ecdf::eval over the merged
  // support rather than the merge walk used by the bisection route.
  const std::vector<double> support = merged_support(target, source);
  std::vector<double> target_vals(support.size());
  std::vector<double> source_vals(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    target_vals[i] = target.eval(support[i]);
    source_vals[i] = source.eval(support[i]);
  }
  const MergedLevels lv = build_levels(target_vals, source_vals);
  const double slope_max = 1.0 / (1.0 - alpha);
  // Discretizing the optimal h to the grid inflates a segment difference by
  // less than one grid cell, so the slope budget gets that much slack.
  const double seg_slack = grid_step + kSlopeSlack;

  std::vector<double> grid;
  for (double v = 0.0; v < 1.0; v += grid_step) grid.push_back(v);
  grid.push_back(1.0);
  const std::size_t g = grid.size();

  auto deviation = [&](std::size_t level, double v) {
    return std::max(std::fabs(lv.t_max[level] - v), std::fabs(lv.t_min[level] - v));
  };

  const std::size_t k = lv.u.size();
  std::vector<double> cost(g, kInf);
  {
    const double budget = lv.u[0] * slope_max + seg_slack;
    for (std::size_t v = 0; v < g && grid[v] <= budget; ++v) {
      cost[v] = deviation(0, grid[v]);
    }
  }
  std::vector<double> next(g);
  for (std::size_t level = 1; level < k; ++level) {
    const double budget = (lv.u[level] - lv.u[level - 1]) * slope_max + seg_slack;
    std::fill(next.begin(), next.end(), kInf);
    // Sliding-window minimum of cost over [grid[v] - budget, grid[v]].
    std::deque<std::size_t> window;
    for (std::size_t v = 0; v < g; ++v) {
      while (!window.empty() && cost[window.back()] >= cost[v]) {
        window.pop_back();
      }
      window.push_back(v);
      while (grid[window.front()] < grid[v] - budget) {
        window.pop_front();
      }
      const double best_prev = cost[window.front()];
      if (best_prev < kInf) {
        next[v] = std::max(best_prev, deviation(level, grid[v]));
      }
    }
    cost.swap(next);
  }

  double best = kInf;
  const double tail = (1.0 - lv.u[k - 1]) * slope_max + seg_slack;
  for (std::size_t v = 0; v < g; ++v) {
    if (1.0 - grid[v] <= tail) {
      best = std::min(best, cost[v]);
    }
  }
  if (best == kInf) {
    throw NumericError("trimmed_ks_oracle: no feasible grid assignment");
  }
  return best;
}

}  // namespace trimks
