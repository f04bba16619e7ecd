#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "trim_reference.hpp"
#include "trimks/ecdf.hpp"
#include "trimks/errors.hpp"
#include "trimks/rng.hpp"
#include "trimks/trimming.hpp"

using namespace trimks;

namespace {

std::vector<double> random_samples(Rng& rng, std::size_t n, bool lattice) {
  std::vector<double> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back(lattice ? std::floor(rng.uniform(-4, 4)) : rng.normal());
  }
  return v;
}

TrimmingFunction identity_function(double alpha) {
  return TrimmingFunction{{0.0, 1.0}, {0.0, 1.0}, alpha};
}

}  // namespace

TEST_CASE("trimming function validation") {
  CHECK_NOTHROW(identity_function(0.0).validate());
  CHECK_NOTHROW(identity_function(0.5).validate());

  // Slope 4/3 is exactly the cap at alpha = 0.25.
  const TrimmingFunction steep{{0.0, 0.75, 1.0}, {0.0, 1.0, 1.0}, 0.25};
  CHECK_NOTHROW(steep.validate());

  TrimmingFunction too_steep = steep;
  too_steep.alpha = 0.2;  // cap 1.25 < 4/3
  CHECK_THROWS_AS(too_steep.validate(), ValidationError);

  TrimmingFunction bad_end{{0.0, 1.0}, {0.0, 0.9}, 0.5};
  CHECK_THROWS_AS(bad_end.validate(), ValidationError);

  TrimmingFunction bad_start{{0.0, 1.0}, {0.1, 1.0}, 0.5};
  CHECK_THROWS_AS(bad_start.validate(), ValidationError);

  TrimmingFunction decreasing{{0.0, 0.4, 0.5, 1.0}, {0.0, 0.3, 0.2, 1.0}, 0.9};
  CHECK_THROWS_AS(decreasing.validate(), ValidationError);

  TrimmingFunction bad_alpha = identity_function(1.0);
  CHECK_THROWS_AS(bad_alpha.validate(), ValidationError);
}

TEST_CASE("apply_trimming with the identity reproduces F") {
  const Ecdf f({0, 1, 1, 2, 5});
  const StepCdf t = apply_trimming(identity_function(0.0), f);
  for (double x : {-1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 6.0}) {
    CHECK(t.eval(x) == doctest::Approx(f.eval(x)).epsilon(1e-15));
  }
}

TEST_CASE("apply_trimming respects the density bound") {
  // Uniform jumps of 0.25; at alpha = 0.25 every trimmed jump stays <= 1/3.
  const Ecdf f({0, 1, 2, 3});
  const TrimmingFunction h{{0.0, 0.75, 1.0}, {0.0, 1.0, 1.0}, 0.25};
  const StepCdf t = apply_trimming(h, f);
  double prev = 0.0;
  for (double v : t.vals) {
    CHECK(v - prev <= 1.0 / 3.0 + 1e-12);
    prev = v;
  }
  // That h maps the top atom of F to zero mass.
  CHECK(t.vals[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(t.vals[3] == 1.0);

  TrimmingFunction invalid = h;
  invalid.values = {0.0, 1.1, 1.0};
  CHECK_THROWS_AS(apply_trimming(invalid, f), ValidationError);
}

TEST_CASE("band_feasible on the hand-propagated instances") {
  // At the exact KS distance the identity trimming is always feasible.
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Ecdf target(random_samples(rng, 1 + rng.uniform_index(20), trial % 2 == 0));
    const Ecdf source(random_samples(rng, 1 + rng.uniform_index(20), trial % 2 == 1));
    std::vector<double> tv, sv;
    evaluate_on_merged_support(target, source, tv, sv);
    CHECK(band_feasible(tv, sv, 0.0, ks_distance(target, source)));
  }

  // Disjoint supports, target entirely below the source: h(0) = 0 pins the
  // trimmed CDF to 0 where the target already reached 1.
  const std::vector<double> tv_below{0.25, 0.5, 0.75, 1.0, 1.0};
  const std::vector<double> sv_below{0.0, 0.0, 0.0, 0.0, 1.0};
  CHECK_FALSE(band_feasible(tv_below, sv_below, 0.5, 0.5));
  // Mirror case: target entirely above, h(1) = 1 unreachable.
  const std::vector<double> tv_above{0.0, 0.25, 0.5, 0.75, 1.0};
  const std::vector<double> sv_above{1.0, 1.0, 1.0, 1.0, 1.0};
  CHECK_FALSE(band_feasible(tv_above, sv_above, 0.5, 0.5));

  // target {0,1,2,3} vs source {0,1,2,100}: h(0.75) is pinched between the
  // bands 0.75 +- t and 1 -+ t, so 0.125 is the exact breakpoint.
  std::vector<double> tv, sv;
  evaluate_on_merged_support(Ecdf({0, 1, 2, 3}), Ecdf({0, 1, 2, 100}), tv, sv);
  CHECK(band_feasible(tv, sv, 0.25, 0.125));
  CHECK_FALSE(band_feasible(tv, sv, 0.25, 0.124));
}

TEST_CASE("band_feasible validates its inputs") {
  const std::vector<double> good{0.5, 1.0};
  CHECK_THROWS_AS(band_feasible({1.0, 0.5}, good, 0.1, 0.1), ValidationError);
  CHECK_THROWS_AS(band_feasible({0.5, 1.5}, good, 0.1, 0.1), ValidationError);
  CHECK_THROWS_AS(band_feasible(good, good, 1.0, 0.1), ValidationError);
  CHECK_THROWS_AS(band_feasible(good, good, 0.1, -0.1), ValidationError);
  CHECK_THROWS_AS(band_feasible({}, {}, 0.1, 0.1), ValidationError);
}

TEST_CASE("min_trimmed_ks anchors at the KS distance for alpha = 0") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Ecdf target(random_samples(rng, 1 + rng.uniform_index(60), trial % 2 == 0));
    const Ecdf source(random_samples(rng, 1 + rng.uniform_index(60), trial % 3 == 0));
    const double d0 = min_trimmed_ks(target, source, 0.0, 1e-12).distance;
    CHECK(std::fabs(d0 - ks_distance(target, source)) <= 1e-9);
  }
}

TEST_CASE("min_trimmed_ks solves the hand instance") {
  const Ecdf target({0, 1, 2, 3});
  const Ecdf source({0, 1, 2, 100});
  CHECK(ks_distance(target, source) == 0.25);
  const TrimmedDistanceResult res = min_trimmed_ks(target, source, 0.25);
  CHECK(std::fabs(res.distance - 0.125) <= 1e-6);
  CHECK(res.alpha == 0.25);
  CHECK_NOTHROW(res.witness.validate());
}

TEST_CASE("min_trimmed_ks is zero for identical inputs") {
  const Ecdf f({-1, 0, 2, 2, 7});
  for (double alpha : {0.0, 0.3, 0.9}) {
    CHECK(min_trimmed_ks(f, f, alpha).distance == 0.0);
  }
}

TEST_CASE("min_trimmed_ks validates parameters") {
  const Ecdf f({1, 2});
  CHECK_THROWS_AS(min_trimmed_ks(f, f, -0.1), ValidationError);
  CHECK_THROWS_AS(min_trimmed_ks(f, f, 1.0), ValidationError);
  CHECK_THROWS_AS(min_trimmed_ks(f, f, 0.5, 0.0), ValidationError);
}

TEST_CASE("trimmed distance is nonincreasing in alpha") {
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const Ecdf target(random_samples(rng, 1 + rng.uniform_index(50), trial % 2 == 0));
    const Ecdf source(random_samples(rng, 1 + rng.uniform_index(50), trial % 2 == 1));
    double prev = 2.0;
    for (int i = 0; i <= 10; ++i) {
      const double alpha = 0.05 * i;
      const double d = min_trimmed_ks(target, source, alpha, 1e-13).distance;
      CHECK(d <= prev + 1e-12);
      prev = d;
    }
  }
}

TEST_CASE("witness attains the reported distance and the density bound") {
  Rng rng(29);
  const double tol = 1e-10;
  for (int trial = 0; trial < 60; ++trial) {
    const Ecdf target(random_samples(rng, 1 + rng.uniform_index(40), trial % 2 == 0));
    const Ecdf source(random_samples(rng, 1 + rng.uniform_index(40), trial % 3 == 0));
    for (double alpha : {0.0, 0.25, 0.6}) {
      const TrimmedDistanceResult res = min_trimmed_ks(target, source, alpha, tol);
      CHECK_NOTHROW(res.witness.validate());
      const StepCdf trimmed = apply_trimming(res.witness, source);
      CHECK(std::fabs(sup_distance(target, trimmed) - res.distance) <= 2 * tol);

      // Every trimmed jump obeys the density-ratio bound against the
      // corresponding source jump.
      const double slope_max = 1.0 / (1.0 - alpha);
      double prev_trimmed = 0.0;
      double prev_source = 0.0;
      for (std::size_t i = 0; i < trimmed.xs.size(); ++i) {
        const double source_level = source.eval(trimmed.xs[i]);
        const double source_jump = source_level - prev_source;
        const double trimmed_jump = trimmed.vals[i] - prev_trimmed;
        CHECK(trimmed_jump <= slope_max * source_jump + 1e-12 + 1e-15);
        prev_trimmed = trimmed.vals[i];
        prev_source = source_level;
      }
    }
  }
}

TEST_CASE("grid oracle agrees with bisection on tiny instances") {
  Rng rng(31);
  int checked = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const Ecdf target(random_samples(rng, 1 + rng.uniform_index(10), true));
    const Ecdf source(random_samples(rng, 1 + rng.uniform_index(8), true));
    for (double alpha : {0.0, 0.1, 0.25, 0.4}) {
      const double bisect = min_trimmed_ks(target, source, alpha).distance;
      const double oracle = trimmed_ks_oracle(target, source, alpha, 1e-4);
      CHECK(std::fabs(bisect - oracle) <= 2e-3);
      ++checked;
    }
  }
  CHECK(checked >= 200);
}

TEST_CASE("closed-form pairwise bound matches bisection everywhere") {
  // Second independent route: the largest pairwise lower bound over level
  // pairs is exactly the minimal feasible t.
  Rng rng(37);
  for (int trial = 0; trial < 150; ++trial) {
    const Ecdf target(random_samples(rng, 1 + rng.uniform_index(40), trial % 2 == 0));
    const Ecdf source(random_samples(rng, 1 + rng.uniform_index(40), trial % 3 == 0));
    for (double alpha : {0.0, 0.1, 0.25, 0.4, 0.7}) {
      const double bisect = min_trimmed_ks(target, source, alpha, 1e-12).distance;
      const double pairwise = testref::trimmed_ks_pairwise(target, source, alpha);
      CHECK(std::fabs(bisect - pairwise) <= 1e-9);
    }
  }
}

TEST_CASE("grid oracle edge behavior") {
  const Ecdf f({0, 1, 2});
  // Exact zero only when the optimal h lies on the value grid; one grid
  // cell of rounding otherwise.
  CHECK(trimmed_ks_oracle(f, f, 0.3, 1e-4) <= 1e-4);
  CHECK(std::fabs(trimmed_ks_oracle(f, Ecdf({0, 1, 5}), 0.0, 1e-4) -
                  ks_distance(f, Ecdf({0, 1, 5}))) <= 2e-3);

  std::vector<double> wide;
  for (int i = 0; i < 9; ++i) wide.push_back(i);
  CHECK_THROWS_AS(trimmed_ks_oracle(f, Ecdf(wide), 0.1, 1e-4), ValidationError);
  CHECK_THROWS_AS(trimmed_ks_oracle(f, f, 0.1, 0.01), ValidationError);
}
