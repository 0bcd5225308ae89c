#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "geoslice/slice1d.hpp"
#include "geoslice/stats.hpp"
#include "oracles.hpp"

using namespace geoslice;

namespace {

constexpr double kPi = std::numbers::pi;

auto member(const IntervalUnion& s) {
  return [&s](double x) { return s.contains(x); };
}

}  // namespace

TEST(SteppingOut, SingleStepHasWidthW) {
  Rng rng(1);
  const IntervalUnion s = IntervalUnion::from_endpoints({-5, 5});
  for (int i = 0; i < 1000; ++i) {
    const Interval iv = stepping_out(member(s), {0.7, 1}, rng);
    EXPECT_NEAR(iv.width(), 0.7, 1e-15);
    EXPECT_LT(iv.lo, 0.0);
    EXPECT_GT(iv.hi, 0.0);
    EXPECT_EQ(iv.expansions_left + iv.expansions_right, 0);
  }
}

TEST(SteppingOut, ExpectedWidthForSymmetricInterval) {
  const IntervalUnion s = IntervalUnion::from_endpoints({-0.25, 0.25});
  Rng rng(2);
  const int n = 1'000'000;
  std::vector<double> widths(n);
  for (int i = 0; i < n; ++i) {
    const Interval iv = stepping_out(member(s), {1.0, std::nullopt}, rng);
    widths[static_cast<std::size_t>(i)] = iv.width();
    ASSERT_LT(iv.lo, -0.25);
    ASSERT_GT(iv.hi, 0.25);
  }
  const MeanSe m = mean_and_se(widths);
  EXPECT_NEAR(oracle::expected_width_symmetric(0.25, 1.0), 1.5, 1e-15);
  EXPECT_NEAR(m.mean, 1.5, 3 * m.se);
}

TEST(SteppingOut, IntervalInvariantsForFiniteCap) {
  const IntervalUnion s = IntervalUnion::from_endpoints({-1.3, 0.4, 0.6, 2.0});
  Rng rng(3);
  for (std::int64_t m : {1, 2, 3, 7}) {
    for (int i = 0; i < 20000; ++i) {
      const double w = 0.1 + rng.uniform();
      const Interval iv = stepping_out(member(s), {w, m}, rng);
      ASSERT_LT(iv.lo, 0.0);
      ASSERT_GT(iv.hi, 0.0);
      ASSERT_NEAR(iv.width(), static_cast<double>(iv.expansions_left + iv.expansions_right + 1) * w, 1e-12);
      ASSERT_LE(iv.width(), static_cast<double>(m) * w * (1 + 1e-12));
    }
  }
}

TEST(SteppingOut, UnboundedSetHitsExpansionCap) {
  Rng rng(4);
  StepOutParams p{1.0, std::nullopt};
  p.max_expansions = 1000;
  EXPECT_THROW(stepping_out([](double) { return true; }, p, rng), ExpansionCapExceeded);
  EXPECT_THROW(stepping_out([](double) { return true; }, StepOutParams{0.0, 1}, rng), InvalidArgument);
  EXPECT_THROW(stepping_out([](double) { return true; }, StepOutParams{1.0, 0}, rng), InvalidArgument);
}

TEST(CoveringBound, Formula) {
  EXPECT_EQ(covering_bound(1.0, 0.0, 0.0, std::nullopt, 0.3), 1.0);
  EXPECT_NEAR(covering_bound(kPi, 0.0, 0.0, 1, 2 * kPi), 0.5, 1e-15);
  EXPECT_NEAR(covering_bound(1.0, 0.0, 0.2, 3, 1.0), 1.0 - 1.0 / 3.0 - 0.2, 1e-15);
  EXPECT_THROW(covering_bound(1.0, 0.0, 0.9, 3, 1.0), BoundInapplicable);
  EXPECT_THROW(covering_bound(0.0, 0.0, 0.0, 3, 1.0), InvalidArgument);
}

TEST(CoveringProbability, ConnectedSetWithInfiniteCapAlwaysCovers) {
  Rng rng(5);
  const CoverageEstimate e =
      estimate_covering_probability(IntervalUnion::from_endpoints({-1, 1}), 0.0, kInf, {0.37, std::nullopt}, 100000, rng);
  EXPECT_EQ(e.estimate, 1.0);
}

TEST(CoveringProbability, TwoPiecesAgainstBruteForce) {
  const std::vector<std::pair<double, double>> pieces = {{-1, 0.3}, {0.5, 1}};
  const double exact = oracle::covering_probability(pieces, 0.0, 3, 1.0);
  Rng rng(6);
  const CoverageEstimate e =
      estimate_covering_probability(IntervalUnion(pieces), 0.0, kInf, {1.0, 3}, 1'000'000, rng);
  const double bound = covering_bound(1.0, 0.0, 0.2, 3, 1.0);
  EXPECT_GE(e.estimate, bound - 3 * e.std_error);
  EXPECT_GE(exact, bound);
  EXPECT_NEAR(e.estimate, exact, 3 * e.std_error + 1e-4);
}

TEST(CoveringProbability, ShortPieceWithSingleStep) {
  const double exact = oracle::covering_probability({{-0.1, 0.1}}, 0.0, 1, 2.0);
  EXPECT_NEAR(exact, 0.95, 1e-4);
  Rng rng(7);
  const CoverageEstimate e =
      estimate_covering_probability(IntervalUnion::from_endpoints({-0.1, 0.1}), 0.0, kInf, {2.0, 1}, 1'000'000, rng);
  EXPECT_NEAR(e.estimate, 0.95, 3 * e.std_error);
}

TEST(CoveringProbability, RespectsTheHorizon) {
  // Beyond the horizon C the second piece does not need covering.
  Rng rng(8);
  const IntervalUnion s = IntervalUnion::from_endpoints({-1, 0.3, 0.5, 1});
  const CoverageEstimate e = estimate_covering_probability(s, 0.0, 0.4, {1.0, 3}, 200000, rng);
  const double exact = oracle::covering_probability({{-1, 0.3}}, 0.0, 3, 1.0);
  EXPECT_NEAR(e.estimate, exact, 3 * e.std_error + 1e-4);
}

TEST(Wrap, ExamplesAndRoundTrip) {
  EXPECT_EQ(wrap_angle(0.0, -0.3, 0.9), 0.0);
  EXPECT_NEAR(wrap_angle(0.25, 0, 1), kPi / 2, 1e-15);
  EXPECT_NEAR(wrap_angle(-0.25, 0, 1), 3 * kPi / 2, 1e-15);
  EXPECT_EQ(unwrap_angle(0.0, 0, 1), 0.0);
  EXPECT_NEAR(unwrap_angle(kPi / 2, 0, 1), 0.25, 1e-15);
  EXPECT_THROW(wrap_angle(0.1, 1, 1), InvalidArgument);
  EXPECT_THROW(unwrap_angle(0.1, 2, 1), InvalidArgument);
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    const double lo = -3 * rng.uniform();
    const double hi = lo + 0.01 + 4 * rng.uniform();
    const double theta = lo + (hi - lo) * rng.uniform();
    EXPECT_NEAR(unwrap_angle(wrap_angle(theta, lo, hi), lo, hi), theta, 1e-12);
  }
}

TEST(ReeledShrinkage, FullIntervalGivesUniformOutput) {
  Rng rng(10);
  const double lo = -0.4, hi = 0.6;
  std::vector<std::int64_t> counts(50, 0);
  for (int i = 0; i < 100000; ++i) {
    const ShrinkResult r = reeled_shrinkage([](double) { return true; }, lo, hi, rng);
    ASSERT_EQ(r.iterations, 1);
    counts[static_cast<std::size_t>(std::min(49, static_cast<int>((r.theta - lo) / (hi - lo) * 50)))]++;
  }
  EXPECT_GT(chi_square_test(counts, std::vector<double>(50, 0.02)).p_value, 0.001);
}

TEST(ReeledShrinkage, MassBoundOnTwoPieces) {
  // S n (0, 1) = (0, 0.2) u (0.8, 1) seen from 0.1, shifted so the start is 0.
  const IntervalUnion s = IntervalUnion::from_endpoints({-0.1, 0.1, 0.7, 0.9});
  Rng rng(11);
  const int n = 200000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const double th = reeled_shrinkage(member(s), -0.1, 0.9, rng).theta;
    ASSERT_TRUE(s.contains(th));
    if (th > 0.7 && th < 0.9) ++hits;
  }
  const double p = static_cast<double>(hits) / n;
  const double se = std::sqrt(p * (1 - p) / n);
  EXPECT_GE(p, shrinkage_mass_bound(0.2, 1.0, 1.0) - 3 * se);
}

TEST(ReeledShrinkage, OutputSatisfiesOracleAndTerminates) {
  Rng rng(12);
  const IntervalUnion s = IntervalUnion::from_endpoints({-0.004, 0.006});
  double iters = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const ShrinkResult r = reeled_shrinkage(member(s), -0.5, 0.5, rng);
    ASSERT_TRUE(s.contains(r.theta));
    ASSERT_GT(r.theta, -0.5);
    ASSERT_LT(r.theta, 0.5);
    iters += static_cast<double>(r.iterations);
  }
  EXPECT_LT(iters / n, 200.0);
}

TEST(ReeledShrinkage, CapAndPreconditions) {
  Rng rng(13);
  ShrinkOptions opts;
  opts.max_iters = 50;
  // Only theta = 0 is accepted, which has probability zero.
  EXPECT_THROW(reeled_shrinkage([](double x) { return x == 0.0; }, -1, 1, rng, opts), ShrinkCapExceeded);
  EXPECT_THROW(reeled_shrinkage([](double) { return true; }, 0.1, 1, rng), InvalidArgument);
}

TEST(ShrinkageMassBound, Examples) {
  EXPECT_NEAR(shrinkage_mass_bound(0.2, 1, 1), 0.2, 1e-15);
  EXPECT_EQ(shrinkage_mass_bound(0.0, 3, 2), 0.0);
  EXPECT_EQ(shrinkage_mass_bound(0.5, 2, 0.5), 1.0);
  EXPECT_THROW(shrinkage_mass_bound(0.5, 0, 0.5), InvalidArgument);
}

TEST(IntervalUnion, MergesAndMeasures) {
  const IntervalUnion s = IntervalUnion::from_endpoints({0.5, 1, -1, 0.3, 0.8, 1.2});
  ASSERT_EQ(s.pieces().size(), 2u);
  EXPECT_NEAR(s.measure(), 1.3 + 0.7, 1e-15);
  EXPECT_FALSE(s.contains(0.3));
  EXPECT_TRUE(s.contains(0.29));
  EXPECT_NEAR(s.measure_within(0, 1), 0.3 + 0.5, 1e-15);
  EXPECT_NEAR(*s.sup_within(0, kInf), 1.2, 1e-15);
  EXPECT_NEAR(*s.sup_within(0, 0.4), 0.3, 1e-15);
  EXPECT_FALSE(s.sup_within(1.5, kInf).has_value());
  const IntervalUnion r = s.reflected(1.0);
  EXPECT_TRUE(r.contains(1.0 - 0.29));
  EXPECT_NEAR(r.measure(), s.measure(), 1e-15);
  EXPECT_THROW(IntervalUnion::from_endpoints({1, 0}), InvalidArgument);
}
