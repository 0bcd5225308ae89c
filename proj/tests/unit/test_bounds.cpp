#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "geoslice/bounds.hpp"
#include "oracles.hpp"

using namespace geoslice;

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST(Kappa, Examples) {
  for (int d : {1, 2, 3, 7}) EXPECT_EQ(kappa(0.0, 1.0, d), 1.0);
  EXPECT_NEAR(kappa(1.0, kPi, 3), 1.0, 1e-15);
  EXPECT_NEAR(kappa(-1.0, 1.0, 2), oracle::sinh_series(1.0), 1e-14);
  EXPECT_NEAR(kappa(-1.0, 1.0, 2), 1.17520, 1e-5);
  EXPECT_EQ(kappa(-4.0, 2.0, 1), 1.0);
  EXPECT_NEAR(kappa(0.0, 2.0, 3), 4.0, 1e-15);
  // zeta = 4, diam = 0.5: sin(1)^2 / 4.
  EXPECT_NEAR(kappa(4.0, 0.5, 3), std::sin(1.0) * std::sin(1.0) / 4.0, 1e-15);
  EXPECT_THROW(kappa(1.0, 4.0, 2), BoundInapplicable);
  EXPECT_THROW(kappa(0.0, 0.0, 2), InvalidArgument);
}

TEST(EpsilonCorollary, Examples) {
  EXPECT_NEAR(epsilon_corollary(kPi, 0.0, 1, 2 * kPi), 0.5, 1e-15);
  EXPECT_EQ(epsilon_corollary(3.0, 0.0, std::nullopt, 0.1), 1.0);
  EXPECT_NEAR(epsilon_corollary(0.5, 0.1, 2, 1.0), 0.65, 1e-15);
  // m = 1 ignores delta; m = 2 does not.
  EXPECT_NEAR(epsilon_corollary(1.0, 5.0, 1, 2.0), 0.5, 1e-15);
  EXPECT_THROW(epsilon_corollary(1.0, 5.0, 2, 2.0), BoundInapplicable);
  EXPECT_THROW(epsilon_corollary(kPi, 0.0, 1, kPi), BoundInapplicable);
}

TEST(Rho, Examples) {
  EXPECT_NEAR(rho(1.0, 1, 2 * kPi, std::nullopt, 1.0, 2.0, 2 * kPi, 1.0), 0.5, 1e-15);
  EXPECT_NEAR(rho(1.0, 1, 2 * kPi, std::nullopt, 1.0, 2 * kPi, 4 * kPi, 1.0), 1.0 - 1.0 / kPi, 1e-15);
  EXPECT_NEAR(1.0 - 1.0 / kPi, 0.68169, 1e-5);
  EXPECT_NEAR(rho(1e-12, 1, 2 * kPi, std::nullopt, 1.0, 2.0, 2 * kPi, 1.0), 1.0, 1e-11);
  EXPECT_THROW(rho(0.0, 1, 1.0, std::nullopt, 1.0, 1.0, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(rho(1.0, std::nullopt, 1.0, std::nullopt, 1.0, 1.0, 1.0, 1.0), BoundInapplicable);
  // A sup_tL larger than the whole length budget is inconsistent.
  EXPECT_THROW(rho(1.0, 1, 1.0, std::nullopt, 1.0, 1.0, 10.0, 1.0), BoundInapplicable);
}

TEST(Rho, HitAndRun) {
  EXPECT_NEAR(rho_hit_and_run(kPi, 2.0, 2), 0.875, 1e-15);
  EXPECT_NEAR(rho_hit_and_run(4.0 * kPi / 3.0, 2.0, 3), 1.0 - 1.0 / 24.0, 1e-15);
  for (int d = 1; d <= 6; ++d) {
    const double vol = std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
    const double general = rho(1.0, std::nullopt, 1.0, 2.0, std::pow(2.0, d - 1), unit_sphere_volume(d - 1), vol, 1.0);
    EXPECT_NEAR(rho_hit_and_run(vol, 2.0, d), general, 1e-14) << "d = " << d;
  }
}

TEST(Rho, MonotoneInEpsilonAndLevelRatio) {
  double prev = 1.0;
  for (int i = 1; i <= 50; ++i) {
    const double r = rho(i / 50.0, 2, 1.5, std::nullopt, 1.3, 2 * kPi, 0.4, 1.0);
    EXPECT_LT(r, prev);
    prev = r;
  }
  prev = 1.0;
  for (int i = 1; i <= 50; ++i) {
    const double r = rho(0.7, 2, 1.5, 2.0, 1.3, 2 * kPi, 0.02 * i, 1.0);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Rho, InvariantUnderDensityRescaling) {
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    EXPECT_NEAR(rho(0.5, 1, 2 * kPi, std::nullopt, 1.0, 2 * kPi, c * kPi * std::exp(1.0), c * std::exp(2.0)),
                rho(0.5, 1, 2 * kPi, std::nullopt, 1.0, 2 * kPi, kPi * std::exp(1.0), std::exp(2.0)), 1e-12);
  }
}

TEST(Q, Examples) {
  for (double delta : {0.0, 0.3, 2.0}) EXPECT_NEAR(q_factor(1, 2.0 * 1.7, 1.7, delta, std::nullopt), 1.0 / 6.8, 1e-15);
  for (std::int64_t m : {1, 3, 10}) EXPECT_NEAR(q_factor(m, 1e9, 1.0, 0.5, 3.0), 1.0 / 3.0, 1e-8);
  for (std::int64_t m = 1; m <= 8; ++m) {
    const double diam = 1.3, delta = 0.4;
    const double ws = optimal_width(m, diam, delta);
    const double best = q_factor(m, ws, diam, delta, std::nullopt);
    for (int i = 0; i < 1000; ++i) {
      const double w = ws * (0.5 + 1.5 * i / 999.0);
      const auto q = oracle::q_value(static_cast<int>(m), w, diam, delta, 0.0);
      if (q) {
        EXPECT_GE(best, *q - 1e-15) << "m = " << m << ", w = " << w;
      }
    }
  }
}

TEST(OptimalHyperparameters, NamedRegimes) {
  const HyperOpt a = optimal_hyperparameters(1.5, 0.2, std::nullopt);
  EXPECT_EQ(a.regime, 'a');
  EXPECT_EQ(a.m, StepCap(1));
  EXPECT_NEAR(*a.w, 3.0, 1e-15);
  EXPECT_NEAR(a.q, 1.0 / 6.0, 1e-15);

  const HyperOpt d = optimal_hyperparameters(1.0, 0.0, 1.5);
  EXPECT_EQ(d.regime, 'd');
  EXPECT_FALSE(d.m.has_value());
  EXPECT_EQ(d.w_text, "any");
  EXPECT_NEAR(d.q, 1.0 / 1.5, 1e-15);

  const HyperOpt b = optimal_hyperparameters(1.0, 0.5, 3.0);
  EXPECT_EQ(b.regime, 'b');
  EXPECT_TRUE(b.supremum_only);

  const HyperOpt c = optimal_hyperparameters(1.0, 0.5, 5.0);
  EXPECT_EQ(c.regime, 'c');
  EXPECT_NEAR(*c.w, 2.0, 1e-15);

  EXPECT_FALSE(optimal_hyperparameters(1.0, 0.5, 4.0).ties.empty());
}

TEST(OptimalHyperparameters, MatchesGridSearch) {
  Rng rng(2024);
  int checked = 0;
  while (checked < 100) {
    const double diam = 0.5 + 2.5 * rng.uniform();
    const double delta = rng.uniform() < 0.3 ? 0.0 : diam * rng.uniform();
    const double lambda = diam * (0.5 + 5.5 * rng.uniform());
    // Stay clear of the regime boundaries, where the grid cannot resolve ties.
    if (std::abs(lambda / diam - 2.0) < 0.05 || std::abs(lambda / diam - 4.0) < 0.1) continue;
    ++checked;
    const HyperOpt h = optimal_hyperparameters(diam, delta, lambda);
    EXPECT_EQ(h.regime, oracle::regime_from_grid(diam, delta, lambda))
        << "diam " << diam << " delta " << delta << " lambda " << lambda;
    const oracle::GridMax g = oracle::q_grid_max(diam, delta, lambda, 64, 10000, 40.0 * std::max(diam, lambda));
    EXPECT_LE(g.q, h.q * (1 + 1e-12));
    EXPECT_GE(g.q, h.q * 0.95);
  }
  const oracle::GridMax g = oracle::q_grid_max(1.0, 0.3, -1.0, 64, 10000, 40.0);
  EXPECT_NEAR(g.q, optimal_hyperparameters(1.0, 0.3, std::nullopt).q, 1e-4);
  EXPECT_EQ(g.m, 1);
}

TEST(Isoembolic, Examples) {
  for (int d : {1, 2, 5}) EXPECT_NEAR(isoembolic_lower_bound(kPi, kPi, 1.0, d), std::sqrt(2.0 / kPi) / std::sqrt(d), 1e-15);
  EXPECT_NEAR(isoembolic_lower_bound(1.0, 1.0, 0.0, 2), std::sqrt(kPi) / (kPi * kPi), 1e-15);
  EXPECT_NEAR(isoembolic_lower_bound(1.0, 1.0, 0.0, 2), 0.1796, 1e-3);
  EXPECT_THROW(isoembolic_lower_bound(2.0, 1.0, 0.0, 2), BoundInapplicable);
}

TEST(Isoembolic, BelowActualRatio) {
  // S^1 (flat) and S^2 (zeta = 1) with their true volumes.
  const double s1 = 2 * kPi / (kPi * kappa(0.0, kPi, 1) * unit_sphere_volume(0));
  EXPECT_LE(isoembolic_lower_bound(kPi, kPi, 0.0, 1), s1);
  const double s2 = 4 * kPi / (kPi * kappa(1.0, kPi, 2) * unit_sphere_volume(1));
  EXPECT_LE(isoembolic_lower_bound(kPi, kPi, 1.0, 2), s2);
}

TEST(FullReport, Examples) {
  const BoundsReport circle = full_report(uniform_target(parse_manifold("sphere:1")), 1, 2 * kPi, EpsilonMode::Analytic);
  EXPECT_NEAR(circle.rho, 0.5, 1e-12);
  EXPECT_EQ(circle.epsilon_provenance, "analytic");
  EXPECT_TRUE(circle.certified);

  const BoundsReport disk = full_report(ball_uniform_target(2, 1.0), std::nullopt, 1.0, EpsilonMode::Analytic);
  EXPECT_NEAR(disk.rho, 0.875, 1e-12);
  EXPECT_NEAR(disk.lambda_eff, 2.0, 1e-15);

  const BoundsReport cap = full_report(spherical_cap_target(2, kPi / 2), 1, 2 * kPi, EpsilonMode::Corollary);
  EXPECT_NEAR(cap.epsilon, 0.5, 1e-12);
  const double expected = 1.0 - (0.5 / (2 * kPi)) * (1.0 / (2 * kPi)) * (2 * kPi);
  EXPECT_NEAR(cap.rho, expected, 1e-9);
  EXPECT_NEAR(cap.rho, 0.92042, 1e-5);
  EXPECT_NEAR(cap.q, 0.5 / (2 * kPi), 1e-12);
}

TEST(FullReport, VmfUsesTheLevelSetSup) {
  const BoundsReport r = full_report(von_mises_fisher_target(2, 2.0), 1, 2 * kPi, EpsilonMode::Corollary);
  EXPECT_NEAR(r.sup_tl, oracle::vmf_s2_sup_t_level_dense(2.0), 1e-4 * r.sup_tl);
  EXPECT_NEAR(r.p_max, std::exp(2.0), 1e-12);
  EXPECT_GT(r.rho, 0.0);
  EXPECT_LT(r.rho, 1.0);
}

TEST(FullReport, MonteCarloIsFlagged) {
  MonteCarloEpsilonOptions mc;
  mc.probes = 32;
  mc.runs_per_probe = 500;
  mc.seed = 3;
  const BoundsReport r = full_report(spherical_cap_target(2, 1.0), 2, 2.0, EpsilonMode::MonteCarlo, mc);
  EXPECT_EQ(r.epsilon_provenance, "monte-carlo");
  EXPECT_FALSE(r.certified);
  EXPECT_GT(r.epsilon, 0.0);
  EXPECT_LE(r.epsilon, 1.0);
}

TEST(FullReport, Errors) {
  EXPECT_THROW(full_report(uniform_target(parse_manifold("sphere:2")), std::nullopt, 1.0, EpsilonMode::Corollary),
               InvalidArgument);
  EXPECT_THROW(full_report(von_mises_fisher_target(2, 1.0), 1, 1.0, EpsilonMode::Analytic), Error);
}
