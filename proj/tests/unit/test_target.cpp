#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "geoslice/target.hpp"
#include "oracles.hpp"

using namespace geoslice;

namespace {

constexpr double kPi = std::numbers::pi;

Vector north() { return (Vector(3) << 0, 0, 1).finished(); }

// Counts of a scalar statistic over equal-width bins on [lo, hi).
std::vector<long long> histogram(const std::vector<double>& xs, double lo, double hi, int bins) {
  std::vector<long long> c(static_cast<std::size_t>(bins), 0);
  for (double x : xs) c[static_cast<std::size_t>(std::clamp(static_cast<int>((x - lo) / (hi - lo) * bins), 0, bins - 1))]++;
  return c;
}

// Bin probabilities from a CDF on [lo, hi].
template <class Cdf>
std::vector<double> cdf_masses(Cdf cdf, double lo, double hi, int bins) {
  std::vector<double> p(static_cast<std::size_t>(bins));
  for (int i = 0; i < bins; ++i) p[static_cast<std::size_t>(i)] = cdf(lo + (hi - lo) * (i + 1) / bins) - cdf(lo + (hi - lo) * i / bins);
  return p;
}

}  // namespace

TEST(Presets, UniformSphereMetadata) {
  const Target t = uniform_target(parse_manifold("sphere:2"));
  Rng rng(1);
  EXPECT_EQ(t.density(t.reference_sample(rng)), 1.0);
  EXPECT_EQ(t.p_max, 1.0);
  EXPECT_DOUBLE_EQ(t.diam_w, kPi);
  EXPECT_FALSE(t.lambda_finite());
  EXPECT_NEAR(level_set_measure(t, 0.5).value, 4 * kPi, 1e-12);
  EXPECT_EQ(level_set_measure(t, 1.5).value, 0.0);
  EXPECT_THROW(uniform_target(parse_manifold("euclidean:2")), InvalidArgument);
}

TEST(Presets, UnitDiskMetadata) {
  const Target t = ball_uniform_target(2, 1.0);
  EXPECT_EQ(t.diam_w, 2.0);
  EXPECT_EQ(*t.delta, 0.0);
  ASSERT_TRUE(t.lambda_finite());
  EXPECT_EQ(*t.lambda, 2.0);
  EXPECT_NEAR(t.support_measure, kPi, 1e-14);
}

TEST(Presets, HemisphereDiameterByBoundarySearch) {
  const Target t = spherical_cap_target(2, kPi / 2);
  // Largest geodesic distance between boundary points of the closed cap.
  double best = 0.0;
  for (int i = 0; i < 720; ++i) {
    const double a = 2 * kPi * i / 720;
    const Vector p = (Vector(3) << 1, 0, 0).finished();
    const Vector q = (Vector(3) << std::cos(a), std::sin(a), 0).finished();
    best = std::max(best, std::acos(std::clamp(p.dot(q), -1.0, 1.0)));
  }
  EXPECT_NEAR(t.diam_w, best, 1e-12);
  EXPECT_EQ(*t.delta, 0.0);
  EXPECT_THROW(spherical_cap_target(2, 0.0), InvalidArgument);
  EXPECT_THROW(spherical_cap_target(2, 3.5), InvalidArgument);
  EXPECT_LE(*spherical_cap_target(2, 2.5).delta, spherical_cap_target(2, 2.5).diam_w);
}

TEST(LevelSets, VmfCapAreaAndMonteCarloCrossCheck) {
  const Target vmf = von_mises_fisher_target(2, 2.0, north());
  EXPECT_NEAR(level_set_measure(vmf, 1.0).value, 2 * kPi, 1e-12);

  CustomTargetOptions opts;
  opts.mc_samples = 1'000'000;
  const Target generic = custom_target(
      "vmf by integration", parse_manifold("sphere:2"), [](const Point& x) { return std::exp(2.0 * x.coords[2]); },
      std::exp(2.0), kPi, opts);
  const LevelSetValue mc = level_set_measure(generic, 1.0);
  EXPECT_FALSE(mc.analytic);
  EXPECT_GT(mc.std_error, 0.0);
  EXPECT_NEAR(mc.value, 2 * kPi, 3 * mc.std_error);
}

TEST(LevelSets, MonotoneInT) {
  const Target vmf = von_mises_fisher_target(2, 2.0);
  const Target gauss = ball_gauss_target(2, 0.5, 1.0);
  for (const Target* t : {&vmf, &gauss}) {
    double prev = kInf;
    for (int i = 1; i <= 400; ++i) {
      const double s = t->p_max * i / 400.0;
      const double v = level_set_measure(*t, s).value;
      EXPECT_LE(v, prev + 1e-12);
      prev = v;
    }
    EXPECT_EQ(level_set_measure(*t, t->p_max).value, 0.0);
  }
}

TEST(LevelSets, UnavailableWithoutEnvelope) {
  const Target t = custom_target("no envelope", parse_manifold("euclidean:1"),
                                 [](const Point& x) { return std::exp(-x.coords[0] * x.coords[0]); }, 1.0, kInf);
  EXPECT_THROW(level_set_measure(t, 0.5), Unsupported);
}

TEST(SupTLevel, ClosedFormsAndDenseGrid) {
  EXPECT_NEAR(sup_t_level(uniform_target(parse_manifold("sphere:1"))), 2 * kPi, 1e-12);
  EXPECT_NEAR(sup_t_level(uniform_target(parse_manifold("sphere:2"))), 4 * kPi, 1e-12);
  const double vmf = sup_t_level(von_mises_fisher_target(2, 2.0));
  const double dense = oracle::vmf_s2_sup_t_level_dense(2.0);
  EXPECT_NEAR(vmf / dense, 1.0, 1e-4);
  EXPECT_GE(vmf, dense * (1 - 1e-12));
}

TEST(SupTLevel, InvariantUnderRescaling) {
  for (const Target& t : {von_mises_fisher_target(2, 2.0), ball_gauss_target(2, 0.5, 1.0)}) {
    const double base = sup_t_level(t) / t.p_max;
    for (double c : {0.1, 7.3}) {
      const Target s = t.scaled(c);
      EXPECT_NEAR(sup_t_level(s) / s.p_max, base, 1e-12 * base);
    }
    EXPECT_LE(base, t.support_measure * (1 + 1e-12));
  }
}

TEST(ReferenceSamplers, UniformSphereMeans) {
  const Target t = uniform_target(parse_manifold("sphere:2"));
  Rng rng(2);
  Vector sum = Vector::Zero(3);
  for (int i = 0; i < 100000; ++i) sum += t.reference_sample(rng).coords;
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(sum[k] / 100000.0, 0.0, 0.02);
}

TEST(ReferenceSamplers, HemisphereStaysInSupportWithUniformHeight) {
  const Target t = spherical_cap_target(2, kPi / 2);
  Rng rng(3);
  std::vector<double> z;
  for (int i = 0; i < 100000; ++i) {
    const Point x = t.reference_sample(rng);
    ASSERT_GT(x.coords.dot(north()), 0.0);
    z.push_back(x.coords[2]);
  }
  // Archimedes: the height is uniform on (cos c, 1).
  EXPECT_GT(oracle::chi_square_p(histogram(z, 0, 1, 40), std::vector<double>(40, 1.0 / 40)), 0.001);
}

TEST(ReferenceSamplers, VmfResultantLengthAndHeightLaw) {
  const double kappa = 2.0;
  const Target t = von_mises_fisher_target(2, kappa);
  Rng rng(4);
  Vector sum = Vector::Zero(3);
  std::vector<double> z;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Point x = t.reference_sample(rng);
    sum += x.coords;
    z.push_back(x.coords[2]);
  }
  EXPECT_NEAR((sum / n).norm(), 1.0 / std::tanh(kappa) - 1.0 / kappa, 0.01);
  auto cdf = [&](double s) { return (std::exp(kappa * s) - std::exp(-kappa)) / (std::exp(kappa) - std::exp(-kappa)); };
  EXPECT_GT(oracle::chi_square_p(histogram(z, -1, 1, 40), cdf_masses(cdf, -1, 1, 40)), 0.001);
}

TEST(ReferenceSamplers, VmfInHigherDimensionHasCorrectMeanCosine) {
  // On S^3, E[cos] = I_2(kappa) / I_1(kappa); evaluated here by quadrature of
  // the marginal density (1 - s^2)^{1/2} exp(kappa s).
  const double kappa = 3.0;
  double num = 0.0, den = 0.0;
  const int q = 200000;
  for (int i = 0; i < q; ++i) {
    const double s = -1.0 + 2.0 * (i + 0.5) / q;
    const double wgt = std::sqrt(1 - s * s) * std::exp(kappa * s);
    num += s * wgt;
    den += wgt;
  }
  const Target t = von_mises_fisher_target(3, kappa);
  Rng rng(9);
  double mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) mean += t.reference_sample(rng).coords[3];
  EXPECT_NEAR(mean / n, num / den, 0.01);
}

TEST(ReferenceSamplers, DiskAndTruncatedGaussianRadii) {
  Rng rng(5);
  const int n = 100000;
  const Target disk = ball_uniform_target(2, 1.0);
  std::vector<double> r2;
  for (int i = 0; i < n; ++i) r2.push_back(disk.reference_sample(rng).coords.squaredNorm());
  EXPECT_GT(oracle::chi_square_p(histogram(r2, 0, 1, 40), std::vector<double>(40, 1.0 / 40)), 0.001);

  const double sigma = 0.5;
  const Target gauss = ball_gauss_target(2, sigma, 1.0);
  std::vector<double> r;
  for (int i = 0; i < n; ++i) r.push_back(gauss.reference_sample(rng).coords.norm());
  auto cdf = [&](double s) { return (1 - std::exp(-s * s / (2 * sigma * sigma))) / (1 - std::exp(-1 / (2 * sigma * sigma))); };
  EXPECT_GT(oracle::chi_square_p(histogram(r, 0, 1, 40), cdf_masses(cdf, 0, 1, 40)), 0.001);
}

TEST(Delta, ConvexTargetsScanToZero) {
  Rng rng(6);
  EXPECT_LE(estimate_delta(ball_uniform_target(2, 1.0), 300, 4, rng).value, 2 * 2.0 / 4096);
  EXPECT_LE(estimate_delta(spherical_cap_target(2, kPi / 3), 300, 4, rng).value, 2 * kPi / 4096);
}

TEST(Delta, GapOfTwoIntervalsIsFound) {
  const Target t = intervals_target(IntervalUnion::from_endpoints({0.0, 1.0, 1.3, 2.0}));
  EXPECT_FALSE(t.delta.has_value());
  Rng rng(7);
  const DeltaEstimate est = estimate_delta(t, 400, 4, rng);
  EXPECT_NEAR(est.value, 0.3, 2 * 2.0 / 4096);
  EXPECT_TRUE(est.lower_bound);
}

TEST(Specs, ParseAndReject) {
  EXPECT_EQ(parse_target("vmf:sphere:2:kappa=2:mu=0,0,1").spec, "vmf:sphere:2:kappa=2:mu=0,0,1");
  EXPECT_NEAR(parse_target("vmf:sphere:2:kappa=2:mu=0,0,1").p_max, std::exp(2.0), 1e-12);
  EXPECT_NEAR(parse_target("convex-uniform:ball:2:r=1").support_measure, kPi, 1e-14);
  EXPECT_NEAR(parse_target("cap:sphere:2:colat=pi/2").diam_w, kPi, 1e-15);
  EXPECT_NEAR(parse_target("convex-uniform:box:2:e=1,3").diam_w, std::sqrt(10.0), 1e-15);
  EXPECT_THROW(parse_target("vmf:sphere:2"), InvalidArgument);
  EXPECT_THROW(parse_target("vmf:sphere:2:kappa=2:nu=1"), InvalidArgument);
  EXPECT_THROW(parse_target("cap:sphere:2:colat=4"), InvalidArgument);
  EXPECT_THROW(parse_target("nonsense"), InvalidArgument);
}

TEST(Targets, DensityStaysWithinPmax) {
  Rng rng(8);
  for (const Target& t : {von_mises_fisher_target(2, 2.0), spherical_cap_target(2, 1.0), ball_gauss_target(2, 0.5, 1.0)}) {
    for (int i = 0; i < 2000; ++i) {
      const double p = t.density(t.reference_sample(rng));
      EXPECT_GT(p, 0.0);
      EXPECT_LE(p, t.p_max * (1 + 1e-9));
    }
  }
}
