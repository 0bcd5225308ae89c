#include <array>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "geoslice/manifold.hpp"
#include "oracles.hpp"

using namespace geoslice;

namespace {

constexpr double kPi = std::numbers::pi;

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(Sphere, ExpMapQuarterTurnMatchesOde) {
  Sphere s2(2);
  const Point x = s2.make_point(vec({0, 0, 1}));
  const TangentVector v{x, vec({1, 0, 0})};
  const Point y = s2.exp_map(x, v, kPi / 2);
  EXPECT_NEAR(y.coords[0], 1.0, 1e-15);
  EXPECT_NEAR(y.coords[1], 0.0, 1e-15);
  EXPECT_NEAR(y.coords[2], 0.0, 1e-15);

  const auto ode = oracle::sphere_geodesic_rk4<3>({0, 0, 1}, {1, 0, 0}, kPi / 2);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y.coords[i], ode[static_cast<std::size_t>(i)], 1e-10);
}

TEST(Sphere, ExpMapAgreesWithOdeForRandomGeodesics) {
  Sphere s2(2);
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Point x = s2.sample_uniform(rng);
    const TangentVector v = s2.sample_unit_tangent(x, rng);
    const double theta = 0.3 + 2.5 * rng.uniform();
    const Point y = s2.exp_map(x, v, theta);
    const auto ode = oracle::sphere_geodesic_rk4<3>({x.coords[0], x.coords[1], x.coords[2]},
                                                    {v.dir[0], v.dir[1], v.dir[2]}, theta);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(y.coords[i], ode[static_cast<std::size_t>(i)], 1e-9);
  }
}

TEST(Sphere, ExpMapIdentityDistanceAndPeriodicity) {
  Rng rng(5);
  for (int d : {1, 2, 4}) {
    Sphere s(d);
    for (int trial = 0; trial < 200; ++trial) {
      const Point x = s.sample_uniform(rng);
      const TangentVector v = s.sample_unit_tangent(x, rng);
      EXPECT_EQ(s.exp_map(x, v, 0.0).coords, x.coords);
      const double theta = kPi * rng.uniform_open();
      const Point y = s.exp_map(x, v, theta);
      EXPECT_NEAR(y.coords.norm(), 1.0, 1e-12);
      if (theta < kPi * (1 - 1e-6)) {
        EXPECT_NEAR(s.distance(x, y), theta, 1e-9);
      }
      const Point z = s.exp_map(x, v, theta + 2 * kPi);
      EXPECT_LT((z.coords - y.coords).norm(), 1e-10);
    }
  }
}

TEST(Sphere, TangentSamplesAreUnitAndOrthogonal) {
  Sphere s2(2);
  Rng rng(3);
  const Point north = s2.make_point(vec({0, 0, 1}));
  for (int i = 0; i < 1000; ++i) {
    const TangentVector v = s2.sample_unit_tangent(north, rng);
    EXPECT_NEAR(v.dir[2], 0.0, 1e-12);
    EXPECT_NEAR(v.dir.norm(), 1.0, 1e-12);
  }
  for (int i = 0; i < 1000; ++i) {
    const Point x = s2.sample_uniform(rng);
    const TangentVector v = s2.sample_unit_tangent(x, rng);
    EXPECT_NEAR(v.dir.dot(x.coords), 0.0, 1e-12);
    EXPECT_NEAR(v.dir.norm(), 1.0, 1e-12);
  }
}

TEST(Sphere, CircleHasTwoTangentDirectionsEquallyOften) {
  Sphere s1(1);
  Rng rng(8);
  const Point x = s1.make_point(vec({0.6, 0.8}));
  const Vector rot = vec({-0.8, 0.6});
  int plus = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const TangentVector v = s1.sample_unit_tangent(x, rng);
    const double c = v.dir.dot(rot);
    ASSERT_NEAR(std::abs(c), 1.0, 1e-12);
    if (c > 0) ++plus;
  }
  EXPECT_NEAR(static_cast<double>(plus) / n, 0.5, 0.01);
}

TEST(Sphere, DistanceAndMetadata) {
  Sphere s2(2);
  EXPECT_NEAR(s2.distance(s2.make_point(vec({0, 0, 1})), s2.make_point(vec({0, 0, -1}))), kPi, 1e-12);
  const Point x = s2.make_point(vec({0, 1, 0}));
  EXPECT_EQ(s2.distance(x, x), 0.0);
  const ManifoldInfo info = s2.info();
  EXPECT_EQ(info.dim, 2);
  EXPECT_EQ(info.ricci_lower, 1.0);
  EXPECT_DOUBLE_EQ(info.diameter, kPi);
  EXPECT_DOUBLE_EQ(info.injectivity_radius, kPi);
  EXPECT_NEAR(info.omega_dm1, 2 * kPi, 1e-14);
  EXPECT_NEAR(info.total_measure, 4 * kPi, 1e-12);
  EXPECT_EQ(Sphere(1).info().ricci_lower, 0.0);
  Rng rng(1);
  const TangentVector v = s2.sample_unit_tangent(x, rng);
  EXPECT_DOUBLE_EQ(s2.cut_time(x, v).value, kPi);
  EXPECT_FALSE(s2.cut_time(x, v).lower_bound);
}

TEST(Sphere, TriangleInequalityAndSymmetry) {
  Sphere s3(3);
  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    const Point a = s3.sample_uniform(rng), b = s3.sample_uniform(rng), c = s3.sample_uniform(rng);
    EXPECT_NEAR(s3.distance(a, b), s3.distance(b, a), 1e-14);
    EXPECT_LE(s3.distance(a, c), s3.distance(a, b) + s3.distance(b, c) + 1e-12);
  }
}

TEST(Euclidean, StraightLinesAndUniformAngles) {
  Euclidean r2(2);
  const Point x = r2.make_point(vec({1, 2}));
  const Point y = r2.exp_map(x, {x, vec({0, 1})}, 3.0);
  EXPECT_EQ(y.coords, vec({1, 5}));
  EXPECT_TRUE(std::isinf(r2.cut_time(x, {x, vec({0, 1})}).value));
  EXPECT_EQ(r2.info().ricci_lower, 0.0);

  Rng rng(42);
  std::vector<long long> counts(36, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const TangentVector v = r2.sample_unit_tangent(x, rng);
    double a = std::atan2(v.dir[1], v.dir[0]);
    if (a < 0) a += 2 * kPi;
    counts[std::min(35, static_cast<int>(a / (2 * kPi) * 36))]++;
  }
  EXPECT_GT(oracle::chi_square_p(counts, std::vector<double>(36, 1.0 / 36)), 0.001);
}

TEST(Torus, WrapAroundDistanceAndCutTimes) {
  Torus t(2, 2 * kPi);
  const Point x = t.make_point(vec({0.1, 0}));
  const Point y = t.make_point(vec({6.2, 0}));
  // Shortest lattice shift: 0.1 + (2 pi - 6.2).
  EXPECT_NEAR(t.distance(x, y), 0.1 + 2 * kPi - 6.2, 1e-12);
  EXPECT_NEAR(t.distance(x, y), 0.1832, 1e-4);

  const CutTime axis = t.cut_time(x, {x, vec({1, 0})});
  EXPECT_DOUBLE_EQ(axis.value, kPi);
  EXPECT_FALSE(axis.lower_bound);
  const CutTime generic = t.cut_time(x, {x, vec({0.6, 0.8})});
  EXPECT_DOUBLE_EQ(generic.value, kPi);
  EXPECT_TRUE(generic.lower_bound);

  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const TangentVector v = t.sample_unit_tangent(x, rng);
    const Point z = t.exp_map(x, v, 40.0 * rng.uniform());
    for (int k = 0; k < 2; ++k) {
      EXPECT_GE(z.coords[k], 0.0);
      EXPECT_LT(z.coords[k], 2 * kPi);
    }
  }
}

TEST(Manifold, OmegaRatioLowerBound) {
  for (int d = 1; d <= 20; ++d) {
    const double ratio = unit_sphere_volume(d) / unit_sphere_volume(d - 1);
    EXPECT_GE(ratio, std::sqrt(2 * kPi / d)) << "d = " << d;
  }
  EXPECT_NEAR(unit_sphere_volume(0), 2.0, 1e-15);
  EXPECT_NEAR(unit_sphere_volume(1), 2 * kPi, 1e-14);
  EXPECT_NEAR(unit_sphere_volume(2), 4 * kPi, 1e-13);
}

TEST(Manifold, DimensionMismatchAndSpecs) {
  Sphere s2(2);
  EXPECT_THROW(s2.make_point(vec({1, 0})), DimensionMismatch);
  const Point x = s2.make_point(vec({0, 0, 1}));
  EXPECT_THROW(s2.exp_map(x, {x, vec({1, 0})}, 1.0), DimensionMismatch);
  EXPECT_EQ(parse_manifold("sphere:3")->ambient_dim(), 4);
  EXPECT_EQ(parse_manifold("euclidean:2")->spec(), "euclidean:2");
  EXPECT_NEAR(dynamic_cast<const Torus&>(*parse_manifold("torus:2:2pi")).period(), 2 * kPi, 1e-15);
  EXPECT_THROW(parse_manifold("hyperbolic:2"), InvalidArgument);
  EXPECT_THROW(parse_manifold("sphere:x"), InvalidArgument);
}
