#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "geoslice/errors.hpp"
#include "geoslice/manifold.hpp"
#include "geoslice/random.hpp"
#include "geoslice/slice1d.hpp"
#include "geoslice/text.hpp"

namespace geoslice {

/// Axis-aligned box in Euclidean coordinates; used as a sampling envelope.
struct Box {
  Vector lo;
  Vector hi;
  double volume() const { return (hi - lo).prod(); }
};

// Preset shapes. Sphere presets are symmetric about `axis`.
struct UniformShape {};
struct CapShape {
  double colatitude;
  Vector axis;
};
struct VmfShape {
  double kappa;
  Vector axis;
};
struct BallShape {
  double radius;
};
struct BoxShape {
  Vector extents;
};
struct BallGaussShape {
  double sigma;
  double radius;
};
struct IntervalsShape {
  IntervalUnion set;
};
struct CustomShape {};

using TargetShape =
    std::variant<UniformShape, CapShape, VmfShape, BallShape, BoxShape, BallGaussShape, IntervalsShape, CustomShape>;

struct LevelSetValue {
  double value = 0.0;
  double std_error = 0.0;
  bool analytic = true;
};

/// Unnormalized density on a manifold with the metadata the bounds need.
/// Immutable once built; copies share the evaluators.
struct Target {
  std::string spec;
  std::shared_ptr<const Manifold> manifold;
  std::function<double(const Point&)> density;
  double p_max = 1.0;
  double diam_w = 0.0;
  /// Largest gap inside a geodesic superlevel set; empty when only an estimate exists.
  std::optional<double> delta;
  /// sup diam W(x, v); empty means infinite.
  std::optional<double> lambda;
  /// nu(W), the measure of the support.
  double support_measure = 0.0;
  /// Analytic t -> nu(L(t)); empty for generic targets.
  std::function<double(double)> level_set;
  std::function<Point(Rng&)> reference;
  TargetShape shape = CustomShape{};
  /// Euclidean bounding box of the support for Monte-Carlo integration.
  std::optional<Box> envelope;
  /// Density values of a fixed uniform sample over the integration region.
  std::shared_ptr<const std::vector<double>> mc_density_values;
  double mc_region_measure = 0.0;

  double operator()(const Point& x) const { return density(x); }
  bool lambda_finite() const { return lambda.has_value(); }
  bool has_reference_sampler() const { return static_cast<bool>(reference); }
  int dim() const { return manifold->dim(); }

  Point reference_sample(Rng& rng) const {
    if (!reference) throw Unsupported("target '" + spec + "' has no exact reference sampler");
    return reference(rng);
  }

  /// Same target with p replaced by c p; level sets rescale accordingly.
  Target scaled(double c) const {
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("scaled: factor must be positive");
    Target out = *this;
    auto inner = density;
    out.density = [inner, c](const Point& x) { return c * inner(x); };
    out.p_max = c * p_max;
    if (level_set) {
      auto ls = level_set;
      out.level_set = [ls, c](double t) { return ls(t / c); };
    }
    if (mc_density_values) {
      auto scaled_values = std::make_shared<std::vector<double>>(*mc_density_values);
      for (double& v : *scaled_values) v *= c;
      out.mc_density_values = std::move(scaled_values);
    }
    out.spec = spec + " scaled by " + text::exact(c);
    return out;
  }
};

/// integral_0^c sin^n(phi) dphi for c in [0, pi].
inline double sin_power_integral(int n, double c) {
  const double a = (n + 1) / 2.0;
  if (c <= 0.0) return 0.0;
  if (c >= std::numbers::pi) return boost::math::beta(a, 0.5);
  const double half = std::numbers::pi / 2.0;
  if (c <= half) {
    const double s = std::sin(c);
    return 0.5 * boost::math::beta(a, 0.5, s * s);
  }
  const double s = std::sin(std::numbers::pi - c);
  return boost::math::beta(a, 0.5) - 0.5 * boost::math::beta(a, 0.5, s * s);
}

/// Area of a geodesic ball (cap) of radius c on the unit sphere S^d.
inline double cap_area(int d, double c) {
  return unit_sphere_volume(d - 1) * sin_power_integral(d - 1, std::clamp(c, 0.0, std::numbers::pi));
}

namespace detail {

inline Vector default_pole(int ambient) {
  Vector e = Vector::Zero(ambient);
  e[ambient - 1] = 1.0;
  return e;
}

// Rotates a vector expressed in the frame whose last axis is e_last onto `axis`
// with a Householder reflection (orientation does not matter for symmetric shapes).
inline Vector from_pole_frame(const Vector& local, const Vector& axis) {
  const int n = static_cast<int>(axis.size());
  Vector e = default_pole(n);
  Vector u = e - axis;
  const double un = u.norm();
  if (un < 1e-14) return local;
  u /= un;
  return local - 2.0 * u.dot(local) * u;
}

inline Vector to_pole_frame(const Vector& global, const Vector& axis) { return from_pole_frame(global, axis); }

// Colatitude from the pole of a uniform draw on a cap of half-angle c on S^d.
inline double cap_colatitude(int d, double c, double u) {
  const double a = d / 2.0;
  const double full = boost::math::beta(a, 0.5);
  const double y = u * sin_power_integral(d - 1, c);
  const double half = 0.5 * full;
  if (y <= half) {
    const double x = boost::math::ibeta_inv(a, 0.5, std::clamp(2.0 * y / full, 0.0, 1.0));
    return std::asin(std::sqrt(x));
  }
  const double x = boost::math::ibeta_inv(a, 0.5, std::clamp(2.0 * (full - y) / full, 0.0, 1.0));
  return std::numbers::pi - std::asin(std::sqrt(x));
}

// Point at colatitude phi from e_last with a uniform equatorial direction.
inline Vector polar_point(int d, double phi, Rng& rng) {
  Vector u = random_direction(d, rng, nullptr);
  Vector x(d + 1);
  x.head(d) = std::sin(phi) * u;
  x[d] = std::cos(phi);
  return x;
}

// Cosine to the mean direction for vMF on S^d (ambient p = d + 1).
inline double vmf_cosine(int d, double kappa, Rng& rng) {
  if (d == 2) {
    const double u = rng.uniform_open();
    return std::clamp(1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa, -1.0, 1.0);
  }
  const double p1 = static_cast<double>(d);  // p - 1
  const double b = (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + p1 * p1)) / p1;
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + p1 * std::log(1.0 - x0 * x0);
  std::gamma_distribution<double> g(p1 / 2.0, 1.0);
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    const double g1 = g(rng.engine());
    const double g2 = g(rng.engine());
    const double z = g1 / (g1 + g2);
    const double w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
    const double u = rng.uniform_open();
    if (kappa * w + p1 * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
  throw RngFailure("vMF sampler: rejection loop did not terminate");
}

inline Box centered_box(const Vector& half_extents) { return {-half_extents, half_extents}; }

inline Point uniform_in_box(const Box& box, Rng& rng) {
  Vector x(box.lo.size());
  for (int i = 0; i < x.size(); ++i) x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * rng.uniform();
  return {std::move(x)};
}

inline void require_sphere(const Manifold& m, const std::string& what) {
  if (m.spec().rfind("sphere:", 0) != 0) throw InvalidArgument(what + " is only defined on a sphere");
}

}  // namespace detail

/// Uniform density on a manifold of finite measure.
inline Target uniform_target(std::shared_ptr<const Manifold> manifold) {
  const ManifoldInfo info = manifold->info();
  if (!std::isfinite(info.total_measure)) {
    throw InvalidArgument("uniform target needs finite total measure; " + manifold->spec() + " has none");
  }
  Target t;
  t.spec = "uniform:" + manifold->spec();
  t.manifold = manifold;
  t.density = [](const Point&) { return 1.0; };
  t.p_max = 1.0;
  t.diam_w = info.diameter;
  t.delta = 0.0;
  t.lambda = std::nullopt;
  t.support_measure = info.total_measure;
  const double total = info.total_measure;
  t.level_set = [total](double s) { return s < 1.0 ? total : 0.0; };
  t.reference = [manifold](Rng& rng) { return manifold->sample_uniform(rng); };
  t.shape = UniformShape{};
  return t;
}

/// Uniform on the cap {x : angle(x, axis) < colatitude} of S^d.
inline Target spherical_cap_target(int d, double colatitude, std::optional<Vector> axis = std::nullopt) {
  if (!(colatitude > 0.0 && colatitude <= std::numbers::pi)) {
    throw InvalidArgument("cap colatitude must lie in (0, pi]");
  }
  auto sphere = std::make_shared<Sphere>(d);
  Vector pole = axis ? sphere->make_point(*axis).coords : detail::default_pole(d + 1);
  const double threshold = std::cos(colatitude);
  Target t;
  t.spec = "cap:sphere:" + std::to_string(d) + ":colat=" + text::exact(colatitude);
  t.manifold = sphere;
  t.density = [pole, threshold](const Point& x) { return x.coords.dot(pole) > threshold ? 1.0 : 0.0; };
  t.p_max = 1.0;
  t.diam_w = std::min(2.0 * colatitude, std::numbers::pi);
  t.delta = colatitude <= std::numbers::pi / 2.0 ? 0.0 : 2.0 * (std::numbers::pi - colatitude);
  t.lambda = std::nullopt;
  t.support_measure = cap_area(d, colatitude);
  const double area = t.support_measure;
  t.level_set = [area](double s) { return s < 1.0 ? area : 0.0; };
  t.reference = [d, colatitude, pole](Rng& rng) {
    const double phi = detail::cap_colatitude(d, colatitude, rng.uniform_open());
    Vector x = detail::from_pole_frame(detail::polar_point(d, phi, rng), pole);
    return Point{x / x.norm()};
  };
  t.shape = CapShape{colatitude, pole};
  return t;
}

/// von Mises-Fisher density exp(kappa <mu, x>) on S^d.
inline Target von_mises_fisher_target(int d, double kappa, std::optional<Vector> mean = std::nullopt) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InvalidArgument("vMF concentration must be positive");
  auto sphere = std::make_shared<Sphere>(d);
  Vector mu = mean ? sphere->make_point(*mean).coords : detail::default_pole(d + 1);
  Target t;
  t.spec = "vmf:sphere:" + std::to_string(d) + ":kappa=" + text::exact(kappa);
  t.manifold = sphere;
  t.density = [mu, kappa](const Point& x) { return std::exp(kappa * x.coords.dot(mu)); };
  t.p_max = std::exp(kappa);
  t.diam_w = std::numbers::pi;
  // Superlevel sets just below the equator leave a gap approaching pi along
  // great circles through their boundary.
  t.delta = std::numbers::pi;
  t.lambda = std::nullopt;
  t.support_measure = unit_sphere_volume(d);
  const double total = t.support_measure;
  t.level_set = [d, kappa, total](double s) {
    if (!(s > 0.0)) return total;
    const double a = std::log(s) / kappa;
    if (a >= 1.0) return 0.0;
    if (a < -1.0) return total;
    return cap_area(d, std::acos(a));
  };
  t.reference = [d, kappa, mu](Rng& rng) {
    const double w = detail::vmf_cosine(d, kappa, rng);
    const double phi = std::acos(std::clamp(w, -1.0, 1.0));
    Vector x = detail::from_pole_frame(detail::polar_point(d, phi, rng), mu);
    return Point{x / x.norm()};
  };
  t.shape = VmfShape{kappa, mu};
  return t;
}

/// Uniform on the centered ball of radius r in R^d.
inline Target ball_uniform_target(int d, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("ball radius must be positive");
  auto space = std::make_shared<Euclidean>(d);
  const double r2 = radius * radius;
  Target t;
  t.spec = "convex-uniform:ball:" + std::to_string(d) + ":r=" + text::exact(radius);
  t.manifold = space;
  t.density = [r2](const Point& x) { return x.coords.squaredNorm() < r2 ? 1.0 : 0.0; };
  t.diam_w = 2.0 * radius;
  t.delta = 0.0;
  t.lambda = 2.0 * radius;
  t.support_measure = unit_ball_volume(d) * std::pow(radius, d);
  const double vol = t.support_measure;
  t.level_set = [vol](double s) { return s < 1.0 ? vol : 0.0; };
  t.envelope = detail::centered_box(Vector::Constant(d, radius));
  const Box box = *t.envelope;
  t.reference = [box, r2](Rng& rng) {
    for (;;) {
      Point p = detail::uniform_in_box(box, rng);
      if (p.coords.squaredNorm() < r2) return p;
    }
  };
  t.shape = BallShape{radius};
  return t;
}

/// Uniform on the centered box with the given side lengths.
inline Target box_uniform_target(const Vector& extents) {
  if (extents.size() < 1 || !(extents.minCoeff() > 0.0)) throw InvalidArgument("box extents must be positive");
  const int d = static_cast<int>(extents.size());
  auto space = std::make_shared<Euclidean>(d);
  const Vector half = extents / 2.0;
  std::string list;
  for (int i = 0; i < d; ++i) list += (i ? "," : "") + text::exact(extents[i]);
  Target t;
  t.spec = "convex-uniform:box:" + std::to_string(d) + ":e=" + list;
  t.manifold = space;
  t.density = [half](const Point& x) { return (x.coords.array().abs() < half.array()).all() ? 1.0 : 0.0; };
  t.diam_w = extents.norm();
  t.delta = 0.0;
  t.lambda = extents.norm();
  t.support_measure = extents.prod();
  const double vol = t.support_measure;
  t.level_set = [vol](double s) { return s < 1.0 ? vol : 0.0; };
  t.envelope = detail::centered_box(half);
  const Box box = *t.envelope;
  t.reference = [box](Rng& rng) { return detail::uniform_in_box(box, rng); };
  t.shape = BoxShape{extents};
  return t;
}

/// exp(-|x|^2 / (2 sigma^2)) restricted to the ball of radius R in R^d.
inline Target ball_gauss_target(int d, double sigma, double radius) {
  if (!(sigma > 0.0) || !(radius > 0.0)) throw InvalidArgument("ball-gauss needs sigma > 0 and r > 0");
  auto space = std::make_shared<Euclidean>(d);
  const double r2 = radius * radius;
  Target t;
  t.spec = "ball-gauss:" + std::to_string(d) + ":sigma=" + text::exact(sigma) + ":r=" + text::exact(radius);
  t.manifold = space;
  t.density = [sigma, r2](const Point& x) {
    const double s2 = x.coords.squaredNorm();
    return s2 < r2 ? std::exp(-0.5 * s2 / (sigma * sigma)) : 0.0;
  };
  t.diam_w = 2.0 * radius;
  t.delta = 0.0;
  t.lambda = 2.0 * radius;
  t.support_measure = unit_ball_volume(d) * std::pow(radius, d);
  const double vd = unit_ball_volume(d);
  t.level_set = [d, sigma, radius, vd](double s) {
    if (s >= 1.0) return 0.0;
    const double rho = s > 0.0 ? sigma * std::sqrt(-2.0 * std::log(s)) : radius;
    return vd * std::pow(std::min(rho, radius), d);
  };
  t.envelope = detail::centered_box(Vector::Constant(d, radius));
  t.reference = [d, sigma, r2](Rng& rng) {
    for (;;) {
      Vector x(d);
      for (int i = 0; i < d; ++i) x[i] = sigma * rng.normal();
      if (x.squaredNorm() < r2) return Point{std::move(x)};
    }
  };
  t.shape = BallGaussShape{sigma, radius};
  return t;
}

/// Uniform on a finite union of open intervals of the real line. Delta is left
/// to the estimator on purpose.
inline Target intervals_target(const IntervalUnion& set) {
  if (set.empty()) throw InvalidArgument("interval target needs at least one interval");
  auto line = std::make_shared<Euclidean>(1);
  std::string list;
  for (const auto& [a, b] : set.pieces()) list += (list.empty() ? "" : ",") + text::exact(a) + "," + text::exact(b);
  Target t;
  t.spec = "intervals:" + list;
  t.manifold = line;
  t.density = [set](const Point& x) { return set.contains(x.coords[0]) ? 1.0 : 0.0; };
  t.diam_w = set.diameter();
  t.lambda = set.diameter();
  t.support_measure = set.measure();
  const double vol = t.support_measure;
  t.level_set = [vol](double s) { return s < 1.0 ? vol : 0.0; };
  t.envelope = Box{Vector::Constant(1, set.inf()), Vector::Constant(1, set.sup())};
  t.reference = [set](Rng& rng) {
    double u = rng.uniform() * set.measure();
    for (const auto& [a, b] : set.pieces()) {
      if (u < b - a) return Point{Vector::Constant(1, a + u)};
      u -= b - a;
    }
    const auto& last = set.pieces().back();
    return Point{Vector::Constant(1, 0.5 * (last.first + last.second))};
  };
  t.shape = IntervalsShape{set};
  return t;
}

struct CustomTargetOptions {
  std::optional<double> delta;
  std::optional<double> lambda;
  std::optional<Box> envelope;
  std::function<Point(Rng&)> reference;
  std::int64_t mc_samples = 100'000;
  std::uint64_t mc_seed = 0x5eed;
};

/// Generic target; the level-set function is integrated by Monte Carlo over the
/// envelope (Euclidean) or the whole manifold (finite measure).
inline Target custom_target(std::string spec, std::shared_ptr<const Manifold> manifold,
                            std::function<double(const Point&)> density, double p_max, double diam_w,
                            const CustomTargetOptions& opts = {}) {
  if (!(p_max > 0.0)) throw InvalidArgument("custom target: p_max must be positive");
  const ManifoldInfo info = manifold->info();
  if (!(diam_w > 0.0) || diam_w > info.diameter) throw InvalidArgument("custom target: need 0 < diam_W <= diam(M)");
  Target t;
  t.spec = std::move(spec);
  t.manifold = manifold;
  t.density = std::move(density);
  t.p_max = p_max;
  t.diam_w = diam_w;
  t.delta = opts.delta;
  t.lambda = opts.lambda;
  t.envelope = opts.envelope;
  t.reference = opts.reference;
  t.shape = CustomShape{};
  const bool finite = std::isfinite(info.total_measure);
  if (opts.envelope || finite) {
    Rng rng(opts.mc_seed);
    auto values = std::make_shared<std::vector<double>>();
    values->reserve(static_cast<std::size_t>(opts.mc_samples));
    std::int64_t positive = 0;
    for (std::int64_t i = 0; i < opts.mc_samples; ++i) {
      const Point x = opts.envelope ? detail::uniform_in_box(*opts.envelope, rng) : manifold->sample_uniform(rng);
      const double v = t.density(x);
      values->push_back(v);
      if (v > 0.0) ++positive;
    }
    t.mc_region_measure = opts.envelope ? opts.envelope->volume() : info.total_measure;
    t.mc_density_values = std::move(values);
    t.support_measure = t.mc_region_measure * static_cast<double>(positive) / static_cast<double>(opts.mc_samples);
  }
  return t;
}

/// Monte-Carlo nu(L(t)) from the target's fixed integration sample.
inline LevelSetValue level_set_measure_monte_carlo(const Target& target, double t) {
  if (!target.mc_density_values) {
    throw Unsupported("Monte-Carlo level sets for '" + target.spec +
                      "' need finite total measure or a proposal envelope");
  }
  const auto& values = *target.mc_density_values;
  std::int64_t hits = 0;
  for (double v : values) hits += v > t;
  const double n = static_cast<double>(values.size());
  const double frac = static_cast<double>(hits) / n;
  return {target.mc_region_measure * frac, target.mc_region_measure * std::sqrt(frac * (1.0 - frac) / n), false};
}

/// nu({p > t}); analytic for presets.
inline LevelSetValue level_set_measure(const Target& target, double t) {
  if (!(t > 0.0)) throw InvalidArgument("level_set_measure: t must be positive");
  if (target.level_set) return {target.level_set(t), 0.0, true};
  return level_set_measure_monte_carlo(target, t);
}

/// sup_t t nu(L(t)), by a log grid over (1e-6 p_max, p_max) and golden-section refinement.
inline double sup_t_level(const Target& target) {
  if (std::holds_alternative<UniformShape>(target.shape) || std::holds_alternative<CapShape>(target.shape) ||
      std::holds_alternative<BallShape>(target.shape) || std::holds_alternative<BoxShape>(target.shape) ||
      std::holds_alternative<IntervalsShape>(target.shape)) {
    return target.p_max * target.support_measure;
  }
  const double pmax = target.p_max;
  auto f = [&](double log_s) {
    const double t = pmax * std::exp(log_s);
    return t * level_set_measure(target, t).value;
  };
  constexpr int kGrid = 1024;
  const double lo = std::log(1e-6);
  const double step = -lo / (kGrid - 1);
  int best_i = 0;
  double best = -1.0;
  std::vector<double> values(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    // The right end is approached from below: t = p_max has an empty level set.
    const double s = i == kGrid - 1 ? -1e-12 : lo + step * i;
    values[i] = f(s);
    if (values[i] > best) {
      best = values[i];
      best_i = i;
    }
  }
  double a = lo + step * std::max(0, best_i - 1);
  double b = std::min(-1e-12, lo + step * std::min(kGrid - 1, best_i + 1));
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-10; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return std::max({best, fc, fd});
}

struct DeltaEstimate {
  double value = 0.0;
  /// A sampled sup: below the true sup up to the grid resolution.
  bool lower_bound = true;
  std::int64_t probes = 0;
};

/// Samples a point of W: exact reference draw when available, else rejection
/// from the envelope or the uniform distribution on the manifold.
inline Point sample_support_point(const Target& target, Rng& rng) {
  if (target.reference) return target.reference(rng);
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    Point x = target.envelope ? detail::uniform_in_box(*target.envelope, rng) : target.manifold->sample_uniform(rng);
    if (target.density(x) > 0.0) return x;
  }
  throw Unsupported("could not locate the support of '" + target.spec + "'");
}

/// Monte-Carlo sup over random (x, v, t) of the gap mass inside the convex hull
/// of the geodesic superlevel set on [0, cut time).
inline DeltaEstimate estimate_delta(const Target& target, std::int64_t n_geodesics, std::int64_t n_levels, Rng& rng) {
  constexpr int kGrid = 4096;
  const Manifold& m = *target.manifold;
  DeltaEstimate est;
  std::vector<char> hit(kGrid);
  for (std::int64_t g = 0; g < n_geodesics; ++g) {
    const Point x = sample_support_point(target, rng);
    const TangentVector v = m.sample_unit_tangent(x, rng);
    const double px = target.density(x);
    double horizon = m.cut_time(x, v).value;
    if (!std::isfinite(horizon)) horizon = target.lambda.value_or(target.diam_w) * (1.0 + 1e-9);
    std::vector<double> along(kGrid);
    for (int i = 0; i < kGrid; ++i) along[i] = target.density(m.exp_map(x, v, horizon * i / kGrid));
    for (std::int64_t k = 0; k < n_levels; ++k) {
      const double t = px * rng.uniform_open();
      int first = -1;
      int last = -1;
      int inside = 0;
      for (int i = 0; i < kGrid; ++i) {
        if (along[i] > t) {
          if (first < 0) first = i;
          last = i;
          ++inside;
        }
      }
      ++est.probes;
      if (first < 0) continue;
      const double gap = horizon * static_cast<double>((last - first + 1) - inside) / kGrid;
      est.value = std::max(est.value, gap);
    }
  }
  return est;
}

/// Start points from which slow mixing is expected: the edge of the support,
/// or the density minimum for full-support targets.
inline Point worst_start(const Target& target) {
  const Manifold& m = *target.manifold;
  const int n = m.ambient_dim();
  if (const auto* cap = std::get_if<CapShape>(&target.shape)) {
    const double phi = cap->colatitude * (1.0 - 1e-6);
    Vector local = Vector::Zero(n);
    local[0] = std::sin(phi);
    local[n - 1] = std::cos(phi);
    return m.make_point(detail::from_pole_frame(local, cap->axis));
  }
  if (const auto* vmf = std::get_if<VmfShape>(&target.shape)) return m.make_point(-vmf->axis);
  if (const auto* ball = std::get_if<BallShape>(&target.shape)) {
    Vector x = Vector::Zero(n);
    x[0] = ball->radius * (1.0 - 1e-3);
    return m.make_point(x);
  }
  if (const auto* box = std::get_if<BoxShape>(&target.shape)) {
    return m.make_point(0.5 * box->extents * (1.0 - 1e-3));
  }
  if (const auto* bg = std::get_if<BallGaussShape>(&target.shape)) {
    Vector x = Vector::Zero(n);
    x[0] = bg->radius * (1.0 - 1e-3);
    return m.make_point(x);
  }
  if (const auto* iv = std::get_if<IntervalsShape>(&target.shape)) {
    const auto& [a, b] = iv->set.pieces().front();
    return m.make_point(Vector::Constant(1, a + 1e-3 * (b - a)));
  }
  if (std::holds_alternative<UniformShape>(target.shape)) {
    Vector x = Vector::Zero(n);
    if (m.spec().rfind("sphere:", 0) == 0) x[n - 1] = 1.0;
    return m.make_point(x);
  }
  Rng rng(0x5747);
  return sample_support_point(target, rng);
}

namespace detail {

inline std::map<std::string, std::string> key_values(const std::vector<std::string>& parts, std::size_t from,
                                                     const std::string& ctx) {
  std::map<std::string, std::string> kv;
  for (std::size_t i = from; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos) throw InvalidArgument(ctx + ": expected key=value, got '" + parts[i] + "'");
    kv[parts[i].substr(0, eq)] = parts[i].substr(eq + 1);
  }
  return kv;
}

inline void reject_unknown(const std::map<std::string, std::string>& kv, std::initializer_list<const char*> known,
                           const std::string& ctx) {
  for (const auto& [k, v] : kv) {
    if (std::none_of(known.begin(), known.end(), [&](const char* s) { return k == s; })) {
      throw InvalidArgument(ctx + ": unknown parameter '" + k + "'");
    }
  }
}

inline std::string required(const std::map<std::string, std::string>& kv, const std::string& key,
                            const std::string& ctx) {
  auto it = kv.find(key);
  if (it == kv.end()) throw InvalidArgument(ctx + ": missing parameter '" + key + "'");
  return it->second;
}

inline Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

}  // namespace detail

/// Parses a target specification string:
///   uniform:<manifold spec>
///   cap:sphere:<d>:colat=<c>
///   vmf:sphere:<d>:kappa=<k>[:mu=<a,b,...>]
///   convex-uniform:ball:<d>:r=<r>
///   convex-uniform:box:<d>:e=<e1,...,ed>
///   ball-gauss:<d>:sigma=<s>:r=<R>
///   intervals:<a1,b1,a2,b2,...>
/// Long preset names (uniform-manifold, spherical-cap-uniform, von-mises-fisher,
/// ball-truncated-gaussian) are accepted as aliases.
inline Target parse_target(const std::string& spec) {
  const std::string ctx = "target spec '" + spec + "'";
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw InvalidArgument("unrecognized " + ctx);
  std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  if (kind == "uniform-manifold") kind = "uniform";
  if (kind == "spherical-cap-uniform") kind = "cap";
  if (kind == "von-mises-fisher") kind = "vmf";
  if (kind == "ball-truncated-gaussian") kind = "ball-gauss";

  if (kind == "uniform") return uniform_target(parse_manifold(rest));
  if (kind == "intervals") return intervals_target(IntervalUnion::from_endpoints(text::parse_real_list(rest, ctx)));

  const auto parts = text::split(spec, ':');
  if (kind == "cap" || kind == "vmf") {
    if (parts.size() < 3 || parts[1] != "sphere") throw InvalidArgument(ctx + ": expected " + kind + ":sphere:<d>:...");
    const int d = static_cast<int>(text::parse_int(parts[2], ctx));
    const auto kv = detail::key_values(parts, 3, ctx);
    if (kind == "cap") {
      detail::reject_unknown(kv, {"colat", "pole"}, ctx);
      std::optional<Vector> pole;
      if (kv.count("pole")) pole = detail::to_vector(text::parse_real_list(kv.at("pole"), ctx));
      if (pole && pole->size() != d + 1) throw DimensionMismatch(ctx + ": pole needs " + std::to_string(d + 1) + " coordinates");
      return spherical_cap_target(d, text::parse_real(detail::required(kv, "colat", ctx), ctx), pole);
    }
    detail::reject_unknown(kv, {"kappa", "mu"}, ctx);
    std::optional<Vector> mu;
    if (kv.count("mu")) mu = detail::to_vector(text::parse_real_list(kv.at("mu"), ctx));
    if (mu && mu->size() != d + 1) throw DimensionMismatch(ctx + ": mu needs " + std::to_string(d + 1) + " coordinates");
    Target t = von_mises_fisher_target(d, text::parse_real(detail::required(kv, "kappa", ctx), ctx), mu);
    if (mu) t.spec = spec;
    return t;
  }
  if (kind == "convex-uniform") {
    if (parts.size() < 4) throw InvalidArgument(ctx + ": expected convex-uniform:ball|box:<d>:...");
    const int d = static_cast<int>(text::parse_int(parts[2], ctx));
    const auto kv = detail::key_values(parts, 3, ctx);
    if (parts[1] == "ball") {
      detail::reject_unknown(kv, {"r"}, ctx);
      return ball_uniform_target(d, text::parse_real(detail::required(kv, "r", ctx), ctx));
    }
    if (parts[1] == "box") {
      detail::reject_unknown(kv, {"e"}, ctx);
      const auto e = text::parse_real_list(detail::required(kv, "e", ctx), ctx);
      if (static_cast<int>(e.size()) != d) throw DimensionMismatch(ctx + ": box needs " + std::to_string(d) + " extents");
      return box_uniform_target(detail::to_vector(e));
    }
    throw InvalidArgument(ctx + ": convex body must be ball or box");
  }
  if (kind == "ball-gauss") {
    if (parts.size() < 3) throw InvalidArgument(ctx + ": expected ball-gauss:<d>:sigma=<s>:r=<R>");
    const int d = static_cast<int>(text::parse_int(parts[1], ctx));
    const auto kv = detail::key_values(parts, 2, ctx);
    detail::reject_unknown(kv, {"sigma", "r"}, ctx);
    return ball_gauss_target(d, text::parse_real(detail::required(kv, "sigma", ctx), ctx),
                             text::parse_real(detail::required(kv, "r", ctx), ctx));
  }
  throw InvalidArgument("unrecognized " + ctx +
                        " (known kinds: uniform, cap, vmf, convex-uniform, ball-gauss, intervals)");
}

}  // namespace geoslice
