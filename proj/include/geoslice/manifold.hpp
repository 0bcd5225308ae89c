#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geoslice/errors.hpp"
#include "geoslice/random.hpp"
#include "geoslice/text.hpp"

namespace geoslice {

using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A manifold element in embedded coordinates: R^{d+1} for S^d, R^d for
/// Euclidean space and the flat torus (torus coordinates live in [0, period)).
struct Point {
  Vector coords;
};

/// Unit direction `dir` in the tangent space at `base`.
struct TangentVector {
  Point base;
  Vector dir;
};

struct ManifoldInfo {
  int dim = 0;
  double diameter = kInf;
  /// zeta with (d - 1) * zeta <= min Ric.
  double ricci_lower = 0.0;
  double injectivity_radius = kInf;
  /// Volume of the unit sphere S^{d-1} of a tangent space.
  double omega_dm1 = 0.0;
  double total_measure = kInf;
};

struct CutTime {
  double value = kInf;
  /// True when `value` is only a lower bound on the directional cut time.
  bool lower_bound = false;
};

/// Volume of the Euclidean unit sphere S^k in R^{k+1}.
inline double unit_sphere_volume(int k) {
  const double n = k + 1.0;
  return 2.0 * std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0);
}

/// Volume of the Euclidean unit ball in R^d.
inline double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

/// Plug-in interface for state spaces. Built-ins are Euclidean space, the round
/// sphere and the flat torus; other geometries implement the same surface and
/// supply their own curvature and diameter metadata.
class Manifold {
 public:
  virtual ~Manifold() = default;

  virtual std::string spec() const = 0;
  virtual ManifoldInfo info() const = 0;
  /// Length of the coordinate vector of a Point.
  virtual int ambient_dim() const = 0;

  virtual Point exp_map(const Point& x, const TangentVector& v, double theta) const = 0;
  virtual TangentVector sample_unit_tangent(const Point& x, Rng& rng) const = 0;
  virtual double distance(const Point& x, const Point& y) const = 0;
  virtual CutTime cut_time(const Point& x, const TangentVector& v) const = 0;

  /// Validates coordinates and restores the on-manifold invariants.
  virtual Point make_point(Vector coords) const = 0;
  /// Draws from the normalized Riemannian measure; only for finite total measure.
  virtual Point sample_uniform(Rng& rng) const = 0;

  int dim() const { return info().dim; }

 protected:
  void check_dims(const Point& x, const char* what) const {
    if (x.coords.size() != ambient_dim()) {
      std::ostringstream msg;
      msg << what << ": point has " << x.coords.size() << " coordinates, " << spec() << " expects "
          << ambient_dim();
      throw DimensionMismatch(msg.str());
    }
  }
  void check_dims(const Point& x, const TangentVector& v, const char* what) const {
    check_dims(x, what);
    if (v.dir.size() != ambient_dim() || v.base.coords.size() != ambient_dim()) {
      std::ostringstream msg;
      msg << what << ": tangent vector has " << v.dir.size() << " coordinates, " << spec()
          << " expects " << ambient_dim();
      throw DimensionMismatch(msg.str());
    }
  }

  static Vector gaussian(int n, Rng& rng) {
    Vector g(n);
    for (int i = 0; i < n; ++i) g[i] = rng.normal();
    return g;
  }
};

namespace detail {

// Normalized standard Gaussian in R^n, optionally projected orthogonally to `normal`.
inline Vector random_direction(int n, Rng& rng, const Vector* normal) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    Vector g(n);
    for (int i = 0; i < n; ++i) g[i] = rng.normal();
    if (normal) g -= g.dot(*normal) * (*normal);
    const double norm = g.norm();
    if (norm > 1e-300 && std::isfinite(norm)) return g / norm;
  }
  throw RngFailure("sample_unit_tangent: 64 consecutive degenerate Gaussian draws; the random source is broken");
}

}  // namespace detail

class Euclidean final : public Manifold {
 public:
  explicit Euclidean(int d) : d_(d) {
    if (d < 1) throw InvalidArgument("euclidean: dimension must be >= 1");
  }

  std::string spec() const override { return "euclidean:" + std::to_string(d_); }
  int ambient_dim() const override { return d_; }

  ManifoldInfo info() const override {
    return {d_, kInf, 0.0, kInf, unit_sphere_volume(d_ - 1), kInf};
  }

  Point exp_map(const Point& x, const TangentVector& v, double theta) const override {
    check_dims(x, v, "exp_map");
    if (theta == 0.0) return x;
    return {x.coords + theta * v.dir};
  }

  TangentVector sample_unit_tangent(const Point& x, Rng& rng) const override {
    check_dims(x, "sample_unit_tangent");
    return {x, detail::random_direction(d_, rng, nullptr)};
  }

  double distance(const Point& x, const Point& y) const override {
    check_dims(x, "distance");
    check_dims(y, "distance");
    return (x.coords - y.coords).norm();
  }

  CutTime cut_time(const Point& x, const TangentVector& v) const override {
    check_dims(x, v, "cut_time");
    return {kInf, false};
  }

  Point make_point(Vector coords) const override {
    Point p{std::move(coords)};
    check_dims(p, "make_point");
    return p;
  }

  Point sample_uniform(Rng&) const override {
    throw Unsupported("euclidean space has infinite measure; no uniform distribution");
  }

 private:
  int d_;
};

/// Unit sphere S^d embedded in R^{d+1}.
class Sphere final : public Manifold {
 public:
  explicit Sphere(int d) : d_(d) {
    if (d < 1) throw InvalidArgument("sphere: dimension must be >= 1");
  }

  std::string spec() const override { return "sphere:" + std::to_string(d_); }
  int ambient_dim() const override { return d_ + 1; }

  ManifoldInfo info() const override {
    const double zeta = d_ >= 2 ? 1.0 : 0.0;
    return {d_, std::numbers::pi, zeta, std::numbers::pi, unit_sphere_volume(d_ - 1),
            unit_sphere_volume(d_)};
  }

  /// Great circle cos(theta) x + sin(theta) v, renormalized.
  Point exp_map(const Point& x, const TangentVector& v, double theta) const override {
    check_dims(x, v, "exp_map");
    if (theta == 0.0) return x;
    Vector y = std::cos(theta) * x.coords + std::sin(theta) * v.dir;
    y /= y.norm();
    return {std::move(y)};
  }

  TangentVector sample_unit_tangent(const Point& x, Rng& rng) const override {
    check_dims(x, "sample_unit_tangent");
    return {x, detail::random_direction(d_ + 1, rng, &x.coords)};
  }

  double distance(const Point& x, const Point& y) const override {
    check_dims(x, "distance");
    check_dims(y, "distance");
    // Stable for both nearby and nearly antipodal points.
    return 2.0 * std::atan2((x.coords - y.coords).norm(), (x.coords + y.coords).norm());
  }

  CutTime cut_time(const Point& x, const TangentVector& v) const override {
    check_dims(x, v, "cut_time");
    return {std::numbers::pi, false};
  }

  Point make_point(Vector coords) const override {
    Point p{std::move(coords)};
    check_dims(p, "make_point");
    const double norm = p.coords.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw InvalidArgument("sphere point must be nonzero");
    if (std::abs(norm - 1.0) > 1e-12) p.coords /= norm;
    return p;
  }

  Point sample_uniform(Rng& rng) const override {
    return {detail::random_direction(d_ + 1, rng, nullptr)};
  }

 private:
  int d_;
};

/// Flat torus R^d / (period Z)^d with coordinates in [0, period).
class Torus final : public Manifold {
 public:
  Torus(int d, double period) : d_(d), period_(period) {
    if (d < 1) throw InvalidArgument("torus: dimension must be >= 1");
    if (!(period > 0.0) || !std::isfinite(period)) throw InvalidArgument("torus: period must be positive");
  }

  std::string spec() const override { return "torus:" + std::to_string(d_) + ":" + text::exact(period_); }
  int ambient_dim() const override { return d_; }
  double period() const { return period_; }

  ManifoldInfo info() const override {
    return {d_, 0.5 * period_ * std::sqrt(static_cast<double>(d_)), 0.0, 0.5 * period_,
            unit_sphere_volume(d_ - 1), std::pow(period_, d_)};
  }

  Point exp_map(const Point& x, const TangentVector& v, double theta) const override {
    check_dims(x, v, "exp_map");
    if (theta == 0.0) return x;
    Vector y = x.coords + theta * v.dir;
    for (int i = 0; i < d_; ++i) y[i] = wrap(y[i]);
    return {std::move(y)};
  }

  TangentVector sample_unit_tangent(const Point& x, Rng& rng) const override {
    check_dims(x, "sample_unit_tangent");
    return {x, detail::random_direction(d_, rng, nullptr)};
  }

  double distance(const Point& x, const Point& y) const override {
    check_dims(x, "distance");
    check_dims(y, "distance");
    double sum = 0.0;
    for (int i = 0; i < d_; ++i) {
      const double delta = std::abs(wrap(x.coords[i] - y.coords[i]));
      const double shortest = std::min(delta, period_ - delta);
      sum += shortest * shortest;
    }
    return std::sqrt(sum);
  }

  /// Exact (period / 2) along a coordinate axis; otherwise the injectivity
  /// radius, flagged as a lower bound.
  CutTime cut_time(const Point& x, const TangentVector& v) const override {
    check_dims(x, v, "cut_time");
    int nonzero = 0;
    for (int i = 0; i < d_; ++i)
      if (std::abs(v.dir[i]) > 1e-12) ++nonzero;
    return {0.5 * period_, nonzero != 1};
  }

  Point make_point(Vector coords) const override {
    Point p{std::move(coords)};
    check_dims(p, "make_point");
    for (int i = 0; i < d_; ++i) p.coords[i] = wrap(p.coords[i]);
    return p;
  }

  Point sample_uniform(Rng& rng) const override {
    Vector c(d_);
    for (int i = 0; i < d_; ++i) c[i] = period_ * rng.uniform();
    return {std::move(c)};
  }

  double wrap(double c) const {
    double r = std::fmod(c, period_);
    if (r < 0.0) r += period_;
    if (r >= period_) r = 0.0;
    return r;
  }

 private:
  int d_;
  double period_;
};


/// Parses "euclidean:<d>", "sphere:<d>" or "torus:<d>:<period>".
inline std::shared_ptr<const Manifold> parse_manifold(const std::string& spec) {
  const auto parts = text::split(spec, ':');
  const std::string ctx = "manifold spec '" + spec + "'";
  if (parts.size() == 2 && parts[0] == "euclidean")
    return std::make_shared<Euclidean>(static_cast<int>(text::parse_int(parts[1], ctx)));
  if (parts.size() == 2 && parts[0] == "sphere")
    return std::make_shared<Sphere>(static_cast<int>(text::parse_int(parts[1], ctx)));
  if (parts.size() == 3 && parts[0] == "torus")
    return std::make_shared<Torus>(static_cast<int>(text::parse_int(parts[1], ctx)), text::parse_real(parts[2], ctx));
  throw InvalidArgument("unrecognized " + ctx + " (expected euclidean:<d>, sphere:<d> or torus:<d>:<period>)");
}

}  // namespace geoslice
