#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "geoslice/errors.hpp"
#include "geoslice/manifold.hpp"
#include "geoslice/random.hpp"
#include "geoslice/target.hpp"

namespace geoslice {

/// Partition of (a region of) the state space with the target's exact mass
/// per cell. Points outside every positive-mass cell locate to -1.
struct Binning {
  std::string scheme;
  std::vector<double> masses;
  std::function<int(const Point&)> locate;

  int bin_count() const { return static_cast<int>(masses.size()); }
};

namespace detail {

inline int clamp_index(double u, int n) {
  if (!(u >= 0.0) || !(u < 1.0)) return -1;
  return std::min(n - 1, static_cast<int>(u * n));
}

// Area of {x^2 + y^2 < r^2} within [x0, x1] x [y0, y1].
inline double disk_cell_area(double r, double x0, double x1, double y0, double y1) {
  const double a = std::max(x0, -r);
  const double b = std::min(x1, r);
  if (!(a < b)) return 0.0;
  auto chord = [&](double x) {
    const double s = std::sqrt(std::max(0.0, r * r - x * x));
    return std::max(0.0, std::min(y1, s) - std::max(y0, -s));
  };
  std::vector<double> cuts = {a, b};
  for (double y : {y0, y1}) {
    if (std::abs(y) < r) {
      const double x = std::sqrt(r * r - y * y);
      for (double c : {-x, x})
        if (c > a && c < b) cuts.push_back(c);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  boost::math::quadrature::tanh_sinh<double> integrator;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] <= 0.0) continue;
    total += integrator.integrate(chord, cuts[i], cuts[i + 1]);
  }
  return total;
}

// Integral of exp(-(x^2 + y^2) / (2 sigma^2)) over the disk of radius r within the cell.
inline double gauss_disk_cell_mass(double sigma, double r, double x0, double x1, double y0, double y1) {
  const double a = std::max(x0, -r);
  const double b = std::min(x1, r);
  if (!(a < b)) return 0.0;
  const double k = sigma * std::sqrt(2.0);
  auto inner = [&](double x) {
    const double s = std::sqrt(std::max(0.0, r * r - x * x));
    const double lo = std::max(y0, -s);
    const double hi = std::min(y1, s);
    if (!(lo < hi)) return 0.0;
    return std::exp(-x * x / (2.0 * sigma * sigma)) * sigma * std::sqrt(std::numbers::pi / 2.0) *
           (std::erf(hi / k) - std::erf(lo / k));
  };
  std::vector<double> cuts = {a, b};
  for (double y : {y0, y1}) {
    if (std::abs(y) < r) {
      const double x = std::sqrt(r * r - y * y);
      for (double c : {-x, x})
        if (c > a && c < b) cuts.push_back(c);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  boost::math::quadrature::tanh_sinh<double> integrator;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] <= 0.0) continue;
    total += integrator.integrate(inner, cuts[i], cuts[i + 1]);
  }
  return total;
}

// Box grid with `per_axis` cells per axis over [lo, hi); the mass callback
// receives the cell bounds.
inline Binning box_grid(const Vector& lo, const Vector& hi, int per_axis, std::string scheme,
                        const std::function<double(const Vector&, const Vector&)>& cell_mass, double total_mass,
                        std::function<Vector(const Point&)> coords = {}) {
  const int d = static_cast<int>(lo.size());
  std::int64_t count = 1;
  for (int i = 0; i < d; ++i) count *= per_axis;
  Binning bin;
  bin.scheme = std::move(scheme);
  bin.masses.assign(static_cast<std::size_t>(count), 0.0);
  const Vector step = (hi - lo) / per_axis;
  for (std::int64_t c = 0; c < count; ++c) {
    Vector a(d), b(d);
    std::int64_t rest = c;
    for (int i = 0; i < d; ++i) {
      const int k = static_cast<int>(rest % per_axis);
      rest /= per_axis;
      a[i] = lo[i] + step[i] * k;
      b[i] = k == per_axis - 1 ? hi[i] : lo[i] + step[i] * (k + 1);
    }
    bin.masses[static_cast<std::size_t>(c)] = cell_mass(a, b) / total_mass;
  }
  bin.locate = [lo, hi, per_axis, d, coords](const Point& p) {
    const Vector x = coords ? coords(p) : p.coords;
    std::int64_t index = 0;
    std::int64_t stride = 1;
    for (int i = 0; i < d; ++i) {
      const int k = clamp_index((x[i] - lo[i]) / (hi[i] - lo[i]), per_axis);
      if (k < 0) return -1;
      index += stride * k;
      stride *= per_axis;
    }
    return static_cast<int>(index);
  };
  return bin;
}

inline int grid_per_axis(int d, std::optional<int> override_total) {
  const int total = override_total.value_or(0);
  if (total > 0) return std::max(1, static_cast<int>(std::floor(std::pow(total, 1.0 / d) + 1e-9)));
  int k = 32;
  while (k > 1 && std::pow(static_cast<double>(k), d) > 4096.0) --k;
  return k;
}

inline Vector sphere_axis(const Target& t) {
  if (const auto* c = std::get_if<CapShape>(&t.shape)) return c->axis;
  if (const auto* v = std::get_if<VmfShape>(&t.shape)) return v->axis;
  return default_pole(t.manifold->ambient_dim());
}

}  // namespace detail

/// Default binning for a preset target.
///   S^1: equal-angle bins about the target's symmetry axis (default 64).
///   S^2: 16 equal-height bands x 32 sectors about the axis, covering the cap
///        for cap targets (equal area for uniform targets).
///   Euclidean / torus: uniform box grid over the support's bounding box,
///        32 per axis capped at 4096 cells overall.
inline Binning make_binning(const Target& target, std::optional<int> bins = std::nullopt) {
  const Manifold& m = *target.manifold;
  const std::string ms = m.spec();
  const double pi = std::numbers::pi;

  if (ms == "sphere:1") {
    const int n = bins.value_or(64);
    const Vector axis = detail::sphere_axis(target);
    const Vector perp = (Vector(2) << -axis[1], axis[0]).finished();
    Binning bin;
    bin.scheme = "equal-angle S^1 x" + std::to_string(n);
    bin.masses.resize(n);
    const double width = 2.0 * pi / n;
    for (int i = 0; i < n; ++i) {
      const double a = -pi + width * i;
      const double b = i == n - 1 ? pi : a + width;
      if (std::holds_alternative<UniformShape>(target.shape)) {
        bin.masses[i] = 1.0 / n;
      } else if (const auto* cap = std::get_if<CapShape>(&target.shape)) {
        const double c = cap->colatitude;
        bin.masses[i] = std::max(0.0, std::min(b, c) - std::max(a, -c)) / (2.0 * c);
      } else if (const auto* vmf = std::get_if<VmfShape>(&target.shape)) {
        const double k = vmf->kappa;
        // Scaled by exp(-k) to keep large concentrations finite.
        auto f = [k](double phi) { return std::exp(k * (std::cos(phi) - 1.0)); };
        const double norm = 2.0 * pi * boost::math::cyl_bessel_i(0, k) * std::exp(-k);
        bin.masses[i] = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14) / norm;
      } else {
        throw Unsupported("no analytic binning for '" + target.spec + "'");
      }
    }
    bin.locate = [axis, perp, n, pi](const Point& p) {
      const double phi = std::atan2(p.coords.dot(perp), p.coords.dot(axis));
      double u = (phi + pi) / (2.0 * pi);
      if (u >= 1.0) u = 0.0;  // phi = pi is the same point as -pi
      return detail::clamp_index(u, n);
    };
    return bin;
  }

  if (ms == "sphere:2") {
    constexpr int kBands = 16;
    constexpr int kSectors = 32;
    const Vector axis = detail::sphere_axis(target);
    double z_floor = -1.0;
    std::function<double(double, double)> band_mass;
    if (std::holds_alternative<UniformShape>(target.shape)) {
      band_mass = [](double lo, double hi) { return (hi - lo) / 2.0; };
    } else if (const auto* cap = std::get_if<CapShape>(&target.shape)) {
      z_floor = std::cos(cap->colatitude);
      const double zc = z_floor;
      band_mass = [zc](double lo, double hi) { return (hi - lo) / (1.0 - zc); };
    } else if (const auto* vmf = std::get_if<VmfShape>(&target.shape)) {
      const double k = vmf->kappa;
      // (e^{k hi} - e^{k lo}) / (e^k - e^{-k}), written to stay finite for large k.
      band_mass = [k](double lo, double hi) {
        return (std::exp(k * (hi - 1.0)) - std::exp(k * (lo - 1.0))) / (1.0 - std::exp(-2.0 * k));
      };
    } else {
      throw Unsupported("no analytic binning for '" + target.spec + "'");
    }
    Binning bin;
    bin.scheme = "latitude bands 16 x sectors 32 on S^2";
    bin.masses.resize(kBands * kSectors);
    const double dz = (1.0 - z_floor) / kBands;
    for (int b = 0; b < kBands; ++b) {
      const double lo = z_floor + dz * b;
      const double hi = b == kBands - 1 ? 1.0 : lo + dz;
      const double mass = band_mass(lo, hi) / kSectors;
      for (int s = 0; s < kSectors; ++s) bin.masses[b * kSectors + s] = mass;
    }
    bin.locate = [axis, z_floor, dz, pi](const Point& p) {
      const Vector local = detail::to_pole_frame(p.coords, axis);
      const double z = local[2];
      if (!(z > z_floor)) return -1;
      const int band = std::min(kBands - 1, static_cast<int>((z - z_floor) / dz));
      const double lon = std::atan2(local[1], local[0]) + pi;
      const int sector = std::min(kSectors - 1, std::max(0, static_cast<int>(lon / (2.0 * pi) * kSectors)));
      return band * kSectors + sector;
    };
    return bin;
  }

  const int d = m.dim();
  if (ms.rfind("torus:", 0) == 0) {
    if (!std::holds_alternative<UniformShape>(target.shape)) throw Unsupported("no analytic binning for '" + target.spec + "'");
    const double period = static_cast<const Torus&>(m).period();
    const int k = detail::grid_per_axis(d, bins);
    return detail::box_grid(Vector::Zero(d), Vector::Constant(d, period), k, "torus grid",
                            [](const Vector& a, const Vector& b) { return (b - a).prod(); }, std::pow(period, d));
  }

  if (ms.rfind("euclidean:", 0) == 0 && target.envelope) {
    const int k = detail::grid_per_axis(d, bins);
    const Box box = *target.envelope;
    const std::string scheme = "box grid " + std::to_string(k) + "^" + std::to_string(d);
    if (std::holds_alternative<BoxShape>(target.shape)) {
      return detail::box_grid(box.lo, box.hi, k, scheme, [](const Vector& a, const Vector& b) { return (b - a).prod(); },
                              box.volume());
    }
    if (const auto* iv = std::get_if<IntervalsShape>(&target.shape)) {
      const IntervalUnion set = iv->set;
      return detail::box_grid(box.lo, box.hi, k, scheme,
                              [set](const Vector& a, const Vector& b) { return set.measure_within(a[0], b[0]); },
                              set.measure());
    }
    if (const auto* ball = std::get_if<BallShape>(&target.shape)) {
      const double r = ball->radius;
      if (d == 1) {
        return detail::box_grid(box.lo, box.hi, k, scheme,
                                [r](const Vector& a, const Vector& b) { return std::min(b[0], r) - std::max(a[0], -r); },
                                2.0 * r);
      }
      if (d == 2) {
        return detail::box_grid(
            box.lo, box.hi, k, scheme,
            [r](const Vector& a, const Vector& b) { return detail::disk_cell_area(r, a[0], b[0], a[1], b[1]); },
            pi * r * r);
      }
    }
    if (const auto* bg = std::get_if<BallGaussShape>(&target.shape); bg && d == 2) {
      const double s = bg->sigma;
      const double r = bg->radius;
      const double total = 2.0 * pi * s * s * (1.0 - std::exp(-r * r / (2.0 * s * s)));
      return detail::box_grid(
          box.lo, box.hi, k, scheme,
          [s, r](const Vector& a, const Vector& b) { return detail::gauss_disk_cell_mass(s, r, a[0], b[0], a[1], b[1]); },
          total);
    }
  }
  throw Unsupported("no analytic binning for '" + target.spec + "' on " + ms);
}

/// Checks the binning invariant: masses sum to 1.
inline double binning_mass_error(const Binning& bin) {
  return std::abs(std::accumulate(bin.masses.begin(), bin.masses.end(), 0.0) - 1.0);
}

struct TvEstimate {
  double tv = 0.0;
  double se = 0.0;
  /// Expected value of the estimator for exact samples, about
  /// 0.5 sum sqrt(2 p (1 - p) / (pi N)).
  double bias = 0.0;
  std::int64_t n = 0;
  std::int64_t outside = 0;
};

/// Half-L1 distance between empirical cell frequencies and the exact cell
/// masses. Points outside every positive-mass cell count fully toward the
/// distance. The standard error comes from bootstrap resampling.
inline TvEstimate estimate_tv(const std::vector<Point>& points, const Binning& bin, int bootstrap = 200,
                              std::uint64_t seed = 0xB007) {
  if (points.size() < 1000) {
    throw InsufficientData("estimate_tv needs at least 1000 points, got " + std::to_string(points.size()));
  }
  const int nbins = bin.bin_count();
  std::vector<int> index(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    int k = bin.locate(points[i]);
    if (k >= nbins) throw DimensionMismatch("estimate_tv: binning does not match the points");
    if (k >= 0 && !(bin.masses[k] > 0.0)) k = -1;
    index[i] = k;
  }
  const double n = static_cast<double>(points.size());
  auto tv_of = [&](const std::vector<std::int64_t>& counts, std::int64_t outside) {
    double sum = static_cast<double>(outside) / n;
    for (int k = 0; k < nbins; ++k) sum += std::abs(static_cast<double>(counts[k]) / n - bin.masses[k]);
    return 0.5 * sum;
  };
  auto tally = [&](auto&& pick, std::vector<std::int64_t>& counts, std::int64_t& outside) {
    std::fill(counts.begin(), counts.end(), 0);
    outside = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int k = pick(i);
      if (k < 0) {
        ++outside;
      } else {
        ++counts[k];
      }
    }
  };
  std::vector<std::int64_t> counts(nbins);
  std::int64_t outside = 0;
  tally([&](std::size_t i) { return index[i]; }, counts, outside);
  TvEstimate est;
  est.n = static_cast<std::int64_t>(points.size());
  est.outside = outside;
  est.tv = tv_of(counts, outside);
  for (double p : bin.masses) est.bias += 0.5 * std::sqrt(2.0 * p * (1.0 - p) / (std::numbers::pi * n));

  Rng rng(seed);
  std::vector<double> reps(bootstrap);
  std::vector<std::int64_t> bc(nbins);
  for (int b = 0; b < bootstrap; ++b) {
    std::int64_t out = 0;
    tally([&](std::size_t) { return index[static_cast<std::size_t>(rng.uniform_int(0, est.n - 1))]; }, bc, out);
    reps[b] = tv_of(bc, out);
  }
  const double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / bootstrap;
  double var = 0.0;
  for (double r : reps) var += (r - mean) * (r - mean);
  est.se = std::sqrt(var / std::max(1, bootstrap - 1));
  return est;
}

/// Cell counts of points under a binning (cells in order, out-of-range dropped).
inline std::vector<std::int64_t> bin_counts(const std::vector<Point>& points, const Binning& bin) {
  std::vector<std::int64_t> counts(bin.bin_count(), 0);
  for (const auto& p : points) {
    const int k = bin.locate(p);
    if (k >= 0) ++counts[k];
  }
  return counts;
}

}  // namespace geoslice
