#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "geoslice/errors.hpp"
#include "geoslice/random.hpp"

namespace geoslice {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Step-out cap m. An empty optional means m = inf.
using StepCap = std::optional<std::int64_t>;

inline std::string cap_text(const StepCap& m) { return m ? std::to_string(*m) : std::string("inf"); }

struct StepOutParams {
  double w = 1.0;
  StepCap m = 1;
  /// Only consulted for m = inf.
  std::int64_t max_expansions = 1'000'000;

  void validate() const {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("step-out width w must be positive and finite");
    if (m && *m < 1) throw InvalidArgument("step-out cap m must be >= 1 or inf");
    if (max_expansions < 1) throw InvalidArgument("max_expansions must be >= 1");
  }
};

/// Output of stepping-out. For the kernel the current point sits at 0, so
/// lo < 0 < hi.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t expansions_left = 0;
  std::int64_t expansions_right = 0;

  double width() const { return hi - lo; }
};

/// Finite union of disjoint open intervals on the real line, kept sorted.
class IntervalUnion {
 public:
  IntervalUnion() = default;

  /// Endpoints as (a1, b1, a2, b2, ...); overlapping pieces are merged.
  static IntervalUnion from_endpoints(const std::vector<double>& ends) {
    if (ends.size() % 2 != 0 || ends.empty()) throw InvalidArgument("interval union needs an even, nonzero number of endpoints");
    std::vector<std::pair<double, double>> pieces;
    for (std::size_t i = 0; i < ends.size(); i += 2) {
      if (!(ends[i] < ends[i + 1])) throw InvalidArgument("interval union: each piece needs a < b");
      pieces.emplace_back(ends[i], ends[i + 1]);
    }
    return IntervalUnion(std::move(pieces));
  }

  explicit IntervalUnion(std::vector<std::pair<double, double>> pieces) {
    std::sort(pieces.begin(), pieces.end());
    for (const auto& p : pieces) {
      if (!pieces_.empty() && p.first < pieces_.back().second) {
        pieces_.back().second = std::max(pieces_.back().second, p.second);
      } else {
        pieces_.push_back(p);
      }
    }
  }

  const std::vector<std::pair<double, double>>& pieces() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }

  bool contains(double x) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                               [](double v, const std::pair<double, double>& p) { return v < p.first; });
    if (it == pieces_.begin()) return false;
    --it;
    return x > it->first && x < it->second;
  }

  double measure() const {
    double total = 0.0;
    for (const auto& [a, b] : pieces_) total += b - a;
    return total;
  }

  double inf() const { return pieces_.front().first; }
  double sup() const { return pieces_.back().second; }
  double diameter() const { return empty() ? 0.0 : sup() - inf(); }

  /// Lebesgue measure of the union intersected with (a, b).
  double measure_within(double a, double b) const {
    double total = 0.0;
    for (const auto& [lo, hi] : pieces_) total += std::max(0.0, std::min(hi, b) - std::max(lo, a));
    return total;
  }

  /// sup of the union intersected with [theta, limit); nullopt when empty.
  std::optional<double> sup_within(double theta, double limit) const {
    std::optional<double> best;
    for (const auto& [lo, hi] : pieces_) {
      if (hi <= theta || lo >= limit) continue;
      best = std::min(hi, limit);
    }
    return best;
  }

  IntervalUnion shifted(double by) const {
    auto p = pieces_;
    for (auto& [a, b] : p) {
      a += by;
      b += by;
    }
    return IntervalUnion(std::move(p));
  }

  /// Image under the reflection s -> alpha - s.
  IntervalUnion reflected(double alpha) const {
    std::vector<std::pair<double, double>> p;
    for (const auto& [a, b] : pieces_) p.emplace_back(alpha - b, alpha - a);
    return IntervalUnion(std::move(p));
  }

  std::string text() const {
    std::ostringstream out;
    out.precision(10);
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      if (i) out << " u ";
      out << '(' << pieces_[i].first << ", " << pieces_[i].second << ')';
    }
    return out.str();
  }

 private:
  std::vector<std::pair<double, double>> pieces_;
};

/// Stepping-out around the point 0. `in_set(theta)` reports membership of the
/// geodesic superlevel set and must hold at 0. Draw order: offset, then J.
template <class Oracle>
Interval stepping_out(Oracle&& in_set, const StepOutParams& params, Rng& rng) {
  params.validate();
  const double w = params.w;
  double offset = 0.0;
  do {
    offset = w * rng.uniform_open();
  } while (!(offset > 0.0 && offset < w));

  auto left = [&](std::int64_t i) { return -offset - static_cast<double>(i - 1) * w; };
  auto right = [&](std::int64_t i) { return -offset + static_cast<double>(i) * w; };

  std::int64_t tau = 1;
  std::int64_t big_t = 1;
  if (params.m) {
    const std::int64_t m = *params.m;
    const std::int64_t j = m == 1 ? 1 : rng.uniform_int(1, m);
    while (tau < j && in_set(left(tau))) ++tau;
    while (big_t < m + 1 - j && in_set(right(big_t))) ++big_t;
  } else {
    while (in_set(left(tau))) {
      if (tau > params.max_expansions) {
        throw ExpansionCapExceeded("stepping-out with m = inf passed " + std::to_string(params.max_expansions) +
                                   " left expansions; the geodesic level set looks unbounded (lambda = inf needs finite m)");
      }
      ++tau;
    }
    while (in_set(right(big_t))) {
      if (big_t > params.max_expansions) {
        throw ExpansionCapExceeded("stepping-out with m = inf passed " + std::to_string(params.max_expansions) +
                                   " right expansions; the geodesic level set looks unbounded (lambda = inf needs finite m)");
      }
      ++big_t;
    }
  }
  return {left(tau), right(big_t), tau - 1, big_t - 1};
}

/// Stepping-out started from an arbitrary theta: same law as running it on the
/// shifted set and translating back.
template <class Oracle>
Interval stepping_out_at(double theta, Oracle&& in_set, const StepOutParams& params, Rng& rng) {
  Interval iv = stepping_out([&](double s) { return in_set(theta + s); }, params, rng);
  iv.lo += theta;
  iv.hi += theta;
  return iv;
}

/// 1 - (b - theta)/(m w) [m finite] - delta/w [m >= 2]: lower bound on the
/// probability that stepping-out from theta covers S on [theta, b).
inline double covering_bound(double b, double theta, double delta, const StepCap& m, double w) {
  if (!(b > theta)) throw InvalidArgument("covering_bound: need b > theta");
  if (!(delta >= 0.0)) throw InvalidArgument("covering_bound: delta must be >= 0");
  if (!(w > 0.0)) throw InvalidArgument("covering_bound: w must be positive");
  const bool finite = m.has_value();
  const bool multi = !finite || *m >= 2;
  const double reach = finite ? (b - theta) / static_cast<double>(*m) : 0.0;
  const double slack = w - (multi ? delta : 0.0);
  if (!(reach < slack)) {
    std::ostringstream msg;
    msg << "covering bound needs (b - theta)/m < w - delta; got " << reach << " >= " << slack << " (m = " << cap_text(m)
        << ", w = " << w << ")";
    throw BoundInapplicable(msg.str());
  }
  return 1.0 - reach / w - (multi ? delta / w : 0.0);
}

struct CoverageEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t n = 0;
};

/// Monte-Carlo frequency of stepping-out from theta covering S on [theta, limit).
inline CoverageEstimate estimate_covering_probability(const IntervalUnion& set, double theta, double limit,
                                                      const StepOutParams& params, std::int64_t n, Rng& rng) {
  if (!set.contains(theta)) throw InvalidArgument("estimate_covering_probability: theta must lie in S");
  if (n < 1) throw InvalidArgument("estimate_covering_probability: n must be >= 1");
  const auto b = set.sup_within(theta, limit);
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const Interval iv = stepping_out_at(theta, [&](double s) { return set.contains(s); }, params, rng);
    if (iv.hi >= *b) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n)), n};
}

inline void check_interval(double lo, double hi, const char* what) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InvalidArgument(std::string(what) + ": degenerate interval");
  }
}

/// (2 pi / (hi - lo)) theta mod 2 pi, in [0, 2 pi).
inline double wrap_angle(double theta, double lo, double hi) {
  check_interval(lo, hi, "wrap_angle");
  double a = std::fmod(kTwoPi * theta / (hi - lo), kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

/// The unique theta in [lo, hi) with wrap_angle(theta, lo, hi) = alpha.
inline double unwrap_angle(double alpha, double lo, double hi) {
  check_interval(lo, hi, "unwrap_angle");
  const double width = hi - lo;
  const double base = alpha * width / kTwoPi;
  double theta = base + std::ceil((lo - base) / width) * width;
  if (theta >= hi) theta -= width;
  if (theta < lo) theta += width;
  return theta;
}

struct ShrinkOptions {
  std::int64_t max_iters = 100'000;
  /// Mutation switch for tests: accept the first proposal inside the interval
  /// without consulting the level oracle. Breaks invariance on purpose.
  bool skip_level_check = false;
};

struct ShrinkResult {
  double theta = 0.0;
  std::int64_t iterations = 0;
};

namespace detail {

// Uniform draw on the arc I(a, b) (full circle when a == b), endpoints excluded.
inline double draw_on_arc(double a, double b, Rng& rng) {
  const double length = a < b ? b - a : (a > b ? b + kTwoPi - a : kTwoPi);
  for (;;) {
    double x = a + length * rng.uniform_open();
    if (x >= kTwoPi) x -= kTwoPi;
    if (x >= 0.0 && x < kTwoPi && x != a && x != b) return x;
  }
}

// Membership of phi in the half-open arc I(a, b).
inline bool in_arc(double phi, double a, double b) {
  if (a < b) return phi >= a && phi < b;
  if (a > b) return phi < b || phi >= a;
  return true;
}

}  // namespace detail

/// Reeled shrinkage on (lo, hi) wrapped onto the circle, shrinking toward the
/// current point 0. Returns an accepted theta in (lo, hi) with in_set(theta).
template <class Oracle>
ShrinkResult reeled_shrinkage(Oracle&& in_set, double lo, double hi, Rng& rng, const ShrinkOptions& opts = {}) {
  check_interval(lo, hi, "reeled_shrinkage");
  if (!(lo < 0.0 && 0.0 < hi)) throw InvalidArgument("reeled_shrinkage: the current point 0 must lie in (lo, hi)");
  const double target = wrap_angle(0.0, lo, hi);
  double alpha = detail::draw_on_arc(0.0, 0.0, rng);
  double amin = alpha;
  double amax = alpha;
  for (std::int64_t k = 1; k <= opts.max_iters; ++k) {
    const double theta = unwrap_angle(alpha, lo, hi);
    if (theta > lo && theta < hi && (opts.skip_level_check || in_set(theta))) return {theta, k};
    if (detail::in_arc(target, alpha, amax)) {
      amin = alpha;
    } else {
      amax = alpha;
    }
    alpha = detail::draw_on_arc(amin, amax, rng);
  }
  std::ostringstream msg;
  msg << "reeled shrinkage exceeded " << opts.max_iters << " iterations on (" << lo << ", " << hi
      << "); the level set has negligible measure along this geodesic";
  throw ShrinkCapExceeded(msg.str());
}

/// A_mass / min(width, diam_S): lower bound on the shrinkage kernel's mass of A.
inline double shrinkage_mass_bound(double a_mass, double width, double diam_s) {
  if (a_mass < 0.0 || !(width > 0.0) || !(diam_s > 0.0)) {
    throw InvalidArgument("shrinkage_mass_bound: need A_mass >= 0 and positive width, diam_S");
  }
  return a_mass / std::min(width, diam_s);
}

}  // namespace geoslice
