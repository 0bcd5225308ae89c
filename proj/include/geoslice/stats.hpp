#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "geoslice/errors.hpp"
#include "geoslice/manifold.hpp"
#include "geoslice/parallel.hpp"
#include "geoslice/random.hpp"

namespace geoslice {

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson goodness of fit of `counts` against cell probabilities `probs`.
/// Cells with zero probability must have zero counts, otherwise p = 0.
inline ChiSquareResult chi_square_test(const std::vector<std::int64_t>& counts, const std::vector<double>& probs) {
  if (counts.size() != probs.size() || counts.empty()) throw InvalidArgument("chi_square_test: size mismatch");
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
  if (!(n > 0.0)) throw InsufficientData("chi_square_test: no observations");
  ChiSquareResult r;
  int cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = n * probs[i];
    if (expected <= 0.0) {
      if (counts[i] > 0) return {INFINITY, 0, 0.0};
      continue;
    }
    const double diff = static_cast<double>(counts[i]) - expected;
    r.statistic += diff * diff / expected;
    ++cells;
  }
  r.dof = cells - 1;
  r.p_value = r.dof > 0 ? boost::math::gamma_q(r.dof / 2.0, r.statistic / 2.0) : 1.0;
  return r;
}

struct TwoSampleResult {
  double statistic = 0.0;
  /// Tail probability from a gamma fit to the permutation distribution;
  /// resolves p-values far below 1/(permutations + 1).
  double p_value = 1.0;
  /// Plain permutation rank p-value.
  double p_rank = 1.0;
  int permutations = 0;
  double null_mean = 0.0;
  double null_sd = 0.0;
};

struct EnergyTestOptions {
  int permutations = 500;
  int projections = 8;
  std::uint64_t seed = 0x3e7;
  unsigned threads = 1;
};

namespace detail {

// Mean |u_1| for u uniform on the unit sphere of R^n.
inline double mean_abs_coordinate(int n) {
  return std::exp(std::lgamma(n / 2.0) - std::lgamma((n + 1) / 2.0)) / std::sqrt(std::numbers::pi);
}

// 1-D energy V-statistic 2 E|X-Y| - E|X-X'| - E|Y-Y'| from values in sorted
// order with their group labels (true = first sample).
inline double energy_1d_sorted(const std::vector<double>& z, const std::vector<std::uint32_t>& order,
                               const std::vector<char>& label, double total_pairs_sum, double na, double nb) {
  double sa = 0.0;
  double sb = 0.0;
  double ca = 0.0;
  double cb = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double v = z[k];
    if (label[order[k]]) {
      sa += v * (2.0 * ca - (na - 1.0));
      ca += 1.0;
    } else {
      sb += v * (2.0 * cb - (nb - 1.0));
      cb += 1.0;
    }
  }
  const double cross = total_pairs_sum - sa - sb;
  return 2.0 * cross / (na * nb) - 2.0 * sa / (na * na) - 2.0 * sb / (nb * nb);
}

}  // namespace detail

/// Two-sample energy test on embedded coordinates. The multivariate energy
/// distance is averaged over random 1-D projections (each projection costs
/// O(N) per permutation after one sort), and calibrated by label permutations.
inline TwoSampleResult energy_test(const std::vector<Vector>& a, const std::vector<Vector>& b,
                                   const EnergyTestOptions& opts = {}) {
  if (a.size() < 2 || b.size() < 2) throw InsufficientData("energy_test: each sample needs at least 2 points");
  const int dim = static_cast<int>(a.front().size());
  for (const auto* sample : {&a, &b})
    for (const auto& v : *sample)
      if (v.size() != dim) throw DimensionMismatch("energy_test: points of different dimension");
  const std::size_t n = a.size() + b.size();
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double scale = 1.0 / (opts.projections * detail::mean_abs_coordinate(dim));

  Rng dir_rng(derive_seed(opts.seed, 0xD1));
  std::vector<std::vector<double>> sorted_values(opts.projections);
  std::vector<std::vector<std::uint32_t>> orders(opts.projections);
  std::vector<double> totals(opts.projections);
  for (int k = 0; k < opts.projections; ++k) {
    const Vector u = detail::random_direction(dim, dir_rng, nullptr);
    std::vector<double> z(n);
    for (std::size_t i = 0; i < a.size(); ++i) z[i] = a[i].dot(u);
    for (std::size_t i = 0; i < b.size(); ++i) z[a.size() + i] = b[i].dot(u);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t x, std::uint32_t y) { return z[x] < z[y]; });
    std::vector<double> zs(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      zs[i] = z[order[i]];
      total += zs[i] * (2.0 * static_cast<double>(i) - (static_cast<double>(n) - 1.0));
    }
    sorted_values[k] = std::move(zs);
    orders[k] = std::move(order);
    totals[k] = total;
  }

  auto statistic = [&](const std::vector<char>& label) {
    double s = 0.0;
    for (int k = 0; k < opts.projections; ++k) {
      s += detail::energy_1d_sorted(sorted_values[k], orders[k], label, totals[k], na, nb);
    }
    return s * scale;
  };

  std::vector<char> observed(n, 0);
  std::fill(observed.begin(), observed.begin() + static_cast<std::ptrdiff_t>(a.size()), 1);
  TwoSampleResult r;
  r.statistic = statistic(observed);
  r.permutations = opts.permutations;
  std::vector<double> null(static_cast<std::size_t>(opts.permutations));
  parallel_for(null.size(), opts.threads, [&](std::size_t p) {
    Rng rng = stream_rng(derive_seed(opts.seed, 0xBE), p);
    std::vector<char> label = observed;
    std::shuffle(label.begin(), label.end(), rng.engine());
    null[p] = statistic(label);
  });
  const double mean = std::accumulate(null.begin(), null.end(), 0.0) / null.size();
  double var = 0.0;
  for (double v : null) var += (v - mean) * (v - mean);
  var /= std::max<std::size_t>(1, null.size() - 1);
  r.null_mean = mean;
  r.null_sd = std::sqrt(var);
  const auto exceed = std::count_if(null.begin(), null.end(), [&](double v) { return v >= r.statistic; });
  r.p_rank = (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(null.size()));
  double m3 = 0.0;
  for (double v : null) m3 += (v - mean) * (v - mean) * (v - mean);
  m3 /= static_cast<double>(null.size());
  const double skew = var > 0.0 ? m3 / std::pow(var, 1.5) : 0.0;
  if (var > 0.0 && skew > 0.05) {
    // Pearson type III: a shifted gamma matching mean, variance and skewness.
    // The two-moment gamma fit understates the right tail of this null.
    const double shape = 4.0 / (skew * skew);
    const double theta = r.null_sd * skew / 2.0;
    const double origin = mean - shape * theta;
    r.p_value = boost::math::gamma_q(shape, std::max(0.0, r.statistic - origin) / theta);
  } else if (mean > 0.0 && var > 0.0) {
    const double shape = mean * mean / var;
    const double theta = var / mean;
    r.p_value = boost::math::gamma_q(shape, std::max(0.0, r.statistic) / theta);
  } else {
    r.p_value = r.p_rank;
  }
  return r;
}

inline std::vector<Vector> coordinates(const std::vector<Point>& points) {
  std::vector<Vector> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.coords);
  return out;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_and_se(const std::vector<double>& xs) {
  if (xs.size() < 2) throw InsufficientData("mean_and_se: need at least 2 values");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / (n - 1.0) / n)};
}

}  // namespace geoslice
