#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "geoslice/binning.hpp"
#include "geoslice/bounds.hpp"
#include "geoslice/errors.hpp"
#include "geoslice/kernel.hpp"
#include "geoslice/parallel.hpp"
#include "geoslice/random.hpp"
#include "geoslice/slice1d.hpp"
#include "geoslice/stats.hpp"
#include "geoslice/target.hpp"
#include "geoslice/text.hpp"

namespace geoslice {

struct TvPoint {
  std::int64_t n = 0;
  double tv = 0.0;
  double se = 0.0;
  double bias = 0.0;
  double envelope = 1.0;
  bool pass = false;
};

struct TvCurve {
  std::vector<TvPoint> points;
  BoundsReport bounds;
  std::string binning;
  /// PASS, FAIL, or ADVISORY when the rate is not certified.
  std::string verdict;

  bool pass() const { return verdict == "PASS"; }

  std::string to_csv() const {
    std::ostringstream out;
    out << "n,tv,se,envelope,pass\n";
    for (const auto& p : points) {
      out << p.n << ',' << text::exact(p.tv) << ',' << text::exact(p.se) << ',' << text::exact(p.envelope) << ','
          << (p.pass ? "true" : "false") << '\n';
    }
    return out.str();
  }
};

struct VerifyOptions {
  EpsilonMode epsilon_mode = EpsilonMode::Auto;
  unsigned threads = 1;
  std::optional<int> bins;
  int bootstrap = 200;
};

/// Estimates d_tv(K^n(x0, .), pi) for each n and compares with rho^n, allowing
/// 3 standard errors plus the estimator's bias.
inline TvCurve verify_uniform_ergodicity(const Target& target, const GssConfig& config, const Point& x0,
                                         std::vector<std::int64_t> n_list, std::int64_t replicates,
                                         const VerifyOptions& opts = {}) {
  config.validate();
  if (n_list.empty()) throw InvalidArgument("verify: empty n-list");
  std::sort(n_list.begin(), n_list.end());
  n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
  MonteCarloEpsilonOptions mc;
  mc.seed = derive_seed(config.seed, 0xB0);
  mc.threads = opts.threads;
  TvCurve curve;
  curve.bounds = full_report(target, config.step_out.m, config.step_out.w, opts.epsilon_mode, mc);
  const Binning bin = make_binning(target, opts.bins);
  curve.binning = bin.scheme;
  const auto ensembles = endpoint_checkpoints(x0, n_list, replicates, config, opts.threads);
  bool all = true;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const TvEstimate est = estimate_tv(ensembles[i], bin, opts.bootstrap, derive_seed(config.seed, 0xB00 + i));
    TvPoint p;
    p.n = n_list[i];
    p.tv = est.tv;
    p.se = est.se;
    p.bias = est.bias;
    p.envelope = std::pow(curve.bounds.rho, static_cast<double>(p.n));
    p.pass = est.tv <= p.envelope + 3.0 * est.se + est.bias;
    all = all && p.pass;
    curve.points.push_back(p);
  }
  curve.verdict = !all ? "FAIL" : (curve.bounds.certified ? "PASS" : "ADVISORY");
  return curve;
}

struct InvarianceReport {
  TwoSampleResult test;
  std::int64_t samples = 0;
  bool pass = false;
};

/// One kernel step applied to exact target draws, compared with fresh exact
/// draws by the energy two-sample test.
inline InvarianceReport invariance_test(const Target& target, const GssConfig& config, std::int64_t samples,
                                        unsigned threads = 1, int permutations = 500) {
  config.validate();
  if (!target.has_reference_sampler()) throw Unsupported("invariance test needs an exact sampler for '" + target.spec + "'");
  std::vector<Vector> evolved(static_cast<std::size_t>(samples));
  std::vector<Vector> fresh(static_cast<std::size_t>(samples));
  const std::uint64_t start_seed = derive_seed(config.seed, 0x1A);
  const std::uint64_t fresh_seed = derive_seed(config.seed, 0x1B);
  parallel_for(evolved.size(), threads, [&](std::size_t i) {
    Rng start_rng = stream_rng(start_seed, i);
    const Point x = target.reference_sample(start_rng);
    Rng step_rng = stream_rng(config.seed, i);
    evolved[i] = step(x, config, step_rng).coords;
    Rng fresh_rng = stream_rng(fresh_seed, i);
    fresh[i] = target.reference_sample(fresh_rng).coords;
  });
  EnergyTestOptions eo;
  eo.permutations = permutations;
  eo.seed = derive_seed(config.seed, 0x1C);
  eo.threads = threads;
  InvarianceReport r;
  r.test = energy_test(evolved, fresh, eo);
  r.samples = samples;
  r.pass = r.test.p_value > 0.001;
  return r;
}

/// Exact probability that stepping-out from theta (finite m) covers S on
/// [theta, limit), by enumerating J and a midpoint grid of the offset.
inline double exact_covering_probability(const IntervalUnion& set, double theta, double limit, std::int64_t m, double w,
                                         std::int64_t grid = 100'000) {
  const auto b = set.sup_within(theta, limit);
  if (!b) throw InvalidArgument("exact_covering_probability: S has no points in [theta, limit)");
  std::int64_t covered = 0;
  for (std::int64_t g = 0; g < grid; ++g) {
    const double offset = (static_cast<double>(g) + 0.5) / static_cast<double>(grid) * w;
    for (std::int64_t j = 1; j <= m; ++j) {
      std::int64_t right = 1;
      while (right < m + 1 - j && set.contains(theta - offset + static_cast<double>(right) * w)) ++right;
      if (theta - offset + static_cast<double>(right) * w >= *b) ++covered;
    }
  }
  return static_cast<double>(covered) / static_cast<double>(grid * m);
}

struct LemmaEntry {
  std::string check;
  std::string name;
  std::string config;
  std::string measure;
  double value = 0.0;
  double reference = 0.0;
  double se = 0.0;
  double p_value = -1.0;
  bool pass = false;
  std::uint64_t seed = 0;
};

struct LemmaReport {
  std::vector<LemmaEntry> entries;
  std::uint64_t seed = 0;

  bool all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const LemmaEntry& e) { return e.pass; });
  }

  bool check_pass(const std::string& check) const {
    bool any = false;
    for (const auto& e : entries) {
      if (e.check != check) continue;
      any = true;
      if (!e.pass) return false;
    }
    return any;
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "# lemma suite, seed " << seed << '\n';
    for (const auto& e : entries) {
      out << (e.pass ? "PASS " : "FAIL ") << e.check << ' ' << e.name << " | " << e.config << " | " << e.measure
          << " = " << text::fixed_digits(e.value, 6) << " vs " << text::fixed_digits(e.reference, 6);
      if (e.se > 0.0) out << " (se " << text::fixed_digits(e.se, 3) << ')';
      if (e.p_value >= 0.0) out << " p = " << text::fixed_digits(e.p_value, 4);
      out << " | seed " << e.seed << '\n';
    }
    return out.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["all_pass"] = all_pass();
    for (const auto& e : entries) {
      j["entries"].push_back({{"check", e.check},
                              {"name", e.name},
                              {"config", e.config},
                              {"measure", e.measure},
                              {"value", e.value},
                              {"reference", e.reference},
                              {"se", e.se},
                              {"p_value", e.p_value},
                              {"pass", e.pass},
                              {"seed", e.seed}});
    }
    return j;
  }
};

struct LemmaOptions {
  /// Multiplies every sample size; 1 is the full battery.
  double scale = 1.0;
  int randomized = 5;
  unsigned threads = 1;
};

namespace detail {

// Random union of 2 or 3 open intervals; the first piece contains 0.
inline IntervalUnion random_union(Rng& rng) {
  std::vector<std::pair<double, double>> pieces;
  const double a = -(0.2 + 1.3 * rng.uniform());
  const double b = 0.05 + 0.75 * rng.uniform();
  pieces.emplace_back(a, b);
  double edge = b;
  const int extra = 1 + static_cast<int>(rng.uniform_int(0, 1));
  for (int i = 0; i < extra; ++i) {
    const double gap = 0.05 + 0.45 * rng.uniform();
    const double len = 0.1 + 0.7 * rng.uniform();
    pieces.emplace_back(edge + gap, edge + gap + len);
    edge += gap + len;
  }
  if (rng.uniform() < 0.5) {
    const double gap = 0.05 + 0.3 * rng.uniform();
    const double len = 0.1 + 0.5 * rng.uniform();
    pieces.emplace_back(a - gap - len, a - gap);
  }
  return IntervalUnion(std::move(pieces));
}

inline std::string union_text(const IntervalUnion& s) { return "S = " + s.text(); }

inline std::vector<Vector> interval_samples(std::int64_t n, const std::function<Interval(Rng&)>& draw,
                                            std::uint64_t seed) {
  std::vector<Vector> out(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (auto& v : out) {
    const Interval iv = draw(rng);
    v = (Vector(2) << iv.lo, iv.hi).finished();
  }
  return out;
}

inline std::int64_t scaled(double base, double scale) {
  return std::max<std::int64_t>(1000, static_cast<std::int64_t>(std::llround(base * scale)));
}

}  // namespace detail

/// Monte-Carlo battery for the stepping-out and shrinkage lemmas: covering
/// probability bound, shrinkage mass bound, reflection equivariance,
/// interchange identity and convergence as m grows.
inline LemmaReport lemma_suite(std::uint64_t seed, const LemmaOptions& opts = {}) {
  LemmaReport report;
  report.seed = seed;
  std::uint64_t counter = 0;
  auto next_seed = [&] { return derive_seed(seed, ++counter); };
  auto contains = [](const IntervalUnion& s) { return [&s](double x) { return s.contains(x); }; };

  // Covering probability >= 1 - (b - theta)/(m w) - delta/w.
  auto covering_entry = [&](const std::string& name, const IntervalUnion& set, double theta, const StepCap& m, double w,
                            std::int64_t n, bool with_exact) {
    LemmaEntry e;
    e.check = "covering";
    e.name = name;
    e.seed = next_seed();
    const double b = *set.sup_within(theta, kInf);
    const double delta = (b - theta) - set.measure_within(theta, b);
    e.config = detail::union_text(set) + ", theta = " + text::fixed_digits(theta, 6) + ", m = " + cap_text(m) +
               ", w = " + text::fixed_digits(w, 6);
    e.reference = covering_bound(b, theta, delta, m, w);
    Rng rng(e.seed);
    const CoverageEstimate est = estimate_covering_probability(set, theta, kInf, StepOutParams{w, m}, n, rng);
    e.measure = "covering frequency";
    e.value = est.estimate;
    e.se = est.std_error;
    e.pass = e.value >= e.reference - 3.0 * e.se;
    if (with_exact && m) {
      const double exact = exact_covering_probability(set, theta, kInf, *m, w);
      e.config += ", exact = " + text::fixed_digits(exact, 6);
      // For m = 1 the bound is attained, so exact and bound agree up to the grid.
      const double grid_error = 2.0 * static_cast<double>(set.pieces().size()) / 100'000.0;
      e.pass = e.pass && exact >= e.reference - grid_error && std::abs(e.value - exact) <= 3.0 * e.se + grid_error;
    }
    report.entries.push_back(e);
  };

  covering_entry("two pieces, exact", IntervalUnion::from_endpoints({-1.0, 0.3, 0.5, 1.0}), 0.0, 3, 1.0,
                 detail::scaled(1e6, opts.scale), true);
  covering_entry("connected, m = inf", IntervalUnion::from_endpoints({-1.0, 1.0}), 0.0, std::nullopt, 0.7,
                 detail::scaled(2e5, opts.scale), false);
  covering_entry("short piece, m = 1", IntervalUnion::from_endpoints({-0.1, 0.1}), 0.0, 1, 2.0,
                 detail::scaled(1e6, opts.scale), true);
  {
    Rng rng(derive_seed(seed, 0xA3));
    const StepCap caps[] = {1, 2, 3, 5, std::nullopt};
    for (int i = 0; i < opts.randomized; ++i) {
      const IntervalUnion set = detail::random_union(rng);
      const double theta = 0.0;
      const StepCap m = caps[rng.uniform_int(0, 4)];
      const double b = *set.sup_within(theta, kInf);
      const double delta = (b - theta) - set.measure_within(theta, b);
      const bool multi = !m || *m >= 2;
      const double need = (m ? (b - theta) / static_cast<double>(*m) : 0.0) + (multi ? delta : 0.0);
      const double w = std::max(need, 0.05) * (1.2 + 1.8 * rng.uniform());
      covering_entry("random " + std::to_string(i + 1), set, theta, m, w, detail::scaled(2e5, opts.scale), m.has_value());
    }
  }

  // Shrinkage kernel mass of A >= Leb(A n S n (lo, hi)) / min(hi - lo, diam S).
  auto shrink_entry = [&](const std::string& name, const IntervalUnion& set, double lo, double hi, double a0, double a1,
                          std::int64_t n) {
    LemmaEntry e;
    e.check = "shrinkage";
    e.name = name;
    e.seed = next_seed();
    e.config = detail::union_text(set) + ", interval = (" + text::fixed_digits(lo, 6) + ", " +
               text::fixed_digits(hi, 6) + "), A = (" + text::fixed_digits(a0, 6) + ", " + text::fixed_digits(a1, 6) +
               ")";
    double a_mass = 0.0;
    for (const auto& [p, q] : set.pieces()) {
      a_mass += std::max(0.0, std::min({q, hi, a1}) - std::max({p, lo, a0}));
    }
    e.reference = shrinkage_mass_bound(a_mass, hi - lo, set.diameter());
    Rng rng(e.seed);
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double th = reeled_shrinkage(contains(set), lo, hi, rng).theta;
      if (th > a0 && th < a1) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    e.measure = "mass of A";
    e.value = p;
    e.se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    e.pass = e.value >= e.reference - 3.0 * e.se;
    report.entries.push_back(e);
  };

  shrink_entry("two pieces, start 0.1", IntervalUnion::from_endpoints({-0.1, 0.1, 0.7, 0.9}), -0.1, 0.9, 0.7, 0.9,
               detail::scaled(2e5, opts.scale));
  {
    Rng rng(derive_seed(seed, 0xB1));
    for (int i = 0; i < opts.randomized; ++i) {
      const IntervalUnion set = detail::random_union(rng);
      // The interval may cut S or reach past it on either side; 0 stays inside.
      const double lo = -0.05 - rng.uniform() * (0.25 - set.inf());
      const double hi = 0.05 + rng.uniform() * (set.sup() + 0.25);
      const double span = hi - lo;
      const double a0 = lo + span * 0.6 * rng.uniform();
      const double a1 = a0 + span * (0.1 + 0.3 * rng.uniform());
      shrink_entry("random " + std::to_string(i + 1), set, lo, hi, a0, a1, detail::scaled(1e5, opts.scale));
    }
  }

  // Reflection equivariance: stepping-out on alpha - S from theta has the law of
  // (alpha - r, alpha - l) for stepping-out on S from alpha - theta.
  auto equivariance_entry = [&](const std::string& name, const IntervalUnion& set, double alpha, double theta,
                                const StepCap& m, double w, std::int64_t n) {
    LemmaEntry e;
    e.check = "equivariance";
    e.name = name;
    e.seed = next_seed();
    e.config = detail::union_text(set) + ", alpha = " + text::fixed_digits(alpha, 6) + ", theta = " +
               text::fixed_digits(theta, 6) + ", m = " + cap_text(m) + ", w = " + text::fixed_digits(w, 6);
    const IntervalUnion mirrored = set.reflected(alpha);
    const StepOutParams params{w, m};
    const auto direct = detail::interval_samples(
        n, [&](Rng& rng) { return stepping_out_at(theta, contains(mirrored), params, rng); }, derive_seed(e.seed, 1));
    const auto reflected = detail::interval_samples(
        n,
        [&](Rng& rng) {
          const Interval iv = stepping_out_at(alpha - theta, contains(set), params, rng);
          return Interval{alpha - iv.hi, alpha - iv.lo, iv.expansions_right, iv.expansions_left};
        },
        derive_seed(e.seed, 2));
    EnergyTestOptions eo;
    eo.seed = derive_seed(e.seed, 3);
    eo.threads = opts.threads;
    const TwoSampleResult t = energy_test(direct, reflected, eo);
    e.measure = "energy statistic";
    e.value = t.statistic;
    e.reference = t.null_mean;
    e.p_value = t.p_value;
    e.pass = t.p_value > 0.001;
    report.entries.push_back(e);
  };

  equivariance_entry("fixed", IntervalUnion::from_endpoints({-1.0, 0.3, 0.5, 1.4}), 0.7, 0.6, 4, 0.6,
                     detail::scaled(1e5, opts.scale));
  {
    Rng rng(derive_seed(seed, 0xA2));
    for (int i = 0; i < opts.randomized; ++i) {
      const IntervalUnion set = detail::random_union(rng);
      const double alpha = 2.0 * rng.uniform() - 1.0;
      // alpha - theta = 0 lies in S.
      const double theta = alpha;
      const StepCap m = rng.uniform() < 0.3 ? StepCap{} : StepCap{1 + rng.uniform_int(0, 5)};
      const double w = 0.1 + 0.9 * rng.uniform();
      equivariance_entry("random " + std::to_string(i + 1), set, alpha, theta, m, w, detail::scaled(2e4, opts.scale));
    }
  }

  // Interchange identity: P_theta(alpha in (l, r)) = P_alpha(theta in (l, r)).
  auto interchange_entry = [&](const std::string& name, const IntervalUnion& set, double theta, double alpha,
                               const StepCap& m, double w, std::int64_t n) {
    LemmaEntry e;
    e.check = "interchange";
    e.name = name;
    e.seed = next_seed();
    e.config = detail::union_text(set) + ", theta = " + text::fixed_digits(theta, 6) + ", alpha = " +
               text::fixed_digits(alpha, 6) + ", m = " + cap_text(m) + ", w = " + text::fixed_digits(w, 6);
    const StepOutParams params{w, m};
    auto frequency = [&](double from, double point, std::uint64_t s) {
      Rng rng(s);
      std::int64_t hits = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        const Interval iv = stepping_out_at(from, contains(set), params, rng);
        if (iv.lo < point && point < iv.hi) ++hits;
      }
      return static_cast<double>(hits) / static_cast<double>(n);
    };
    const double p1 = frequency(theta, alpha, derive_seed(e.seed, 1));
    const double p2 = frequency(alpha, theta, derive_seed(e.seed, 2));
    e.measure = "P_theta(alpha covered)";
    e.value = p1;
    e.reference = p2;
    e.se = std::sqrt((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / static_cast<double>(n));
    e.pass = std::abs(p1 - p2) <= 3.0 * e.se;
    report.entries.push_back(e);
  };

  interchange_entry("fixed", IntervalUnion::from_endpoints({-1.0, 0.3, 0.5, 1.4}), 0.0, 0.9, 3, 0.5,
                    detail::scaled(1e6, opts.scale));
  {
    Rng rng(derive_seed(seed, 0xA22));
    for (int i = 0; i < opts.randomized; ++i) {
      const IntervalUnion set = detail::random_union(rng);
      const auto& pieces = set.pieces();
      const auto& other = pieces[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pieces.size()) - 1))];
      const double alpha = other.first + (other.second - other.first) * (0.1 + 0.8 * rng.uniform());
      const StepCap m = rng.uniform() < 0.3 ? StepCap{} : StepCap{1 + rng.uniform_int(0, 5)};
      // w on the scale of |alpha| keeps both coverage probabilities away from 0 and 1.
      const double w = std::max(std::abs(alpha), 0.2) * (0.3 + 0.9 * rng.uniform());
      interchange_entry("random " + std::to_string(i + 1), set, 0.0, alpha, m, w, detail::scaled(2e5, opts.scale));
    }
  }

  // Convergence as m grows: energy distance to the m = inf law shrinks.
  auto convergence_entry = [&](const std::string& name, const IntervalUnion& set, double w, std::int64_t n,
                               bool strict) {
    LemmaEntry e;
    e.check = "m-limit";
    e.name = name;
    e.seed = next_seed();
    e.config = detail::union_text(set) + ", w = " + text::fixed_digits(w, 6) + ", m in {10, 100, 1000} vs inf";
    auto sample = [&](const StepCap& m, std::uint64_t s) {
      const StepOutParams params{w, m};
      return detail::interval_samples(n, [&](Rng& rng) { return stepping_out(contains(set), params, rng); }, s);
    };
    const auto limit = sample(std::nullopt, derive_seed(e.seed, 0));
    std::vector<TwoSampleResult> tests;
    for (std::int64_t m : {10, 100, 1000}) {
      const auto s = sample(m, derive_seed(e.seed, static_cast<std::uint64_t>(m)));
      EnergyTestOptions eo;
      eo.seed = derive_seed(e.seed, 7 + static_cast<std::uint64_t>(m));
      eo.threads = opts.threads;
      tests.push_back(energy_test(s, limit, eo));
    }
    const double slack1 = 3.0 * tests[1].null_sd;
    const double slack2 = 3.0 * tests[2].null_sd;
    const bool monotone = tests[1].statistic <= tests[0].statistic + slack1 &&
                          tests[2].statistic <= tests[1].statistic + slack2 &&
                          (!strict || tests[1].statistic < tests[0].statistic);
    e.measure = "energy statistic at m = 1000";
    e.value = tests[2].statistic;
    e.reference = tests[2].null_mean;
    e.p_value = tests[2].p_value;
    std::ostringstream extra;
    extra << ", statistics " << text::fixed_digits(tests[0].statistic, 4) << " > "
          << text::fixed_digits(tests[1].statistic, 4) << " > " << text::fixed_digits(tests[2].statistic, 4);
    e.config += extra.str();
    e.pass = monotone && tests[2].p_value > 0.001;
    report.entries.push_back(e);
  };

  {
    const IntervalUnion fixed = IntervalUnion::from_endpoints({-1.0, 0.3, 0.5, 1.4});
    convergence_entry("fixed", fixed, fixed.diameter() / 2.0, detail::scaled(1e5, opts.scale), true);
    Rng rng(derive_seed(seed, 0xA1));
    for (int i = 0; i < opts.randomized; ++i) {
      const IntervalUnion set = detail::random_union(rng);
      const double w = set.diameter() / (1.5 + 1.5 * rng.uniform());
      convergence_entry("random " + std::to_string(i + 1), set, w, detail::scaled(2e4, opts.scale), false);
    }
  }
  return report;
}

}  // namespace geoslice
