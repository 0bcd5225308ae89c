#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "geoslice/errors.hpp"
#include "geoslice/manifold.hpp"
#include "geoslice/parallel.hpp"
#include "geoslice/random.hpp"
#include "geoslice/slice1d.hpp"
#include "geoslice/target.hpp"
#include "geoslice/text.hpp"

namespace geoslice {

/// Bishop-Gromov comparison constant for Ricci bound zeta, support diameter and dimension d.
inline double kappa(double zeta, double diam_w, int d) {
  if (!(diam_w > 0.0)) throw InvalidArgument("kappa: diam_W must be positive");
  if (d < 1) throw InvalidArgument("kappa: dimension must be >= 1");
  if (d == 1) {
    if (zeta > 0.0 && std::sqrt(zeta) * diam_w > std::numbers::pi * (1.0 + 1e-12)) {
      throw BoundInapplicable("kappa: sqrt(zeta) * diam_W exceeds pi, impossible for zeta > 0");
    }
    return 1.0;
  }
  const double e = d - 1.0;
  if (zeta > 0.0) {
    const double s = std::sqrt(zeta) * diam_w;
    if (s > std::numbers::pi * (1.0 + 1e-12)) {
      throw BoundInapplicable("kappa: sqrt(zeta) * diam_W = " + text::exact(s) +
                              " exceeds pi, which no manifold with Ricci >= (d-1) zeta allows");
    }
    return std::pow(zeta, -e / 2.0) * std::pow(std::sin(std::min(s, std::numbers::pi / 2.0)), e);
  }
  if (zeta == 0.0) return std::pow(diam_w, e);
  const double a = std::abs(zeta);
  return std::pow(a, -e / 2.0) * std::pow(std::sinh(std::sqrt(a) * diam_w), e);
}

/// Covering probability guaranteed by the support geometry alone.
inline double epsilon_corollary(double diam_w, double delta, const StepCap& m, double w) {
  if (!(w > 0.0)) throw InvalidArgument("epsilon_corollary: w must be positive");
  if (!(diam_w > 0.0) || delta < 0.0) throw InvalidArgument("epsilon_corollary: need diam_W > 0 and delta >= 0");
  const bool finite = m.has_value();
  const bool multi = !finite || *m >= 2;
  const double reach = finite ? diam_w / static_cast<double>(*m) : 0.0;
  const double slack = w - (multi ? delta : 0.0);
  if (!(reach < slack)) {
    std::ostringstream msg;
    msg << "corollary epsilon needs diam_W/m < w - delta (m >= 2) for m = " << cap_text(m) << ", w = " << w
        << ": " << reach << " >= " << slack;
    throw BoundInapplicable(msg.str());
  }
  return 1.0 - reach / w - (multi ? delta / w : 0.0);
}

/// min(m w, lambda); lambda empty means infinite.
inline double effective_length(const StepCap& m, double w, const std::optional<double>& lambda) {
  const double mw = m ? static_cast<double>(*m) * w : kInf;
  return std::min(mw, lambda.value_or(kInf));
}

/// Geometric contraction rate of the uniform-ergodicity theorem.
inline double rho(double epsilon, const StepCap& m, double w, const std::optional<double>& lambda, double kappa_value,
                  double omega_dm1, double sup_tl, double p_max) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InvalidArgument("rho: epsilon must lie in (0, 1]");
  const double len = effective_length(m, w, lambda);
  if (!(len > 0.0) || !std::isfinite(len)) throw BoundInapplicable("rho: min(m w, lambda) must be finite and positive");
  if (!(kappa_value > 0.0 && omega_dm1 > 0.0 && sup_tl > 0.0 && p_max > 0.0)) {
    throw InvalidArgument("rho: kappa, omega, sup_t t L(t) and p_max must be positive");
  }
  const double value = 1.0 - epsilon / len / (kappa_value * omega_dm1) * (sup_tl / p_max);
  if (!(value >= 0.0 && value < 1.0)) {
    throw BoundInapplicable("rho = " + text::exact(value) + " lies outside [0, 1); the inputs are inconsistent");
  }
  return value;
}

/// Rate for the uniform distribution on a convex body: the m = inf sampler is hit-and-run.
inline double rho_hit_and_run(double vol_c, double diam_c, int d) {
  if (!(vol_c > 0.0 && diam_c > 0.0) || d < 1) throw InvalidArgument("rho_hit_and_run: positive inputs required");
  const double omega = unit_sphere_volume(d - 1);
  const double value = 1.0 - vol_c / (omega * std::pow(diam_c, d));
  if (!(value >= 0.0 && value < 1.0)) {
    throw BoundInapplicable("hit-and-run rho = " + text::exact(value) + " lies outside [0, 1)");
  }
  const double general = rho(1.0, std::nullopt, 1.0, diam_c, std::pow(diam_c, d - 1), omega, vol_c, 1.0);
  if (std::abs(general - value) > 1e-14) {
    throw Error("hit-and-run rho disagrees with the general formula: " + text::exact(value) + " vs " +
                text::exact(general));
  }
  return value;
}

/// Hyperparameter-dependent factor epsilon_corollary / min(m w, lambda).
inline double q_factor(const StepCap& m, double w, double diam_w, double delta, const std::optional<double>& lambda) {
  const double eps = epsilon_corollary(diam_w, delta, m, w);
  const double len = effective_length(m, w, lambda);
  if (!(len > 0.0) || !std::isfinite(len)) throw BoundInapplicable("q: min(m w, lambda) must be finite and positive");
  return eps / len;
}

/// w maximizing q(m, .) when lambda = inf.
inline double optimal_width(std::int64_t m, double diam_w, double delta) {
  return 2.0 * diam_w / static_cast<double>(m) + (m >= 2 ? 2.0 * delta : 0.0);
}

struct HyperOpt {
  char regime = 'a';
  StepCap m = 1;
  /// Empty when w is arbitrary or only approached as w -> inf (see w_text).
  std::optional<double> w;
  std::string w_text;
  double q = 0.0;
  /// True when q is a supremum that no finite w attains.
  bool supremum_only = false;
  std::vector<std::string> ties;
};

/// Maximizer of q over m in N u {inf} and w > 0, with the regime of the
/// (diam_W, lambda) configuration: a lambda = inf, b 2 diam < lambda <= 4 diam,
/// c lambda > 4 diam, d lambda <= 2 diam.
inline HyperOpt optimal_hyperparameters(double diam_w, double delta, const std::optional<double>& lambda) {
  if (!(diam_w > 0.0) || delta < 0.0) throw InvalidArgument("optimal_hyperparameters: need diam_W > 0, delta >= 0");
  HyperOpt out;
  const double corner = 1.0 / (4.0 * diam_w);
  auto best_corner = [&](char regime) {
    out.regime = regime;
    out.m = 1;
    out.w = 2.0 * diam_w;
    out.w_text = text::exact(*out.w);
    out.q = corner;
    if (delta == 0.0) out.ties.push_back("every m in N with m w = 2 diam_W");
  };
  if (!lambda) {
    best_corner('a');
    return out;
  }
  const double lam = *lambda;
  if (!(lam > 0.0)) throw InvalidArgument("optimal_hyperparameters: lambda must be positive");
  if (lam > 4.0 * diam_w) {
    best_corner('c');
    return out;
  }
  out.regime = lam > 2.0 * diam_w ? 'b' : 'd';
  out.m = std::nullopt;
  out.q = 1.0 / lam;
  if (delta == 0.0) {
    out.w_text = "any";
  } else {
    out.w_text = "inf";
    out.supremum_only = true;
    out.ties.push_back("approached as w -> inf for every m");
  }
  if (lam == 4.0 * diam_w) out.ties.push_back("m = 1, w = 2 diam_W attains the same value");
  return out;
}

/// Lower bound on nu(M) / (diam(M) kappa omega_{d-1}) for W = M from the
/// injectivity radius (isoembolic inequality).
inline double isoembolic_lower_bound(double inj, double diam, double zeta, int d) {
  if (!(inj > 0.0 && diam > 0.0) || d < 1) throw InvalidArgument("isoembolic bound: positive inputs required");
  if (inj > diam * (1.0 + 1e-12)) throw BoundInapplicable("isoembolic bound: injectivity radius exceeds the diameter");
  const double dd = static_cast<double>(d);
  const double pi = std::numbers::pi;
  if (zeta > 0.0) {
    if (std::sqrt(zeta) * diam > pi * (1.0 + 1e-12)) throw BoundInapplicable("isoembolic bound: sqrt(zeta) diam > pi");
    return std::sqrt(2.0 / pi) / std::sqrt(dd) * std::pow(inj * std::sqrt(zeta) / pi, dd);
  }
  if (zeta == 0.0) return std::sqrt(2.0 * pi) / std::sqrt(dd) * std::pow(inj / (pi * diam), dd);
  const double a = std::sqrt(std::abs(zeta));
  return std::sqrt(2.0 * pi) / std::sqrt(dd) * std::pow(inj * a / (pi * std::sinh(a * diam)), dd);
}

enum class EpsilonMode { Auto, Analytic, Corollary, MonteCarlo };

inline EpsilonMode parse_epsilon_mode(const std::string& s) {
  if (s == "auto") return EpsilonMode::Auto;
  if (s == "analytic") return EpsilonMode::Analytic;
  if (s == "corollary") return EpsilonMode::Corollary;
  if (s == "monte-carlo" || s == "mc") return EpsilonMode::MonteCarlo;
  throw InvalidArgument("unknown epsilon mode '" + s + "' (auto, analytic, corollary, monte-carlo)");
}

struct ReportLine {
  std::string key;
  std::string value;
  std::string provenance;
};

struct BoundsReport {
  std::string target;
  std::string manifold;
  int dim = 0;
  StepCap m = 1;
  double w = 0.0;
  std::optional<double> lambda;
  double diam_w = 0.0;
  double delta = 0.0;
  std::string delta_provenance;
  double zeta = 0.0;
  double kappa = 0.0;
  double omega_dm1 = 0.0;
  double epsilon = 0.0;
  /// analytic | corollary | monte-carlo
  std::string epsilon_provenance;
  double epsilon_se = 0.0;
  double lambda_eff = 0.0;
  double sup_tl = 0.0;
  double p_max = 0.0;
  double rho = 0.0;
  double q = 0.0;
  /// False for Monte-Carlo epsilon (or Delta): the rate is then optimistic.
  bool certified = true;
  std::vector<std::string> notes;

  std::vector<ReportLine> lines() const {
    auto num = [](double v) { return text::fixed_digits(v, 8); };
    const std::string eps_tag = epsilon_provenance == "monte-carlo" ? "monte-carlo, optimistic" : epsilon_provenance;
    std::vector<ReportLine> out = {
        {"target", target, "input"},
        {"manifold", manifold, "input"},
        {"d", std::to_string(dim), "manifold"},
        {"m", cap_text(m), "input"},
        {"w", num(w), "input"},
        {"lambda", lambda ? num(*lambda) : "inf", "target"},
        {"diam_W", num(diam_w), "target"},
        {"delta", num(delta), delta_provenance},
        {"p_max", num(p_max), "target"},
        {"zeta", num(zeta), "manifold"},
        {"omega_dm1", num(omega_dm1), "closed form"},
        {"kappa", num(kappa), "comparison formula"},
        {"epsilon", num(epsilon), eps_tag},
        {"lambda_eff", num(lambda_eff), "min(m w, lambda)"},
        {"sup_tL", num(sup_tl), sup_provenance},
        {"q", num(q), "epsilon / lambda_eff"},
        {"rho", num(rho), certified ? "certified" : "optimistic, not certified"},
    };
    if (epsilon_provenance == "monte-carlo") out.insert(out.begin() + 13, {"epsilon_se", num(epsilon_se), "monte-carlo"});
    return out;
  }

  std::string to_text() const {
    std::ostringstream out;
    for (const auto& l : lines()) out << l.key << " = " << l.value << " [" << l.provenance << "]\n";
    for (const auto& n : notes) out << "# " << n << '\n';
    return out.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["target"] = target;
    j["manifold"] = manifold;
    j["d"] = dim;
    j["m"] = cap_text(m);
    j["w"] = w;
    j["lambda"] = lambda ? nlohmann::ordered_json(*lambda) : nlohmann::ordered_json("inf");
    j["diam_W"] = diam_w;
    j["delta"] = {{"value", delta}, {"provenance", delta_provenance}};
    j["p_max"] = p_max;
    j["zeta"] = zeta;
    j["omega_dm1"] = omega_dm1;
    j["kappa"] = kappa;
    j["epsilon"] = {{"value", epsilon}, {"provenance", epsilon_provenance}, {"std_error", epsilon_se}};
    j["lambda_eff"] = lambda_eff;
    j["sup_tL"] = {{"value", sup_tl}, {"provenance", sup_provenance}};
    j["q"] = q;
    j["rho"] = rho;
    j["certified"] = certified;
    j["notes"] = notes;
    return j;
  }

  std::string sup_provenance = "analytic";
};

struct MonteCarloEpsilonOptions {
  std::int64_t probes = 256;
  std::int64_t runs_per_probe = 2000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

namespace detail {

inline bool is_sphere(const Manifold& m) { return m.spec().rfind("sphere:", 0) == 0; }
inline bool is_euclidean(const Manifold& m) { return m.spec().rfind("euclidean:", 0) == 0; }

inline bool full_support_on_sphere(const Target& t) {
  return is_sphere(*t.manifold) &&
         (std::holds_alternative<UniformShape>(t.shape) || std::holds_alternative<VmfShape>(t.shape));
}

inline bool convex_uniform(const Target& t) {
  if (!is_euclidean(*t.manifold)) return false;
  if (std::holds_alternative<BallShape>(t.shape) || std::holds_alternative<BoxShape>(t.shape)) return true;
  if (const auto* iv = std::get_if<IntervalsShape>(&t.shape)) return iv->set.pieces().size() == 1;
  return false;
}

// m = 1 with w at least one full winding of the great circle (relative slack
// so that decimal renderings of 2 pi qualify).
inline bool full_winding(const StepCap& m, double w) {
  return m && *m == 1 && w >= 2.0 * std::numbers::pi * (1.0 - 1e-8);
}

}  // namespace detail

/// Why analytic epsilon = 1 is not available, or empty if it is.
inline std::optional<std::string> analytic_epsilon_obstacle(const Target& t, const StepCap& m, double w) {
  if (detail::full_support_on_sphere(t)) {
    if (detail::full_winding(m, w)) return std::nullopt;
    return "analytic epsilon = 1 on the sphere needs m = 1 and w >= 2 pi (one full winding)";
  }
  if (detail::convex_uniform(t)) {
    if (!m) return std::nullopt;
    return "analytic epsilon = 1 for a convex body needs m = inf (hit-and-run)";
  }
  return "analytic epsilon is known only for full-support sphere targets (m = 1, w = 2 pi) and uniform convex bodies "
         "(m = inf)";
}

struct EpsilonEstimate {
  double value = 1.0;
  double std_error = 0.0;
  std::int64_t probes = 0;
};

/// Monte-Carlo inf over random (x, v, t) of the stepping-out covering
/// frequency. An upper estimate of an inf: never a certificate.
inline EpsilonEstimate monte_carlo_epsilon(const Target& target, const StepCap& m, double w,
                                           const MonteCarloEpsilonOptions& opts) {
  constexpr int kGrid = 4096;
  const Manifold& man = *target.manifold;
  StepOutParams params{w, m};
  params.validate();
  const bool periodic = detail::is_sphere(man);
  std::vector<EpsilonEstimate> per(static_cast<std::size_t>(opts.probes));
  parallel_for(per.size(), opts.threads, [&](std::size_t i) {
    Rng rng = stream_rng(derive_seed(opts.seed, 0xE95), i);
    const Point x = sample_support_point(target, rng);
    const TangentVector v = man.sample_unit_tangent(x, rng);
    const double t = target.density(x) * rng.uniform_open();
    double horizon = man.cut_time(x, v).value;
    if (!std::isfinite(horizon)) horizon = target.lambda.value_or(target.diam_w) * (1.0 + 1e-9);
    auto in_level = [&](double theta) { return target.density(man.exp_map(x, v, theta)) > t; };
    double b = 0.0;
    for (int k = 0; k < kGrid; ++k) {
      const double theta = horizon * k / kGrid;
      if (in_level(theta)) b = std::min(horizon, theta + horizon / kGrid);
    }
    std::int64_t hits = 0;
    for (std::int64_t r = 0; r < opts.runs_per_probe; ++r) {
      const Interval iv = stepping_out(in_level, params, rng);
      if (iv.hi >= b || (periodic && iv.width() >= 2.0 * std::numbers::pi)) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(opts.runs_per_probe);
    per[i] = {p, std::sqrt(p * (1.0 - p) / static_cast<double>(opts.runs_per_probe)), 1};
  });
  EpsilonEstimate out;
  out.probes = opts.probes;
  for (const auto& e : per) {
    if (e.value < out.value) out = {e.value, e.std_error, opts.probes};
  }
  return out;
}

/// Every constant of the ergodicity bound for a target and hyperparameters.
inline BoundsReport full_report(const Target& target, const StepCap& m, double w, EpsilonMode mode,
                                const MonteCarloEpsilonOptions& mc = {}) {
  StepOutParams{w, m}.validate();
  if (!m && !target.lambda_finite()) {
    throw InvalidArgument("m = inf requires lambda < inf, but target '" + target.spec + "' has lambda = inf");
  }
  const ManifoldInfo info = target.manifold->info();
  BoundsReport r;
  r.target = target.spec;
  r.manifold = target.manifold->spec();
  r.dim = info.dim;
  r.m = m;
  r.w = w;
  r.lambda = target.lambda;
  r.diam_w = target.diam_w;
  r.p_max = target.p_max;
  r.zeta = info.ricci_lower;
  r.omega_dm1 = info.omega_dm1;
  r.kappa = kappa(r.zeta, r.diam_w, r.dim);
  r.lambda_eff = effective_length(m, w, target.lambda);

  if (target.delta) {
    r.delta = *target.delta;
    r.delta_provenance = "analytic";
  } else {
    Rng rng(derive_seed(mc.seed, 0xDE17A));
    r.delta = estimate_delta(target, 256, 8, rng).value;
    r.delta_provenance = "monte-carlo lower bound";
  }

  if (mode == EpsilonMode::Auto) {
    if (!analytic_epsilon_obstacle(target, m, w)) {
      mode = EpsilonMode::Analytic;
    } else if (target.delta) {
      mode = EpsilonMode::Corollary;
    } else {
      mode = EpsilonMode::MonteCarlo;
    }
  }
  switch (mode) {
    case EpsilonMode::Analytic:
      if (auto why = analytic_epsilon_obstacle(target, m, w)) throw BoundInapplicable(*why);
      r.epsilon = 1.0;
      r.epsilon_provenance = "analytic";
      break;
    case EpsilonMode::Corollary:
      r.epsilon = epsilon_corollary(r.diam_w, r.delta, m, w);
      r.epsilon_provenance = "corollary";
      if (!target.delta) {
        r.certified = false;
        r.notes.push_back("delta is a Monte-Carlo lower bound, so the corollary epsilon is optimistic");
      }
      break;
    case EpsilonMode::MonteCarlo: {
      const EpsilonEstimate e = monte_carlo_epsilon(target, m, w, mc);
      r.epsilon = e.value;
      r.epsilon_se = e.std_error;
      r.epsilon_provenance = "monte-carlo";
      r.certified = false;
      r.notes.push_back("epsilon estimated from " + std::to_string(e.probes) +
                        " random (x, v, t) probes; rho is optimistic, not certified");
      break;
    }
    case EpsilonMode::Auto:
      break;
  }
  if (!(r.epsilon > 0.0)) throw BoundInapplicable("estimated epsilon is 0; no contraction can be certified");

  r.sup_tl = sup_t_level(target);
  if (!target.level_set) {
    r.sup_provenance = "monte-carlo";
    r.certified = false;
  }
  r.q = r.epsilon / r.lambda_eff;
  r.rho = rho(r.epsilon, m, w, target.lambda, r.kappa, r.omega_dm1, r.sup_tl, r.p_max);
  return r;
}

}  // namespace geoslice
