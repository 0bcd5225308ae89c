#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
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

struct GssConfig {
  std::shared_ptr<const Target> target;
  StepOutParams step_out;
  std::uint64_t seed = 0;
  std::int64_t max_shrink_iters = 100'000;
  /// Mutation switch used only by tests of the invariance harness.
  bool skip_level_check = false;

  GssConfig() = default;
  GssConfig(Target t, double w, StepCap m, std::uint64_t seed_ = 0)
      : target(std::make_shared<const Target>(std::move(t))), step_out{w, m}, seed(seed_) {}

  void validate() const {
    if (!target) throw InvalidArgument("config has no target");
    step_out.validate();
    if (max_shrink_iters < 1) throw InvalidArgument("max_shrink_iters must be >= 1");
    if (!step_out.m && !target->lambda_finite()) {
      throw InvalidArgument("m = inf requires lambda = sup diam W(x,v) < inf, but target '" + target->spec +
                            "' has lambda = inf (geodesic level sets may wrap around indefinitely); use a finite m");
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["target"] = target ? target->spec : "";
    j["manifold"] = target ? target->manifold->spec() : "";
    j["m"] = cap_text(step_out.m);
    j["w"] = step_out.w;
    j["seed"] = seed;
    j["max_expansions"] = step_out.max_expansions;
    j["max_shrink_iters"] = max_shrink_iters;
    return j;
  }
};

struct StepDiagnostics {
  double level = 0.0;
  Vector direction;
  double interval_width = 0.0;
  std::int64_t shrink_iterations = 0;
  std::int64_t expansions = 0;
};

struct StepResult {
  Point x;
  StepDiagnostics diag;
};

namespace detail {

inline std::string vector_text(const Vector& v) {
  std::ostringstream out;
  out << '(';
  for (int i = 0; i < v.size(); ++i) out << (i ? ", " : "") << text::exact(v[i]);
  out << ')';
  return out.str();
}

}  // namespace detail

/// One transition of the geodesic slice sampler from x.
inline StepResult step_detailed(const Point& x, const GssConfig& config, Rng& rng) {
  const Target& target = *config.target;
  const Manifold& m = *target.manifold;
  const double px = target.density(x);
  if (!(px > 0.0)) throw InvalidArgument("step: current state has p(x) = 0: " + detail::vector_text(x.coords));

  double level = 0.0;
  do {
    level = rng.uniform_open() * px;
  } while (!(level > 0.0 && level < px));

  const TangentVector v = m.sample_unit_tangent(x, rng);
  auto in_level = [&](double theta) { return target.density(m.exp_map(x, v, theta)) > level; };

  try {
    const Interval iv = stepping_out(in_level, config.step_out, rng);
    ShrinkOptions opts;
    opts.max_iters = config.max_shrink_iters;
    opts.skip_level_check = config.skip_level_check;
    const ShrinkResult sr = reeled_shrinkage(in_level, iv.lo, iv.hi, rng, opts);
    return {m.exp_map(x, v, sr.theta),
            {level, v.dir, iv.width(), sr.iterations, iv.expansions_left + iv.expansions_right}};
  } catch (const ExpansionCapExceeded& e) {
    throw ExpansionCapExceeded(std::string(e.what()) + " [x = " + detail::vector_text(x.coords) +
                               ", v = " + detail::vector_text(v.dir) + ", t = " + text::exact(level) + "]");
  } catch (const ShrinkCapExceeded& e) {
    throw ShrinkCapExceeded(std::string(e.what()) + " [x = " + detail::vector_text(x.coords) +
                            ", v = " + detail::vector_text(v.dir) + ", t = " + text::exact(level) + "]");
  }
}

inline Point step(const Point& x, const GssConfig& config, Rng& rng) { return step_detailed(x, config, rng).x; }

struct ChainEntry {
  std::int64_t index = 0;
  Point x;
  StepDiagnostics diag;
};

struct ChainRecord {
  nlohmann::ordered_json config;
  std::uint64_t seed = 0;
  std::vector<Point> states;
  std::vector<StepDiagnostics> diagnostics;
};

using ChainSink = std::function<void(const ChainEntry&)>;

/// Runs burn_in steps, then records every thin-th state until n are kept.
/// The chain uses stream 0 of the configured seed.
inline ChainRecord run_chain(const Point& x0, std::int64_t n, const GssConfig& config, std::int64_t burn_in = 0,
                             std::int64_t thin = 1, const ChainSink& sink = {}, bool keep_states = true) {
  config.validate();
  if (n < 0 || burn_in < 0 || thin < 1) throw InvalidArgument("run_chain: need n >= 0, burn_in >= 0, thin >= 1");
  const Point start = config.target->manifold->make_point(x0.coords);
  if (!(config.target->density(start) > 0.0)) throw InvalidArgument("run_chain: p(x0) must be positive");
  ChainRecord rec;
  rec.config = config.to_json();
  rec.seed = config.seed;
  Rng rng = stream_rng(config.seed, 0);
  Point x = start;
  std::int64_t i = 0;
  for (; i < burn_in; ++i) x = step(x, config, rng);
  for (std::int64_t kept = 0; kept < n;) {
    StepResult r;
    for (std::int64_t k = 0; k < thin; ++k, ++i) r = step_detailed(x, config, rng), x = r.x;
    if (sink) sink({i, x, r.diag});
    if (keep_states) {
      rec.states.push_back(x);
      rec.diagnostics.push_back(std::move(r.diag));
    }
    ++kept;
  }
  return rec;
}

/// JSON-lines chain writer: one header line, then one record per kept state.
class JsonlSink {
 public:
  JsonlSink(std::ostream& out, const nlohmann::ordered_json& header) : out_(out) {
    out_ << header.dump() << '\n';
  }

  void operator()(const ChainEntry& e) {
    nlohmann::ordered_json j;
    j["i"] = e.index;
    j["x"] = std::vector<double>(e.x.coords.data(), e.x.coords.data() + e.x.coords.size());
    j["t"] = e.diag.level;
    j["w_int"] = e.diag.interval_width;
    j["k_shrink"] = e.diag.shrink_iterations;
    out_ << j.dump() << '\n';
    if (!out_) throw Error("chain sink: write failed");
  }

 private:
  std::ostream& out_;
};

/// Final states of `replicates` independent chains of n_steps from x0. Chain i
/// uses stream i of the config seed, so results do not depend on `threads`.
inline std::vector<Point> endpoint_ensemble(const Point& x0, std::int64_t n_steps, std::int64_t replicates,
                                            const GssConfig& config, unsigned threads = 1) {
  config.validate();
  if (n_steps < 0 || replicates < 0) throw InvalidArgument("endpoint_ensemble: negative size");
  if (!(config.target->density(x0) > 0.0)) throw InvalidArgument("endpoint_ensemble: p(x0) must be positive");
  std::vector<Point> out(static_cast<std::size_t>(replicates), x0);
  parallel_for(out.size(), threads, [&](std::size_t i) {
    Rng rng = stream_rng(config.seed, i);
    for (std::int64_t s = 0; s < n_steps; ++s) out[i] = step(out[i], config, rng);
  });
  return out;
}

/// Like endpoint_ensemble, but snapshots every chain after each step count in
/// `checkpoints` (one pass, so the ensemble for n is a prefix of the one for n' > n).
inline std::vector<std::vector<Point>> endpoint_checkpoints(const Point& x0, std::vector<std::int64_t> checkpoints,
                                                            std::int64_t replicates, const GssConfig& config,
                                                            unsigned threads = 1) {
  config.validate();
  if (!(config.target->density(x0) > 0.0)) throw InvalidArgument("endpoint_checkpoints: p(x0) must be positive");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) || (!checkpoints.empty() && checkpoints.front() < 0)) {
    throw InvalidArgument("endpoint_checkpoints: step counts must be sorted and nonnegative");
  }
  std::vector<std::vector<Point>> out(checkpoints.size(), std::vector<Point>(static_cast<std::size_t>(replicates)));
  parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t i) {
    Rng rng = stream_rng(config.seed, i);
    Point x = x0;
    std::int64_t done = 0;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      for (; done < checkpoints[c]; ++done) x = step(x, config, rng);
      out[c][i] = x;
    }
  });
  return out;
}

}  // namespace geoslice
