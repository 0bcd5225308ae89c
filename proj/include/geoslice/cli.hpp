#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoslice/bounds.hpp"
#include "geoslice/errors.hpp"
#include "geoslice/harness.hpp"
#include "geoslice/kernel.hpp"
#include "geoslice/manifold.hpp"
#include "geoslice/target.hpp"
#include "geoslice/text.hpp"

#ifndef GEOSLICE_VERSION
#define GEOSLICE_VERSION "0.0.0"
#endif

namespace geoslice::cli {

enum ExitCode : int { kOk = 0, kStatFail = 1, kUsage = 2, kRuntime = 3 };

/// Malformed command line or configuration.
class UsageError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct RunConfig {
  std::string command;
  std::string target_spec;
  std::string manifold_spec;
  StepCap m = 1;
  double w = 0.0;
  std::string hyper_source;  // "given" or "default (optimal q)"
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::int64_t replicates = 100'000;
  std::vector<std::int64_t> n_list = {1, 5, 10, 20};
  std::int64_t n = 1000;
  std::int64_t burn_in = 0;
  std::int64_t thin = 1;
  std::optional<Vector> x0;
  std::string epsilon_mode = "auto";
  std::string out;
  bool gnuplot = false;
  std::optional<int> bins;
  unsigned threads = 1;
  std::int64_t samples = 100'000;
  double lemma_scale = 1.0;
  /// argv with execution-only options (--out, --threads, --gnuplot, --config) removed.
  std::string command_line;

  std::shared_ptr<const Target> target;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["target"] = target_spec;
    j["manifold"] = manifold_spec;
    j["m"] = cap_text(m);
    j["w"] = w;
    j["hyperparameters"] = hyper_source;
    j["seed"] = seed;
    j["seed_source"] = seed_given ? "given" : "random";
    j["replicates"] = replicates;
    j["n_list"] = n_list;
    j["n"] = n;
    j["burn_in"] = burn_in;
    j["thin"] = thin;
    if (x0) j["x0"] = std::vector<double>(x0->data(), x0->data() + x0->size());
    j["epsilon_mode"] = epsilon_mode;
    if (bins) j["bins"] = *bins;
    j["samples"] = samples;
    j["lemma_scale"] = lemma_scale;
    return j;
  }
};

namespace detail {

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "command", "target", "manifold", "m",           "w",       "seed",   "replicates", "n-list",
      "n",       "burn-in", "thin",    "x0",          "epsilon-mode", "out", "gnuplot", "bins",
      "threads", "samples", "lemma-scale"};
  return keys;
}

// Flat "key = value" file into "--key=value" arguments; '#' starts a comment.
inline std::vector<std::string> read_config_file(const std::string& path, std::string& command) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = text::trim(line.substr(0, eq));
    const std::string value = text::trim(line.substr(eq + 1));
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (key == "command") {
      command = value;
    } else {
      args.push_back("--" + key + "=" + value);
    }
  }
  return args;
}

inline StepCap parse_cap(const std::string& s) {
  const std::string v = text::trim(s);
  if (v == "inf" || v == "infinity") return std::nullopt;
  const long long m = text::parse_int(v, "--m");
  if (m < 1) throw UsageError("--m must be a positive integer or 'inf'");
  return m;
}

inline std::uint64_t parse_seed(const std::string& s) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used, 0);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("--seed: cannot parse '" + s + "' as an unsigned 64-bit integer");
  }
}

inline bool is_execution_only(const std::string& arg, bool& takes_value) {
  for (const char* name : {"--out", "--threads", "--config"}) {
    const std::string n = name;
    if (arg == n) {
      takes_value = true;
      return true;
    }
    if (arg.rfind(n + "=", 0) == 0) {
      takes_value = false;
      return true;
    }
  }
  if (arg == "--gnuplot" || arg.rfind("--gnuplot=", 0) == 0) {
    takes_value = false;
    return true;
  }
  return false;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string quote(const std::string& s) {
  if (!s.empty() && s.find_first_of(" \t\"'") == std::string::npos) return s;
  return "'" + s + "'";
}

}  // namespace detail

/// Parses argv (with an optional --config file whose values the flags override)
/// and resolves target, hyperparameters and seed.
inline RunConfig parse_config(const std::vector<std::string>& argv) {
  std::vector<std::string> user(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::string file_command;
  std::vector<std::string> file_args;
  for (std::size_t i = 0; i < user.size(); ++i) {
    if (user[i] == "--config" && i + 1 < user.size()) file_args = detail::read_config_file(user[i + 1], file_command);
    if (user[i].rfind("--config=", 0) == 0) file_args = detail::read_config_file(user[i].substr(9), file_command);
  }

  RunConfig cfg;
  std::string m_text;
  std::string w_text;
  std::string seed_text;
  std::string n_list_text;
  std::string x0_text;
  std::string config_path;
  int bins = 0;
  CLI::App app("Geodesic slice sampler: sampling, ergodicity bounds and statistical verification", "geoslice");
  app.add_option("command", cfg.command, "sample | bounds | verify | invariance | lemmas | hyperopt")
      ->check(CLI::IsMember({"sample", "bounds", "verify", "invariance", "lemmas", "hyperopt"}));
  app.add_option("--config", config_path, "flat key = value file; command-line flags override it");
  app.add_option("--target", cfg.target_spec, "target spec, e.g. vmf:sphere:2:kappa=2");
  app.add_option("--manifold", cfg.manifold_spec, "manifold spec; alone it selects the uniform target");
  app.add_option("--m", m_text, "step-out cap: positive integer or inf");
  app.add_option("--w", w_text, "step-out width; accepts multiples of pi such as 2pi");
  app.add_option("--seed", seed_text, "64-bit seed (random and recorded when omitted)");
  app.add_option("--replicates", cfg.replicates, "chains per ensemble for verify");
  app.add_option("--n-list", n_list_text, "comma-separated step counts for verify");
  app.add_option("--n", cfg.n, "states to record for sample");
  app.add_option("--burn-in", cfg.burn_in, "steps discarded before recording");
  app.add_option("--thin", cfg.thin, "record every thin-th state");
  app.add_option("--x0", x0_text, "start point as comma-separated embedded coordinates");
  app.add_option("--epsilon-mode", cfg.epsilon_mode, "auto | analytic | corollary | monte-carlo");
  app.add_option("--out", cfg.out, "output file (stdout when omitted)");
  app.add_flag("--gnuplot", cfg.gnuplot, "also write a gnuplot script next to the verify CSV");
  app.add_option("--bins", bins, "override the default bin count");
  app.add_option("--threads", cfg.threads, "worker threads (default GEOSLICE_THREADS or 1)");
  app.add_option("--samples", cfg.samples, "sample size per side for invariance");
  app.add_option("--lemma-scale", cfg.lemma_scale, "multiplier on lemma-suite sample sizes");
  for (auto* opt : app.get_options()) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  cfg.threads = default_threads();
  std::vector<std::string> all;
  all.push_back(argv.empty() ? "geoslice" : argv.front());
  all.insert(all.end(), file_args.begin(), file_args.end());
  all.insert(all.end(), user.begin(), user.end());
  std::vector<const char*> raw;
  for (const auto& s : all) raw.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::CallForHelp&) {
    throw UsageError(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()));
  }
  if (cfg.command.empty()) cfg.command = file_command;
  if (cfg.command.empty()) throw UsageError("missing command (sample, bounds, verify, invariance, lemmas, hyperopt)");

  std::ostringstream cmd;
  cmd << "geoslice";
  for (std::size_t i = 0; i < user.size(); ++i) {
    bool takes_value = false;
    if (detail::is_execution_only(user[i], takes_value)) {
      if (takes_value) ++i;
      continue;
    }
    cmd << ' ' << detail::quote(user[i]);
  }
  cfg.command_line = cmd.str();

  if (!seed_text.empty()) {
    cfg.seed = detail::parse_seed(seed_text);
    cfg.seed_given = true;
  } else {
    std::random_device rd;
    cfg.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  if (bins > 0) cfg.bins = bins;
  if (!n_list_text.empty()) {
    cfg.n_list.clear();
    for (const auto& part : text::split(n_list_text, ',')) {
      const long long v = text::parse_int(part, "--n-list");
      if (v < 0) throw UsageError("--n-list entries must be >= 0");
      cfg.n_list.push_back(v);
    }
  }
  if (!x0_text.empty()) {
    const auto v = text::parse_real_list(x0_text, "--x0");
    cfg.x0 = Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  if (cfg.replicates < 1 || cfg.samples < 2 || cfg.n < 0 || cfg.burn_in < 0 || cfg.thin < 1 || cfg.threads < 1) {
    throw UsageError("sizes must be positive (replicates, samples, thin, threads) or nonnegative (n, burn-in)");
  }
  parse_epsilon_mode(cfg.epsilon_mode);

  if (cfg.command == "lemmas" || (cfg.command == "hyperopt" && cfg.target_spec.empty() && cfg.manifold_spec.empty())) {
    return cfg;
  }

  if (cfg.target_spec.empty()) {
    if (cfg.manifold_spec.empty()) throw UsageError("--target (or --manifold for the uniform target) is required");
    cfg.target_spec = "uniform:" + cfg.manifold_spec;
  }
  auto target = std::make_shared<Target>(parse_target(cfg.target_spec));
  if (cfg.manifold_spec.empty()) {
    cfg.manifold_spec = target->manifold->spec();
  } else if (parse_manifold(cfg.manifold_spec)->spec() != target->manifold->spec()) {
    throw UsageError("--manifold " + cfg.manifold_spec + " does not match the target's manifold " +
                     target->manifold->spec());
  }
  cfg.target = target;
  if (cfg.x0 && cfg.x0->size() != target->manifold->ambient_dim()) {
    throw DimensionMismatch("--x0 has " + std::to_string(cfg.x0->size()) + " coordinates, " + target->manifold->spec() +
                            " expects " + std::to_string(target->manifold->ambient_dim()));
  }

  const bool m_given = !m_text.empty();
  const bool w_given = !w_text.empty();
  if (m_given) cfg.m = detail::parse_cap(m_text);
  if (w_given) {
    cfg.w = text::parse_real(w_text, "--w");
    if (!(cfg.w > 0.0) || !std::isfinite(cfg.w)) throw UsageError("--w must be positive and finite");
  }
  if (!m_given || !w_given) {
    double delta = target->delta.value_or(0.0);
    if (!target->delta) {
      Rng rng(derive_seed(cfg.seed, 0xDE));
      delta = estimate_delta(*target, 256, 8, rng).value;
    }
    if (!m_given && !w_given) {
      const HyperOpt opt = optimal_hyperparameters(target->diam_w, delta, target->lambda);
      cfg.m = opt.m;
      cfg.w = opt.w ? *opt.w : (delta == 0.0 ? target->lambda.value_or(target->diam_w) : 10.0 * target->diam_w);
    } else if (!w_given) {
      cfg.w = cfg.m ? optimal_width(*cfg.m, target->diam_w, delta) : target->diam_w;
    }
    cfg.hyper_source = m_given || w_given ? "partly default" : "default (optimal q)";
  } else {
    cfg.hyper_source = "given";
  }
  if (!cfg.m && !target->lambda_finite()) {
    throw UsageError("--m inf is not allowed for target '" + target->spec +
                     "': m = inf requires lambda = sup diam W(x,v) < inf, but geodesic level sets of this target are "
                     "unbounded (lambda = inf); choose a finite m");
  }
  return cfg;
}

inline RunConfig parse_config(int argc, const char* const* argv) {
  return parse_config(std::vector<std::string>(argv, argv + argc));
}

namespace detail {

inline std::string header_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# geoslice " << GEOSLICE_VERSION << '\n';
  out << "# command: " << cfg.command_line << '\n';
  out << "# seed: " << cfg.seed << '\n';
  out << "# config: " << cfg.to_json().dump() << '\n';
  return out.str();
}

inline nlohmann::ordered_json header_json(const RunConfig& cfg) {
  nlohmann::ordered_json h;
  h["tool"] = "geoslice";
  h["version"] = GEOSLICE_VERSION;
  h["command"] = cfg.command_line;
  h["seed"] = cfg.seed;
  h["config"] = cfg.to_json();
  return h;
}

inline GssConfig gss_config(const RunConfig& cfg) {
  GssConfig g;
  g.target = cfg.target;
  g.step_out = StepOutParams{cfg.w, cfg.m};
  g.seed = cfg.seed;
  return g;
}

inline Point start_point(const RunConfig& cfg) {
  const Target& t = *cfg.target;
  if (cfg.x0) {
    Point x = t.manifold->make_point(*cfg.x0);
    if (!(t.density(x) > 0.0)) throw InvalidArgument("--x0 lies outside the support of the target (p(x0) = 0)");
    return x;
  }
  return worst_start(t);
}

// Writes to --out when set, else to `fallback`.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error("cannot open output file '" + path + "'");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }
  void finish(const std::string& path) {
    stream_->flush();
    if (!*stream_) throw Error("write to '" + (path.empty() ? std::string("stdout") : path) + "' failed");
  }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

inline MonteCarloEpsilonOptions mc_options(const RunConfig& cfg) {
  MonteCarloEpsilonOptions mc;
  mc.seed = derive_seed(cfg.seed, 0xB0);
  mc.threads = cfg.threads;
  return mc;
}

}  // namespace detail

inline int run_sample(const RunConfig& cfg, std::ostream& out) {
  const GssConfig g = detail::gss_config(cfg);
  detail::Output o(cfg.out, out);
  JsonlSink sink(o.get(), detail::header_json(cfg));
  run_chain(detail::start_point(cfg), cfg.n, g, cfg.burn_in, cfg.thin, std::ref(sink), false);
  o.finish(cfg.out);
  return kOk;
}

inline int run_bounds(const RunConfig& cfg, std::ostream& out) {
  const BoundsReport r =
      full_report(*cfg.target, cfg.m, cfg.w, parse_epsilon_mode(cfg.epsilon_mode), detail::mc_options(cfg));
  detail::Output o(cfg.out, out);
  o.get() << detail::header_text(cfg) << r.to_text() << "# record: " << r.to_json().dump() << '\n';
  o.finish(cfg.out);
  if (!cfg.out.empty()) out << r.to_text();
  return kOk;
}

inline int run_verify(const RunConfig& cfg, std::ostream& out) {
  VerifyOptions vo;
  vo.epsilon_mode = parse_epsilon_mode(cfg.epsilon_mode);
  vo.threads = cfg.threads;
  vo.bins = cfg.bins;
  const TvCurve curve =
      verify_uniform_ergodicity(*cfg.target, detail::gss_config(cfg), detail::start_point(cfg), cfg.n_list,
                                cfg.replicates, vo);
  std::ostringstream summary;
  summary << "verdict = " << curve.verdict << '\n';
  summary << "rho = " << text::fixed_digits(curve.bounds.rho, 12) << " [" << curve.bounds.epsilon_provenance
          << " epsilon" << (curve.bounds.certified ? "" : ", not certified") << "]\n";
  summary << "binning = " << curve.binning << '\n';
  for (const auto& p : curve.points) {
    summary << "n = " << p.n << ": tv = " << text::fixed_digits(p.tv, 6) << " (se " << text::fixed_digits(p.se, 3)
            << ", bias " << text::fixed_digits(p.bias, 3) << ") envelope = " << text::fixed_digits(p.envelope, 6)
            << (p.pass ? " ok" : " VIOLATED") << '\n';
  }
  if (cfg.out.empty()) {
    out << detail::header_text(cfg) << summary.str() << curve.to_csv();
  } else {
    detail::Output o(cfg.out, out);
    o.get() << detail::header_text(cfg) << curve.to_csv();
    o.finish(cfg.out);
    out << summary.str();
    if (cfg.gnuplot) {
      std::ofstream gp(cfg.out + ".gp", std::ios::binary);
      gp << "# geoslice " << GEOSLICE_VERSION << "\n# command: " << cfg.command_line << "\n# seed: " << cfg.seed
         << "\nset datafile separator ','\nset logscale y\nset key top right\nset xlabel 'n'\nset ylabel 'total "
            "variation'\nplot '"
         << cfg.out << "' every ::1 using 1:2:3 with yerrorbars title 'estimate', '' every ::1 using 1:4 with "
         << "linespoints title 'rho^n'\n";
      if (!gp) throw Error("cannot write gnuplot script '" + cfg.out + ".gp'");
    }
  }
  if (curve.verdict == "ADVISORY") out << "# advisory: the rate rests on a Monte-Carlo epsilon and is not certified\n";
  return curve.verdict == "FAIL" ? kStatFail : kOk;
}

inline int run_invariance(const RunConfig& cfg, std::ostream& out) {
  const InvarianceReport r = invariance_test(*cfg.target, detail::gss_config(cfg), cfg.samples, cfg.threads);
  detail::Output o(cfg.out, out);
  o.get() << detail::header_text(cfg) << "verdict = " << (r.pass ? "PASS" : "FAIL") << '\n'
          << "samples = " << r.samples << '\n'
          << "energy_statistic = " << text::fixed_digits(r.test.statistic, 8) << '\n'
          << "null_mean = " << text::fixed_digits(r.test.null_mean, 8) << '\n'
          << "p_value = " << text::fixed_digits(r.test.p_value, 6) << '\n'
          << "p_rank = " << text::fixed_digits(r.test.p_rank, 6) << '\n'
          << "permutations = " << r.test.permutations << '\n';
  o.finish(cfg.out);
  if (!cfg.out.empty()) out << "verdict = " << (r.pass ? "PASS" : "FAIL") << '\n';
  return r.pass ? kOk : kStatFail;
}

inline int run_lemmas(const RunConfig& cfg, std::ostream& out) {
  LemmaOptions lo;
  lo.scale = cfg.lemma_scale;
  lo.threads = cfg.threads;
  const LemmaReport r = lemma_suite(cfg.seed, lo);
  detail::Output o(cfg.out, out);
  o.get() << detail::header_text(cfg) << r.to_text() << "# record: " << r.to_json().dump() << '\n';
  o.finish(cfg.out);
  if (!cfg.out.empty()) out << (r.all_pass() ? "all lemmas PASS\n" : "lemma suite FAIL\n");
  return r.all_pass() ? kOk : kStatFail;
}

inline int run_hyperopt(const RunConfig& cfg, std::ostream& out) {
  std::vector<Target> targets;
  if (cfg.target) {
    targets.push_back(*cfg.target);
  } else {
    for (const char* spec : {"uniform:sphere:1", "uniform:sphere:2", "cap:sphere:2:colat=pi/2",
                             "cap:sphere:2:colat=3pi/4", "vmf:sphere:2:kappa=2", "convex-uniform:ball:2:r=1",
                             "convex-uniform:box:2:e=1,3", "ball-gauss:2:sigma=0.5:r=1", "intervals:-1,0.3,0.5,1"}) {
      targets.push_back(parse_target(spec));
    }
  }
  detail::Output o(cfg.out, out);
  o.get() << detail::header_text(cfg) << "target,diam_W,delta,lambda,regime,m,w,q,note\n";
  for (const auto& t : targets) {
    double delta = t.delta.value_or(0.0);
    std::string note;
    if (!t.delta) {
      Rng rng(derive_seed(cfg.seed, 0xDE));
      delta = estimate_delta(t, 256, 8, rng).value;
      note = "delta estimated";
    }
    const HyperOpt h = optimal_hyperparameters(t.diam_w, delta, t.lambda);
    for (const auto& tie : h.ties) note += (note.empty() ? "" : "; ") + tie;
    o.get() << detail::csv_field(t.spec) << ',' << text::fixed_digits(t.diam_w, 10) << ',' << text::fixed_digits(delta, 10) << ','
            << (t.lambda ? text::fixed_digits(*t.lambda, 10) : "inf") << ',' << h.regime << ',' << cap_text(h.m) << ','
            << h.w_text << ',' << text::fixed_digits(h.q, 10) << ',' << detail::csv_field(note) << '\n';
  }
  o.finish(cfg.out);
  return kOk;
}

inline int dispatch(const RunConfig& cfg, std::ostream& out) {
  if (cfg.command == "sample") return run_sample(cfg, out);
  if (cfg.command == "bounds") return run_bounds(cfg, out);
  if (cfg.command == "verify") return run_verify(cfg, out);
  if (cfg.command == "invariance") return run_invariance(cfg, out);
  if (cfg.command == "lemmas") return run_lemmas(cfg, out);
  if (cfg.command == "hyperopt") return run_hyperopt(cfg, out);
  throw UsageError("unknown command '" + cfg.command + "'");
}

/// Full entry point with exit-code mapping: 0 success, 1 statistical failure,
/// 2 usage error, 3 runtime error.
inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = parse_config(argv);
  } catch (const Error& e) {
    err << "geoslice: " << e.what() << '\n';
    return kUsage;
  }
  try {
    return dispatch(cfg, out);
  } catch (const InvalidArgument& e) {
    err << "geoslice: " << e.what() << '\n';
    return kUsage;
  } catch (const BoundInapplicable& e) {
    // Hyperparameters outside the bound's hypotheses are a usage problem.
    err << "geoslice: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "geoslice: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace geoslice::cli
