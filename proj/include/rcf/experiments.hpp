#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rcf/sampler.hpp"
#include "rcf/stats.hpp"
#include "rcf/verify.hpp"

namespace rcf {

using nlohmann::json;

struct GridOptions {
  int depth = 3;
  int width = 64;
  double tol = 1e-8;
};

struct RunConfig {
  AlphaFamily family = AlphaFamily::geometric(4, 2);
  GridOptions grid;
  std::string experiment = "all";
  long long n = 10000;        // trajectory length / deepest level
  long long n_max = 15;       // martingale levels
  std::uint64_t seed_lo = 1;
  std::uint64_t seed_hi = 100;
  std::string out_dir = "out";
  std::string mode = "product";
  int K = 3;
  double delta = 0.5;
  int threads = 0;  // 0: all cores (capped by CF_RESTRICTED_THREADS)
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- configuration ---------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  auto e = s.find_last_not_of(" \t\r\n");
  return (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
}

inline double to_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("invalid numeric value for '" + key + "': " + v);
  return x;
}

inline long long to_int(const std::string& key, const std::string& v) {
  double x = to_real(key, v);
  if (x != std::floor(x)) throw ConfigError("expected an integer for '" + key + "': " + v);
  return static_cast<long long>(x);
}

}  // namespace detail

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"polynomial", "geometric",
                                                 "doubly-exponential"};
  return names;
}

inline AlphaFamily preset_family(const std::string& name) {
  if (name == "polynomial") return AlphaFamily::polynomial(1, 1.5, 2);
  if (name == "geometric") return AlphaFamily::geometric(4, 2);
  if (name == "doubly-exponential") return AlphaFamily::doubly_exponential(2, 2);
  throw ConfigError("unknown preset '" + name + "'");
}

inline std::string list_presets() {
  std::ostringstream os;
  os << "polynomial           alpha_n = ceil(n^1.5)+2   sum 1/alpha_n < inf; "
        "growth condition satisfied (delta = 0.5); dimension 1/2\n"
     << "geometric            alpha_n = 4*2^n            sum 1/alpha_n <= 1/2; "
        "growth condition satisfied (delta = 0.1); dimension 1/2\n"
     << "doubly-exponential   alpha_n = 2^(2^n)          negative control: "
        "dimension < 1/2, condition fails\n";
  return os.str();
}

inline void validate(const RunConfig& cfg);

// assemble a family from the collected family.* keys
inline AlphaFamily family_from_parts(const std::map<std::string, std::string>& parts) {
  using detail::to_int;
  using detail::to_real;
  auto it = parts.find("family.kind");
  if (it == parts.end()) throw ConfigError("family.* keys given without family.kind");
  const std::string& kind = it->second;
  auto num = [&](const char* k, double dflt) {
    auto p = parts.find(k);
    return (p != parts.end()) ? to_real(k, p->second) : dflt;
  };
  long long off = parts.count("family.offset")
                      ? to_int("family.offset", parts.at("family.offset"))
                      : 0;
  if (kind == "polynomial")
    return AlphaFamily::polynomial(num("family.c", 1), num("family.p", 1.5), off);
  if (kind == "geometric")
    return AlphaFamily::geometric(num("family.c", 4), num("family.lambda", 2), off);
  if (kind == "doubly_exponential")
    return AlphaFamily::doubly_exponential(num("family.c", 2), num("family.b", 2), off);
  if (kind == "explicit") {
    std::vector<long long> ds;
    std::stringstream ss(parts.count("family.digits") ? parts.at("family.digits") : "");
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!detail::trim(tok).empty()) ds.push_back(to_int("family.digits", detail::trim(tok)));
    return AlphaFamily::explicit_digits(ds, off);
  }
  throw ConfigError("unknown family.kind '" + kind + "'");
}

// Flat key = value document; '#' starts a comment; unknown keys are rejected.
// family.* keys are collected by the caller and assembled together.
inline void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::to_int;
  using detail::to_real;
  if (key == "preset") { cfg.family = preset_family(value); return; }
  if (key == "grid.depth") { cfg.grid.depth = static_cast<int>(to_int(key, value)); return; }
  if (key == "grid.width") { cfg.grid.width = static_cast<int>(to_int(key, value)); return; }
  if (key == "grid.tol") { cfg.grid.tol = to_real(key, value); return; }
  if (key == "experiment") { cfg.experiment = value; return; }
  if (key == "n") { cfg.n = to_int(key, value); return; }
  if (key == "n_max") { cfg.n_max = to_int(key, value); return; }
  if (key == "seeds") {
    auto pos = value.find("..");
    if (pos == std::string::npos) throw ConfigError("seeds expects A..B, got '" + value + "'");
    cfg.seed_lo = static_cast<std::uint64_t>(to_int(key, value.substr(0, pos)));
    cfg.seed_hi = static_cast<std::uint64_t>(to_int(key, value.substr(pos + 2)));
    if (cfg.seed_hi < cfg.seed_lo) throw ConfigError("empty seed range '" + value + "'");
    return;
  }
  if (key == "out") { cfg.out_dir = value; return; }
  if (key == "mode") {
    if (value != "product" && value != "operator")
      throw ConfigError("mode must be 'product' or 'operator', got '" + value + "'");
    cfg.mode = value;
    return;
  }
  if (key == "K") { cfg.K = static_cast<int>(to_int(key, value)); return; }
  if (key == "delta") { cfg.delta = to_real(key, value); return; }
  if (key == "threads") { cfg.threads = static_cast<int>(to_int(key, value)); return; }
  throw ConfigError("unknown configuration key '" + key + "'");
}

inline RunConfig parse_config(std::istream& is, RunConfig cfg = {}) {
  std::string line;
  int lineno = 0;
  std::map<std::string, std::string> family_parts;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.rfind("family.", 0) == 0) {
      static const char* allowed[] = {"family.kind", "family.c",      "family.p",
                                      "family.lambda", "family.b",    "family.offset",
                                      "family.digits"};
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) throw ConfigError("unknown configuration key '" + key + "'");
      family_parts[key] = value;
      continue;
    }
    apply_config_line(cfg, key, value);
  }
  if (!family_parts.empty()) cfg.family = family_from_parts(family_parts);
  validate(cfg);
  return cfg;
}

inline RunConfig parse_config_file(const std::string& path, RunConfig cfg = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(f, std::move(cfg));
}

inline void validate(const RunConfig& cfg) {
  if (cfg.n <= 0 || cfg.n_max <= 0) throw ConfigError("n and n_max must be positive");
  if (cfg.grid.depth < 1 || cfg.grid.width < 1 || !(cfg.grid.tol > 0))
    throw ConfigError("grid parameters must be positive");
  if (cfg.seed_hi < cfg.seed_lo) throw ConfigError("empty seed range");
  if (!(cfg.delta > 0)) throw ConfigError("delta must be positive");
  if (cfg.K < 0) throw ConfigError("K must be non-negative");
}

// ---- worker pool -----------------------------------------------------------

inline int effective_threads(int requested) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  int n = (requested > 0) ? requested : hw;
  if (const char* cap = std::getenv("CF_RESTRICTED_THREADS")) {
    int c = std::atoi(cap);
    if (c > 0) n = std::min(n, c);
  }
  return std::max(1, n);
}

// run fn(i) for i in [0, count) on a bounded pool; results land in
// caller-owned slots so output order stays deterministic
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  int nt = std::min<std::size_t>(static_cast<std::size_t>(effective_threads(threads)), count);
  if (nt <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

// ---- experiment outputs ------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

inline std::string config_header(const RunConfig& cfg) {
  std::ostringstream os;
  os << "# family=" << cfg.family.describe() << " experiment=" << cfg.experiment
     << " n=" << cfg.n << " seeds=" << cfg.seed_lo << ".." << cfg.seed_hi
     << " mode=" << cfg.mode << " grid=" << cfg.grid.depth << "x" << cfg.grid.width
     << " tol=" << cfg.grid.tol << " delta=" << cfg.delta << "\n";
  return os.str();
}

inline json report_json(const VerificationReport& r) {
  return json{{"name", r.name},       {"computed", r.computed},
              {"bound", r.bound},     {"tolerance", r.tolerance},
              {"pass", r.pass},       {"inconclusive", r.inconclusive},
              {"config", r.config}};
}

}  // namespace detail

struct ExperimentResult {
  bool pass = true;
  json summary;
  std::vector<std::string> files;
};

inline ExperimentResult run_simulate(const RunConfig& cfg) {
  ExperimentResult res;
  SamplerContext ctx(cfg.family, static_cast<std::size_t>(cfg.n));
  std::filesystem::create_directories(cfg.out_dir);
  std::size_t count = static_cast<std::size_t>(cfg.seed_hi - cfg.seed_lo + 1);
  std::vector<std::string> bodies(count);
  parallel_for(count, cfg.threads, [&](std::size_t i) {
    std::uint64_t seed = cfg.seed_lo + i;
    DigitTrajectory traj =
        (cfg.mode == "operator")
            ? sample_trajectory_operator(cfg.family, static_cast<std::size_t>(cfg.n), seed,
                                         OperatorModeConfig{cfg.K, 64, 2, 16})
            : sample_trajectory(ctx, static_cast<std::size_t>(cfg.n), seed);
    std::ostringstream os;
    dump_trajectory(os, traj);
    bodies[i] = os.str();
  });
  for (std::size_t i = 0; i < count; ++i) {
    std::string path = cfg.out_dir + "/trajectory_" + std::to_string(cfg.seed_lo + i) + ".csv";
    detail::write_text(path, bodies[i]);
    res.files.push_back(path);
  }
  res.summary = json{{"experiment", "simulate"},
                     {"trajectories", count},
                     {"n", cfg.n},
                     {"config", detail::config_header(cfg)}};
  return res;
}

inline ExperimentResult run_lil(const RunConfig& cfg) {
  ExperimentResult res;
  std::filesystem::create_directories(cfg.out_dir);
  SamplerContext ctx(cfg.family, static_cast<std::size_t>(cfg.n) + 64);
  std::size_t count = static_cast<std::size_t>(cfg.seed_hi - cfg.seed_lo + 1);
  std::vector<long long> checkpoints;
  for (long long c = 16; c < cfg.n; c *= 10) checkpoints.push_back(c);
  checkpoints.push_back(cfg.n);
  struct Row { std::uint64_t seed; long long n; double S, ratio, logq, ldim; };
  std::vector<std::vector<Row>> rows(count);
  std::vector<double> final_S(count), band_max(count), q_gap(count);
  parallel_for(count, cfg.threads, [&](std::size_t i) {
    std::uint64_t seed = cfg.seed_lo + i;
    auto traj = sample_trajectory(ctx, static_cast<std::size_t>(cfg.n) + 64, seed);
    auto ss = lil_series(ctx, traj);
    auto gaps = q_identity_gaps(traj, static_cast<std::size_t>(cfg.n));
    double gworst = 0;
    for (double g : gaps)
      if (!(g <= gworst)) gworst = g;  // NaN poisons the maximum
    q_gap[i] = gworst;
    for (long long c : checkpoints) {
      Row r;
      r.seed = seed;
      r.n = c;
      r.S = ss.S[static_cast<std::size_t>(c)];
      r.ratio = ss.lil_ratio[static_cast<std::size_t>(c)];
      r.logq = ss.log_q[static_cast<std::size_t>(c)];
      auto ld = local_dimension(ctx, traj, static_cast<std::size_t>(c), cfg.delta);
      r.ldim = ld.estimate;
      rows[i].push_back(r);
    }
    final_S[i] = ss.S[static_cast<std::size_t>(cfg.n)];
    double bm = 0;
    for (std::size_t n = 1000; n <= static_cast<std::size_t>(cfg.n); ++n)
      if (!std::isnan(ss.lil_ratio[n])) bm = std::max(bm, std::abs(ss.lil_ratio[n]));
    band_max[i] = bm;
  });
  std::ostringstream csv;
  csv << detail::config_header(cfg) << "seed,n,S_n,lil_ratio,log_q,local_dim\n";
  for (const auto& rv : rows)
    for (const Row& r : rv)
      csv << r.seed << "," << r.n << "," << detail::fmt(r.S) << "," << detail::fmt(r.ratio)
          << "," << detail::fmt(r.logq) << "," << detail::fmt(r.ldim) << "\n";
  std::string path = cfg.out_dir + "/lil_stats.csv";
  detail::write_text(path, csv.str());
  res.files.push_back(path);

  json summary;
  summary["experiment"] = "lil";
  summary["config"] = detail::config_header(cfg);
  double mean_gap = 0;
  std::vector<double> zs;
  for (std::size_t i = 0; i < count; ++i) {
    mean_gap += std::abs(final_S[i] / static_cast<double>(cfg.n));
    zs.push_back(final_S[i] / std::sqrt(static_cast<double>(cfg.n)));
  }
  mean_gap /= static_cast<double>(count);
  summary["mean_abs_S_over_n"] = mean_gap;
  // 0.02 is the n = 1e5 target; shorter exploratory runs carry CLT noise
  // of order 1/sqrt(n), so the gate keeps a fixed multiple of it
  double lln_gate = std::max(0.02, 3.0 / std::sqrt(static_cast<double>(cfg.n)));
  summary["lln_gate"] = lln_gate;
  summary["lln_pass"] = mean_gap <= lln_gate;
  res.pass = mean_gap <= lln_gate;
  double qworst = 0;
  for (double g : q_gap)
    if (!(g <= qworst)) qworst = g;
  summary["q_identity_max_gap"] = qworst;
  summary["q_identity_bound"] = 4.0 + 2.0 * std::log(2.0);
  bool qpass = qworst <= 4.0 + 2.0 * std::log(2.0);
  summary["q_identity_pass"] = qpass;
  res.pass = res.pass && qpass;
  if (count >= 100) {
    auto ks = distribution_tests(zs, KsTarget::std_normal);
    summary["clt_ks"] = ks.ks_stat;
    summary["clt_p"] = ks.p_value;
    summary["clt_pass"] = ks.p_value >= 0.01;
    res.pass = res.pass && ks.p_value >= 0.01;
    int inband = 0;
    for (double b : band_max)
      if (b >= 0.3 && b <= 1.7) ++inband;
    summary["band_fraction"] = static_cast<double>(inband) / static_cast<double>(count);
  }
  res.summary = summary;
  detail::write_text(cfg.out_dir + "/lil_summary.json", res.summary.dump(2) + "\n");
  res.files.push_back(cfg.out_dir + "/lil_summary.json");
  return res;
}

inline ExperimentResult run_moments(const RunConfig& cfg) {
  ExperimentResult res;
  std::filesystem::create_directories(cfg.out_dir);
  TransferEngine eng(cfg.family, EngineConfig{cfg.grid.depth, cfg.grid.width, cfg.grid.tol, 64, 24});
  json arr = json::array();
  for (long long n : {cfg.n_max / 3, 2 * cfg.n_max / 3, cfg.n_max}) {
    if (n < 1) continue;
    auto ms = moment_check(eng, n, std::min(cfg.grid.tol, 1e-10));
    json j{{"n", n},       {"m1", ms.m1},   {"m2c", ms.m2c},
           {"m4c", ms.m4c}, {"gate_ok", ms.gate_ok}};
    j["reports"] = json::array();
    for (const auto& r : ms.reports) {
      j["reports"].push_back(detail::report_json(r));
      if (!r.inconclusive) res.pass = res.pass && r.pass;
    }
    arr.push_back(j);
  }
  res.summary = json{{"experiment", "moments"},
                     {"config", detail::config_header(cfg)},
                     {"levels", arr}};
  detail::write_text(cfg.out_dir + "/moments.json", res.summary.dump(2) + "\n");
  res.files.push_back(cfg.out_dir + "/moments.json");
  return res;
}

inline ExperimentResult run_dimension(const RunConfig& cfg) {
  ExperimentResult res;
  std::filesystem::create_directories(cfg.out_dir);
  SamplerContext ctx(cfg.family, static_cast<std::size_t>(cfg.n) + 64);
  std::size_t count = static_cast<std::size_t>(cfg.seed_hi - cfg.seed_lo + 1);
  std::vector<double> est(count);
  std::vector<double> theta_rate(count);
  std::vector<int> bc_ok(count);
  parallel_for(count, cfg.threads, [&](std::size_t i) {
    auto traj = sample_trajectory(ctx, static_cast<std::size_t>(cfg.n) + 64, cfg.seed_lo + i);
    auto ld = local_dimension(ctx, traj, static_cast<std::size_t>(cfg.n), cfg.delta);
    est[i] = ld.estimate;
    theta_rate[i] = ld.log_theta / static_cast<double>(cfg.n);
    bc_ok[i] = ld.below_bc_threshold ? 1 : 0;
  });
  std::ostringstream csv;
  csv << detail::config_header(cfg) << "seed,n,local_dim,log_theta_rate,below_bc\n";
  double mean = 0;
  int bc = 0;
  for (std::size_t i = 0; i < count; ++i) {
    csv << (cfg.seed_lo + i) << "," << cfg.n << "," << detail::fmt(est[i]) << ","
        << detail::fmt(theta_rate[i]) << "," << bc_ok[i] << "\n";
    mean += est[i];
    bc += bc_ok[i];
  }
  mean /= static_cast<double>(count);
  std::string path = cfg.out_dir + "/dimension.csv";
  detail::write_text(path, csv.str());
  res.files.push_back(path);
  res.summary = json{{"experiment", "dimension"},
                     {"config", detail::config_header(cfg)},
                     {"n", cfg.n},
                     {"seeds", count},
                     {"mean_estimate", mean},
                     {"below_bc_fraction", static_cast<double>(bc) / static_cast<double>(count)}};
  detail::write_text(cfg.out_dir + "/dimension_summary.json", res.summary.dump(2) + "\n");
  res.files.push_back(cfg.out_dir + "/dimension_summary.json");
  return res;
}

inline ExperimentResult run_reports(const RunConfig& cfg, const std::string& which) {
  ExperimentResult res;
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<VerificationReport> reports;
  if (which == "contraction") {
    TransferEngine eng(cfg.family,
                       EngineConfig{cfg.grid.depth, cfg.grid.width, cfg.grid.tol, 64, 24});
    auto cf = contraction_fit(eng, 0, 6);
    reports = cf.reports;
  } else if (which == "martingale") {
    auto ms = martingale_check(cfg.family, cfg.n_max,
                               EngineConfig{std::max(4, cfg.grid.depth),
                                            std::min(cfg.grid.width, 24), cfg.grid.tol, 64, 24},
                               cfg.grid.tol);
    reports = ms.reports;
  } else if (which == "duality") {
    TransferEngine eng(cfg.family,
                       EngineConfig{cfg.grid.depth, cfg.grid.width, cfg.grid.tol, 64, 24});
    for (int k : {1, 2, 4}) {
      auto du = duality_check(eng, 1, k, cfg.grid.tol);
      reports.insert(reports.end(), du.reports.begin(), du.reports.end());
    }
  } else if (which == "condition") {
    long long N = std::clamp<long long>(cfg.n, 40, 400);
    if (cfg.family.kind == AlphaFamily::Kind::explicit_list)
      N = std::min<long long>(N, static_cast<long long>(cfg.family.digits.size()) - 1);
    auto rep = growth_condition(cfg.family, cfg.delta, N);
    auto sum = summability_report(cfg.family, N);
    reports.push_back(make_report("condition.growth", rep.window_max, 1.0, 0.0, rep.satisfied,
                                  cfg.family.describe()));
    reports.push_back(make_report("condition.summable", sum.partial_sum + sum.tail_bound, 0.0,
                                  0.0, sum.converges, cfg.family.describe()));
  } else {
    throw ConfigError("unknown experiment '" + which + "'");
  }
  json arr = json::array();
  for (const auto& r : reports) {
    arr.push_back(detail::report_json(r));
    if (!r.inconclusive) res.pass = res.pass && r.pass;
  }
  res.summary = json{{"experiment", which},
                     {"config", detail::config_header(cfg)},
                     {"reports", arr}};
  detail::write_text(cfg.out_dir + "/" + which + ".json", res.summary.dump(2) + "\n");
  res.files.push_back(cfg.out_dir + "/" + which + ".json");
  return res;
}

// dispatch; returns process exit status (0 pass, 1 check failed)
inline int run_experiment(const RunConfig& cfg, std::ostream& out) {
  validate(cfg);
  std::vector<std::string> order;
  if (cfg.experiment == "all")
    order = {"condition", "contraction", "duality", "moments", "martingale", "simulate",
             "lil", "dimension"};
  else
    order = {cfg.experiment};
  bool all_pass = true;
  for (const std::string& exp : order) {
    ExperimentResult r;
    if (exp == "simulate") r = run_simulate(cfg);
    else if (exp == "lil") r = run_lil(cfg);
    else if (exp == "moments") r = run_moments(cfg);
    else if (exp == "dimension") r = run_dimension(cfg);
    else r = run_reports(cfg, exp);
    all_pass = all_pass && r.pass;
    out << exp << ": " << (r.pass ? "pass" : "FAIL");
    if (exp == "condition")
      out << " (" << (r.pass ? "satisfied" : "not satisfied") << ")";
    out << "\n";
    for (const auto& f : r.files) out << "  wrote " << f << "\n";
  }
  return all_pass ? 0 : 1;
}

}  // namespace rcf
