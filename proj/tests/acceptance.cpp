// Acceptance suite: one line per criterion, nonzero exit iff any fails.
// Every tolerance is pinned here, in code; the Monte Carlo checks run on
// fixed seeds and are deterministic on a given platform.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rcf/experiments.hpp"
#include "rcf/stats.hpp"
#include "rcf/verify.hpp"

using namespace rcf;

namespace {

struct Criterion {
  int id;
  std::string name;
  bool pass;
  std::string detail;
  double seconds;
};

std::vector<Criterion> g_results;

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

void record(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  g_results.push_back({id, name, pass, detail, seconds});
  std::printf("[%s] criterion %2d %-22s %s (%.1f s)\n", pass ? "PASS" : "FAIL", id,
              name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---- 1: normalization ------------------------------------------------------

void criterion_normalization() {
  Timer t;
  double worst = 0;
  bool pass = true;
  for (const std::string& p : preset_names()) {
    AlphaFamily fam = preset_family(p);
    // the doubly exponential digits leave the double range beyond level 9;
    // its pipeline is checked on the representable window
    long long n_cap = (p == "doubly-exponential") ? 6 : 30;
    int k_cap_base = 8;
    TransferEngine eng(fam, EngineConfig{3, 64, 1e-8, 64, 24});
    for (long long n = 0; n <= n_cap; ++n) {
      int k_cap = (p == "doubly-exponential") ? std::min<int>(8, static_cast<int>(7 - n))
                                              : k_cap_base;
      if (k_cap < 1) break;
      CylinderGrid num = hadamard(eng.ones(n), eng.normalizer(n).grid);
      for (int k = 1; k <= k_cap; ++k) {
        num = eng.apply(num);
        num.normalize();
        CylinderGrid r = TransferEngine::ratio_divide(num, eng.normalizer(n + k).grid);
        double s = std::exp(r.log_scale());
        for (std::size_t i = 0; i < r.size(); ++i)
          worst = std::max(worst, std::abs(r[i] * s - 1.0));
      }
    }
  }
  pass = worst <= 1e-11 && t.seconds() < 10.0;
  record(1, "normalization", pass,
         fmt("max |P(1)-1| = %.2e (<= 1e-11), presets at depth 3 width 64", worst),
         t.seconds());
}

// ---- 2: contraction --------------------------------------------------------

void criterion_contraction() {
  Timer t;
  TransferEngine eng(AlphaFamily::geometric(4, 2), EngineConfig{3, 64, 1e-8, 64, 24});
  auto cf = contraction_fit(eng, 0, 6);
  bool monotone = true;
  for (const auto& ds : cf.lipschitz)
    for (std::size_t k = 1; k < ds.size(); ++k)
      if (ds[k] > ds[k - 1] * (1 + 1e-9) + 1e-15) monotone = false;
  bool pass = cf.fitted_s < 0.5 && cf.max_step_ratio < 0.5 && monotone;
  record(2, "contraction", pass,
         fmt("fitted s = %.2e, max step ratio = %.2e (< 0.5), decay monotone over k=1..6",
             cf.fitted_s, cf.max_step_ratio),
         t.seconds());
}

// ---- 3: duality ------------------------------------------------------------

void criterion_duality() {
  Timer t;
  TransferEngine eng(AlphaFamily::geometric(4, 2), EngineConfig{3, 64, 1e-8, 64, 24});
  double worst = 0;
  for (int k = 1; k <= 4; ++k) {
    auto du = duality_check(eng, 1, k, 1e-8);
    worst = std::max(worst, du.max_marginal_gap);
  }
  record(3, "duality", worst <= 2e-8,
         fmt("max |int P^k g - int g| = %.2e (<= 2e-8) for value/log/indicator, k <= 4", worst),
         t.seconds());
}

// ---- 4: martingale identity -------------------------------------------------

void criterion_martingale() {
  Timer t;
  auto fam = AlphaFamily::geometric(4, 2);
  auto ms = martingale_check(fam, 15, EngineConfig{4, 24, 1e-8, 64, 24}, 1e-8, 2000);
  bool envelope = true;
  for (double tol : {1e-6, 1e-7}) {
    auto m2 = martingale_check(fam, 6, EngineConfig{4, 16, 1e-8, 64, 24}, tol, 100);
    envelope = envelope && m2.max_residual <= tol;
  }
  bool pass = ms.max_residual <= 1e-8 && envelope;
  record(4, "martingale", pass,
         fmt("max ||P^1 u_n|| = %.2e (<= 1e-8) for n <= 15; residual under the tol envelope",
             ms.max_residual),
         t.seconds());
}

// ---- 5: moments -------------------------------------------------------------

void criterion_moments() {
  Timer t;
  auto fam = AlphaFamily::geometric(4, 2);
  TransferEngine eng(fam, EngineConfig{3, 64, 1e-8, 64, 24});
  double d1 = 0, d2 = 0, d4 = 0;
  double prev1 = 1e18, prev2 = 1e18, prev4 = 1e18;
  bool monotone = true, sandwich = true;
  MomentSummary at30;
  for (long long n : {10LL, 20LL, 30LL}) {
    auto ms = moment_check(eng, n);
    if (!ms.gate_ok) { monotone = false; break; }
    d1 = std::abs(ms.m1 - 1.0);
    d2 = std::abs(ms.m2c - 1.0);
    d4 = std::abs(ms.m4c - 9.0);
    if (d1 > prev1 || d2 > prev2 + 1e-12 || d4 > prev4 + 1e-12) monotone = false;
    sandwich = sandwich && ms.p1log_min >= ms.sandwich_lo && ms.p1log_max <= ms.sandwich_hi;
    prev1 = d1; prev2 = d2; prev4 = d4;
    if (n == 30) at30 = ms;
  }
  // validate once against a doubled-resolution run
  TransferEngine wide(fam, EngineConfig{3, 128, 1e-8, 64, 24});
  auto msw = moment_check(wide, 30);
  bool stable = std::abs(msw.m1 - at30.m1) <= 0.002 && std::abs(msw.m2c - at30.m2c) <= 0.01 &&
                std::abs(msw.m4c - at30.m4c) <= 0.1;
  bool pass = d1 <= 0.01 && d2 <= 0.05 && d4 <= 0.5 && monotone && sandwich && stable &&
              t.seconds() < 60.0;
  record(5, "moments", pass,
         fmt("n=30: |m1-1|=%.1e |m2c-1|=%.1e |m4c-9|=%.1e; monotone over {10,20,30}; "
             "doubled-width drift %.1e",
             d1, d2, d4, std::abs(msw.m1 - at30.m1)),
         t.seconds());
}

// ---- 6: Exp(1) digit law ------------------------------------------------------

void criterion_digit_law() {
  Timer t;
  auto fam = AlphaFamily::explicit_digits({1000000, 1000000});
  SamplerContext ctx(fam, 1);
  const auto& tb = ctx.table(0);
  CounterRng rng(20260809, 6);
  std::vector<double> xs;
  xs.reserve(100000);
  for (int i = 0; i < 100000; ++i)
    xs.push_back(tb.lp.gamma * (ctx.product_digit(0, rng).log_digit - tb.lp.log_alpha));
  auto rep = distribution_tests(std::move(xs), KsTarget::exp1);
  bool pass = rep.ks_stat <= 0.01 && t.seconds() < 5.0;
  record(6, "digit law Exp(1)", pass,
         fmt("KS(gamma log(x/alpha), Exp(1)) = %.4f (<= 0.01) at alpha=1e6, 1e5 draws",
             rep.ks_stat),
         t.seconds());
}

// ---- 7: law of large numbers ---------------------------------------------------

void criterion_lln() {
  Timer t;
  auto fam = AlphaFamily::polynomial(1, 1.5, 2);
  SamplerContext ctx(fam, 100000);
  const int seeds = 100;
  const std::size_t n = 100000;
  std::vector<double> gaps(seeds);
  parallel_for(seeds, 0, [&](std::size_t i) {
    double acc = 0;
    stream_trajectory(ctx, n, 700 + i, [&](std::size_t k, const DigitSample& d) {
      const auto& tb = ctx.table(k);
      acc += tb.lp.gamma * (d.log_digit - tb.lp.log_alpha);
    });
    gaps[i] = std::abs(acc / static_cast<double>(n) - 1.0);
  });
  double mean = 0;
  for (double g : gaps) mean += g;
  mean /= seeds;
  bool pass = mean <= 0.02 && t.seconds() < 120.0;
  record(7, "law of large numbers", pass,
         fmt("mean |S_n/n - 1| = %.4f (<= 0.02), 100 seeds, n=1e5, polynomial preset", mean),
         t.seconds());
}

// ---- 8: CLT surrogate + iterated-logarithm band ----------------------------------

void criterion_clt_band() {
  Timer t;
  auto fam = AlphaFamily::polynomial(1, 1.5, 2);
  {
    SamplerContext ctx(fam, 100000);
    const int seeds = 2000;
    std::vector<double> zs(seeds);
    parallel_for(seeds, 0, [&](std::size_t i) {
      LilStream ls(1000);
      stream_trajectory(ctx, 100000, 20000 + i,
                        [&](std::size_t k, const DigitSample& d) { ls.push(ctx.table(k), d); });
      zs[i] = ls.S() / std::sqrt(100000.0);
    });
    auto ks = distribution_tests(zs, KsTarget::std_normal);
    // the paper's limsup = 1 is not reachable at desk scale (loglog 1e6 ~ 3.2);
    // the band below is the honest surrogate
    SamplerContext ctx6(fam, 1000000);
    const int band_seeds = 300;
    std::vector<int> inband(band_seeds);
    parallel_for(band_seeds, 0, [&](std::size_t i) {
      LilStream ls(1000);
      stream_trajectory(ctx6, 1000000, 90000 + i,
                        [&](std::size_t k, const DigitSample& d) { ls.push(ctx6.table(k), d); });
      inband[i] = (ls.band_max() >= 0.3 && ls.band_max() <= 1.7) ? 1 : 0;
    });
    int good = 0;
    for (int b : inband) good += b;
    double frac = static_cast<double>(good) / band_seeds;
    bool pass = ks.p_value >= 0.01 && frac >= 0.95;
    record(8, "CLT + LIL band", pass,
           fmt("KS p = %.3f (>= 0.01, 2000 seeds, n=1e5); band hit %.1f%% (>= 95%%, 300 seeds, "
               "n in [1e3,1e6])",
               ks.p_value, 100.0 * frac),
           t.seconds());
  }
}

// ---- 9: convergent-denominator identity ----------------------------------------

void criterion_q_identity() {
  Timer t;
  const double bound = 4.0 + 2.0 * std::log(2.0);
  double worst = 0;
  for (const std::string& p : preset_names()) {
    AlphaFamily fam = preset_family(p);
    std::size_t len = (p == "doubly-exponential") ? 2000 : 10000;
    SamplerContext ctx(fam, len + 64);
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      auto traj = sample_trajectory(ctx, len + 64, 4200 + seed);
      auto gaps = q_identity_gaps(traj, len);
      for (double g : gaps) worst = std::max(worst, g);
    }
  }
  record(9, "q identity", worst <= bound,
         fmt("max |sum log S^k + log q_n| = %.3f (<= %.3f) over 120 trajectories, all n", worst,
             bound),
         t.seconds());
}

// ---- 10: local dimension --------------------------------------------------------

void criterion_local_dimension() {
  Timer t;
  auto fam = AlphaFamily::polynomial(1, 1.5, 2);
  SamplerContext ctx(fam, 100000 + 64);
  const int seeds = 200;
  std::vector<double> e3(seeds), e4(seeds), e5(seeds);
  parallel_for(seeds, 0, [&](std::size_t i) {
    auto traj = sample_trajectory(ctx, 100000 + 64, 31000 + i);
    e3[i] = local_dimension(ctx, traj, 1000, 0.5).estimate;
    e4[i] = local_dimension(ctx, traj, 10000, 0.5).estimate;
    e5[i] = local_dimension(ctx, traj, 100000, 0.5).estimate;
  });
  double m3 = 0, m4 = 0, m5 = 0;
  for (int i = 0; i < seeds; ++i) { m3 += e3[i]; m4 += e4[i]; m5 += e5[i]; }
  m3 /= seeds; m4 /= seeds; m5 /= seeds;
  bool bracket = m4 >= 0.48 && m4 <= 0.56;
  bool decreasing = std::abs(m3 - 0.5) > std::abs(m4 - 0.5) && std::abs(m4 - 0.5) > std::abs(m5 - 0.5);
  bool pass = bracket && decreasing;
  record(10, "local dimension", pass,
         fmt("mean estimate = %.4f at n=1e4 (bracket [0.48,0.56]: %s); distances to 1/2: "
             "%.4f > %.4f > %.4f (decreasing: %s)",
             m4, bracket ? "yes" : "NO", std::abs(m3 - 0.5), std::abs(m4 - 0.5),
             std::abs(m5 - 0.5), decreasing ? "yes" : "no"),
         t.seconds());
  if (!bracket)
    std::printf("       note: the raw mass/diameter ratio sits near (1+gamma_bar)/2; with\n"
                "       gamma ~ 0.13..0.19 at these digit scales the n=1e4 mean cannot enter\n"
                "       [0.48,0.56]; the decreasing-distance clause is the attainable part\n");
}

// ---- 11: growth condition --------------------------------------------------------

void criterion_growth_condition() {
  Timer t;
  auto poly = growth_condition(AlphaFamily::polynomial(1, 1.5, 2), 0.5, 400);
  auto geo = growth_condition(AlphaFamily::geometric(4, 2), 0.1, 400);
  auto dexp = growth_condition(AlphaFamily::doubly_exponential(2, 2), 0.1, 40);
  bool pass = poly.satisfied && geo.satisfied && !dexp.satisfied;
  record(11, "growth condition", pass,
         fmt("polynomial(delta=0.5): %s, geometric(delta=0.1): %s, doubly-exp: %s",
             poly.satisfied ? "satisfied" : "NO", geo.satisfied ? "satisfied" : "NO",
             dexp.satisfied ? "VIOLATED?!" : "violated as expected"),
         t.seconds());
}

// ---- 12: reproducibility ----------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void criterion_reproducibility() {
  Timer t;
  namespace fs = std::filesystem;
  RunConfig cfg;
  cfg.family = preset_family("polynomial");
  cfg.experiment = "lil";
  cfg.n = 2000;
  cfg.seed_lo = 1;
  cfg.seed_hi = 16;
  std::string base = (fs::temp_directory_path() / "rcf_acceptance").string();
  std::ostringstream sink;
  cfg.out_dir = base + "_a";
  fs::remove_all(cfg.out_dir);
  run_experiment(cfg, sink);
  cfg.out_dir = base + "_b";
  cfg.threads = 3;
  fs::remove_all(cfg.out_dir);
  run_experiment(cfg, sink);
  bool same = slurp(base + "_a/lil_stats.csv") == slurp(base + "_b/lil_stats.csv") &&
              !slurp(base + "_a/lil_stats.csv").empty();
  record(12, "reproducibility", same,
         "identical config => byte-identical CSV, independent of thread count", t.seconds());
}

}  // namespace

int main() {
  std::printf("acceptance suite: restricted continued fraction engine\n");
  std::printf("------------------------------------------------------\n");
  criterion_normalization();
  criterion_contraction();
  criterion_duality();
  criterion_martingale();
  criterion_moments();
  criterion_digit_law();
  criterion_lln();
  criterion_clt_band();
  criterion_q_identity();
  criterion_local_dimension();
  criterion_growth_condition();
  criterion_reproducibility();
  int failed = 0;
  for (const auto& c : g_results)
    if (!c.pass) ++failed;
  std::printf("------------------------------------------------------\n");
  std::printf("%zu criteria, %d failed\n", g_results.size(), failed);
  return failed;
}
