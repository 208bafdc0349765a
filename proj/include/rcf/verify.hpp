#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "rcf/sampler.hpp"
#include "rcf/stats.hpp"
#include "rcf/transfer_operator.hpp"

namespace rcf {

struct VerificationReport {
  std::string name;
  double computed = 0;
  double bound = 0;
  double tolerance = 0;
  bool pass = false;
  bool inconclusive = false;
  std::string config;
};

inline VerificationReport make_report(std::string name, double computed, double bound,
                                      double tol, bool pass, std::string config) {
  VerificationReport r;
  r.name = std::move(name);
  r.computed = computed;
  r.bound = bound;
  r.tolerance = tol;
  r.pass = pass;
  r.config = std::move(config);
  return r;
}

// fitted distortion constant: max over levels of oscillation(G_n)/eps_n
inline double fitted_distortion(TransferEngine& eng, long long n_max) {
  double c = 0;
  for (long long n = 1; n <= n_max; ++n) {
    double eps = eng.params(n).epsilon;
    if (eps <= 0) continue;
    c = std::max(c, eng.normalizer(n).oscillation / eps);
  }
  return c;
}

// ---- martingale decomposition -------------------------------------------

struct MartingaleParts {
  long long level = 0;
  CylinderGrid f;  // centered statistic
  CylinderGrid h;
  CylinderGrid u;
  double center = 0;       // subtracted integral
  double residual = 0;     // ||P_n^1 u_n||_inf
  double u_sq_integral = 0;
};

struct MartingaleSummary {
  std::vector<MartingaleParts> parts;
  double max_residual = 0;
  double max_h_norm = 0;
  double sigma_sq = 0;          // sum of int u_k^2 dnu_k
  double s_mc = 0;              // Monte Carlo std of sum f_k o T^k
  double s_mc_stderr = 0;
  std::vector<VerificationReport> reports;
};

// h_{n+1} = P_n^1 f_n + P_n^1 h_n, u_n = f_n + h_n - h_{n+1} o T_n; the
// one-step ratio image of u_n must vanish.  The composition with the shift
// is the grid lift that drops the leading coordinate.
inline MartingaleSummary martingale_check(const AlphaFamily& fam, long long n_max,
                                          EngineConfig cfg, double tol,
                                          int mc_seeds = 10000) {
  TransferEngine eng(fam, cfg);
  MartingaleSummary out;
  std::vector<double> centers;
  CylinderGrid h = eng.ones(0);
  h *= 0.0;  // h_0 = 0
  for (long long n = 0; n <= n_max; ++n) {
    MartingaleParts mp;
    mp.level = n;
    CylinderGrid raw = eng.digit_log_stat(n);
    mp.center = eng.integrate(raw, tol).value;
    centers.push_back(mp.center);
    mp.f = raw;
    mp.f.shift(-mp.center);
    mp.h = h;
    CylinderGrid fh = mp.f;
    fh += mp.h;
    CylinderGrid h_next = eng.ratio_apply(fh, 1);
    CylinderGrid lifted = lift_through_shift(h_next, eng.grid_shape(n), 1);
    mp.u = fh;
    mp.u -= lifted;
    CylinderGrid pu = eng.ratio_apply(mp.u, 1);
    mp.residual = pu.max_abs() * std::exp(pu.log_scale());
    // int u^2: u = poly(log digit) + delta with delta = h - h_{n+1} o T
    // cylinder-constant; squaring slot values would drop the within-bucket
    // variance of the digit logarithm, so expand through the moment builder
    const LevelParams& lp = eng.params(n);
    double g = lp.gamma, b = std::log(lp.gamma) - mp.center;
    CylinderGrid delta = mp.h;
    delta -= lifted;
    CylinderGrid usq = eng.log_poly(n, {b * b, 2 * g * b, g * g});
    CylinderGrid cross = hadamard(mp.f, delta);
    cross *= 2.0;
    usq += cross;
    usq += hadamard(delta, delta);
    mp.u_sq_integral = eng.integrate(usq, tol).value;
    out.sigma_sq += mp.u_sq_integral;
    out.max_residual = std::max(out.max_residual, mp.residual);
    out.max_h_norm = std::max(out.max_h_norm, mp.h.max_abs() * std::exp(mp.h.log_scale()));
    h = h_next;
    out.parts.push_back(std::move(mp));
  }
  // Monte Carlo route to s_n: variance of sum_k f_k(x_k) under the sampler
  SamplerContext ctx(fam, static_cast<std::size_t>(n_max) + 1);
  double mean = 0, m2 = 0;
  std::vector<double> sums(static_cast<std::size_t>(mc_seeds));
  for (int sd = 0; sd < mc_seeds; ++sd) {
    double acc = 0;
    CounterRng rng(static_cast<std::uint64_t>(sd) + 1, 17);
    for (long long k = 0; k <= n_max; ++k) {
      const auto& t = ctx.table(static_cast<std::size_t>(k));
      DigitSample d = ctx.product_digit(static_cast<std::size_t>(k), rng);
      // f_k = gamma_k log(x_k/alpha_k) - m1_k  (log gamma folds into the floor)
      acc += t.lp.gamma * (d.log_digit - t.lp.log_alpha) - centers[static_cast<std::size_t>(k)];
    }
    sums[static_cast<std::size_t>(sd)] = acc;
    mean += acc;
  }
  mean /= mc_seeds;
  for (double v : sums) m2 += (v - mean) * (v - mean);
  double var = m2 / (mc_seeds - 1);
  out.s_mc = std::sqrt(var);
  // stderr of a sample std via the delta method
  out.s_mc_stderr = out.s_mc / std::sqrt(2.0 * (mc_seeds - 1));

  char buf[160];
  std::snprintf(buf, sizeof buf, "family=%s depth=%d width=%d n_max=%lld tol=%g",
                fam.describe().c_str(), cfg.depth, cfg.width, n_max, tol);
  std::string config(buf);
  out.reports.push_back(make_report("martingale.residual_sup", out.max_residual, 1e-8, 0.0,
                                    out.max_residual <= 1e-8, config));
  out.reports.push_back(make_report("martingale.h_uniform_bound", out.max_h_norm, 10.0, 0.0,
                                    out.max_h_norm <= 10.0, config));
  double sigma = std::sqrt(out.sigma_sq);
  double band = 3.0 * out.s_mc_stderr + 1.0;  // |sigma - s| stays uniformly bounded
  out.reports.push_back(make_report("martingale.sigma_vs_mc", std::abs(sigma - out.s_mc), band,
                                    0.0, std::abs(sigma - out.s_mc) <= band, config));
  return out;
}

// ---- moments --------------------------------------------------------------

struct MomentSummary {
  double m1 = 0, m2c = 0, m4c = 0;
  double sandwich_lo = 0, sandwich_hi = 0;
  double p1log_min = 0, p1log_max = 0;
  bool gate_ok = true;
  double fitted_c = 0;
  std::vector<VerificationReport> reports;
};

// moments of gamma*log + log gamma under nu_n, plus the explicit one-step
// sandwich for the digit logarithm
inline MomentSummary moment_check(TransferEngine& eng, long long n, double tol = 1e-10,
                                  double gate = 0.1,
                                  double tol_m1 = 0.01, double tol_m2 = 0.05,
                                  double tol_m4 = 0.5) {
  MomentSummary out;
  const LevelParams& lp = eng.params(n);
  out.fitted_c = 2.0 * fitted_distortion(eng, std::min<long long>(n + 1, 12));
  double ce = out.fitted_c * lp.epsilon;
  out.gate_ok = ce < gate;
  char buf[160];
  std::snprintf(buf, sizeof buf, "family=%s n=%lld depth=%d width=%d",
                eng.family().describe().c_str(), n, eng.config().depth, eng.config().width);
  std::string config(buf);
  if (!out.gate_ok) {
    VerificationReport r = make_report("moments.gate", ce, gate, 0.0, false, config);
    r.inconclusive = true;
    out.reports.push_back(r);
    return out;
  }
  double g = lp.gamma, lg = std::log(lp.gamma);
  out.m1 = eng.integrate(eng.log_poly(n, {lg, g}), tol).value;
  double b = lg - out.m1;
  out.m2c = eng.integrate(eng.log_poly(n, {b * b, 2 * g * b, g * g}), tol).value;
  out.m4c = eng.integrate(eng.log_poly(n, {b * b * b * b, 4 * g * b * b * b,
                                           6 * g * g * b * b, 4 * g * g * g * b,
                                           g * g * g * g}), tol).value;
  // one-step sandwich for P_n^1(log digit)
  CylinderGrid p1 = eng.ratio_apply(eng.log_poly(n, {0.0, 1.0}), 1);
  double scale = std::exp(p1.log_scale());
  out.p1log_min = p1.min_value() * scale;
  out.p1log_max = p1.max_value() * scale;
  double base = (1.0 - lg) / g;
  out.sandwich_lo = (1.0 - 2.0 * ce) * (1.0 - 4.0 * g / lp.alpha) * base;
  out.sandwich_hi = (1.0 + 3.0 * ce) * (1.0 + 2.0 * g / (lp.alpha - 1.0)) * base;
  out.reports.push_back(make_report("moments.m1", out.m1, 1.0, tol_m1,
                                    std::abs(out.m1 - 1.0) <= tol_m1, config));
  out.reports.push_back(make_report("moments.m2c", out.m2c, 1.0, tol_m2,
                                    std::abs(out.m2c - 1.0) <= tol_m2, config));
  out.reports.push_back(make_report("moments.m4c", out.m4c, 9.0, tol_m4,
                                    std::abs(out.m4c - 9.0) <= tol_m4, config));
  bool inside = out.p1log_min >= out.sandwich_lo && out.p1log_max <= out.sandwich_hi;
  out.reports.push_back(make_report("moments.sandwich", out.p1log_max, out.sandwich_hi, 0.0,
                                    inside, config));
  return out;
}

// ---- contraction -----------------------------------------------------------

struct ContractionFit {
  std::vector<std::string> names;
  std::vector<std::vector<double>> lipschitz;  // per test function, k = 0..k_max
  double fitted_s = 0;    // exp of the least-squares slope of log D vs k
  double max_step_ratio = 0;
  int skipped = 0;
  std::vector<VerificationReport> reports;
};

inline ContractionFit contraction_fit(TransferEngine& eng, long long n, int k_max,
                                      double s_bound = 0.5) {
  ContractionFit out;
  struct Item { std::string name; CylinderGrid g; };
  std::vector<Item> testset;
  testset.push_back({"value", eng.value_fn(n)});
  testset.push_back({"indicator", eng.indicator(n, 0)});
  testset.push_back({"digit_log", eng.log_poly(n, {0.0, 1.0})});
  testset.push_back({"constant", eng.ones(n)});
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (auto& item : testset) {
    double d0 = lipschitz_estimate(item.g);
    if (d0 <= 0) {
      ++out.skipped;  // constants carry no Lipschitz information
      continue;
    }
    out.names.push_back(item.name);
    std::vector<double> ds{d0};
    CylinderGrid cur = item.g;
    double floor = 1e-13 * (item.g.max_abs() * std::exp(item.g.log_scale()) + 1.0);
    for (int k = 1; k <= k_max; ++k) {
      cur = eng.ratio_apply(cur, 1);
      double d = lipschitz_estimate(cur);
      ds.push_back(d);
      if (ds[static_cast<std::size_t>(k) - 1] > floor) {
        out.max_step_ratio = std::max(out.max_step_ratio, d / ds[static_cast<std::size_t>(k) - 1]);
        sx += k;
        sy += std::log(std::max(d, 1e-300) / d0);
        sxx += static_cast<double>(k) * k;
        sxy += k * std::log(std::max(d, 1e-300) / d0);
        ++cnt;
      }
    }
    out.lipschitz.push_back(std::move(ds));
  }
  double denom = cnt * sxx - sx * sx;
  out.fitted_s = (denom != 0) ? std::exp((cnt * sxy - sx * sy) / denom) : 0.0;
  char buf[160];
  std::snprintf(buf, sizeof buf, "family=%s n=%lld k_max=%d depth=%d width=%d",
                eng.family().describe().c_str(), n, k_max, eng.config().depth,
                eng.config().width);
  std::string config(buf);
  out.reports.push_back(make_report("contraction.fitted_s", out.fitted_s, s_bound, 0.0,
                                    out.fitted_s < s_bound, config));
  out.reports.push_back(make_report("contraction.step_ratio", out.max_step_ratio, s_bound, 0.0,
                                    out.max_step_ratio < s_bound, config));
  return out;
}

// ---- duality ---------------------------------------------------------------

struct DualityResult {
  double max_marginal_gap = 0;
  double max_pullout_gap = 0;
  std::vector<VerificationReport> reports;
};

inline DualityResult duality_check(TransferEngine& eng, long long n, int k, double tol) {
  DualityResult out;
  struct Item { std::string name; CylinderGrid g; };
  std::vector<Item> testset;
  testset.push_back({"value", eng.value_fn(n)});
  testset.push_back({"digit_log", eng.log_poly(n, {0.0, 1.0})});
  testset.push_back({"indicator", eng.indicator(n, 0)});
  for (auto& item : testset) {
    double direct = eng.integrate(item.g, tol).value;
    double pushed = eng.integrate(eng.ratio_apply(item.g, k), tol).value;
    out.max_marginal_gap = std::max(out.max_marginal_gap, std::abs(pushed - direct));
  }
  // bilinear pull-out identity with a first-coordinate function upstairs;
  // the lift resolves f o T^j only for j below the grid depth
  int j = std::min(k, eng.config().depth - 1);
  CylinderGrid f = eng.log_poly(n + j, {0.0, 1.0});
  CylinderGrid g = eng.value_fn(n);
  CylinderGrid lhs = eng.ratio_apply(hadamard(lift_through_shift(f, eng.grid_shape(n), j), g), j);
  CylinderGrid rhs = hadamard(f, eng.ratio_apply(g, j));
  for (std::size_t s = 0; s < lhs.size(); ++s)
    out.max_pullout_gap = std::max(out.max_pullout_gap,
                                   std::abs(lhs[s] * std::exp(lhs.log_scale()) -
                                            rhs[s] * std::exp(rhs.log_scale())));
  char buf[160];
  std::snprintf(buf, sizeof buf, "family=%s n=%lld k=%d tol=%g depth=%d width=%d",
                eng.family().describe().c_str(), n, k, tol, eng.config().depth,
                eng.config().width);
  std::string config(buf);
  out.reports.push_back(make_report("duality.marginal", out.max_marginal_gap, 2.0 * tol, 0.0,
                                    out.max_marginal_gap <= 2.0 * tol, config));
  out.reports.push_back(make_report("duality.pullout", out.max_pullout_gap, 1e-10, 0.0,
                                    out.max_pullout_gap <= 1e-10, config));
  return out;
}

}  // namespace rcf
