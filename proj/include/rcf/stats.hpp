#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rcf/continued_fraction.hpp"
#include "rcf/sampler.hpp"

namespace rcf {

// Running statistics of one trajectory: the centered digit sums, their
// iterated-logarithm normalization, convergent denominators and the
// local-dimension ingredients.
struct StatSeries {
  std::vector<double> stat;       // gamma_k (log x_k - log alpha_k)
  std::vector<double> S;          // S[n] = sum_{k<n} (stat_k - 1), S[0] = 0
  std::vector<double> lil_ratio;  // S_n / sqrt(2 n loglog n), NaN below n=16
  std::vector<double> log_q;      // log q_n, log_q[0] = 0
  double max_abs_lil = 0;
};

inline double lil_denominator(double n) {
  return std::sqrt(2.0 * n * std::log(std::log(n)));
}

inline StatSeries lil_series(const SamplerContext& ctx, const DigitTrajectory& traj) {
  std::size_t n = traj.samples.size();
  if (n < 16) throw std::invalid_argument("lil_series: need length >= 16");
  StatSeries out;
  out.stat.resize(n);
  out.S.resize(n + 1);
  out.lil_ratio.assign(n + 1, std::numeric_limits<double>::quiet_NaN());
  out.S[0] = 0;
  double comp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& t = ctx.table(k);
    double st = t.lp.gamma * (traj.samples[k].log_digit - t.lp.log_alpha);
    if (st < 0 && st > -1e-12) st = 0;  // digits at the floor
    out.stat[k] = st;
    double y = (st - 1.0) - comp;
    double s = out.S[k] + y;
    comp = (s - out.S[k]) - y;
    out.S[k + 1] = s;
    if (k + 1 >= 16) {
      double r = out.S[k + 1] / lil_denominator(static_cast<double>(k + 1));
      out.lil_ratio[k + 1] = r;
      out.max_abs_lil = std::max(out.max_abs_lil, std::abs(r));
    }
  }
  out.log_q = log_q_from_digits(traj.log_digits());
  return out;
}

inline std::vector<double> log_q_series(const DigitTrajectory& traj) {
  return log_q_from_digits(traj.log_digits());
}

// |sum_{k<n} log S^k(x) + log q_n(x)|, the convergent-denominator identity;
// evaluated for every n <= n_max using one backward pass
inline std::vector<double> q_identity_gaps(const DigitTrajectory& traj, std::size_t n_max) {
  auto lds = traj.log_digits();
  if (n_max > lds.size()) throw std::out_of_range("q_identity_gaps: n beyond trajectory");
  auto ls = log_shift_values(lds);
  auto lq = log_q_from_digits(lds);
  std::vector<double> gaps(n_max + 1, 0.0);
  double acc = 0, comp = 0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    double y = ls[n - 1] - comp;
    double t = acc + y;
    comp = (t - acc) - y;
    acc = t;
    gaps[n] = std::abs(acc + lq[n]);
  }
  return gaps;
}

struct ShiftedSeries {
  std::vector<double> S_shift;   // Eq-(8)-style sums over gamma_k log(S^k(a)/S^k(x)) - 1
  std::vector<double> S_q;       // approximant sums over (gamma_{k-1}-gamma_k) log q ratios - 1
  std::vector<double> per_step_gap;  // |(eq8 summand) - (digit summand)| per step
};

// Shifted-value and approximant statistics.  The approximant sum needs the
// q-recurrence restarted at every shift, O(n^2); capped at 1e4 steps.
inline ShiftedSeries shifted_lil_series(const SamplerContext& ctx, const DigitTrajectory& traj,
                                        std::size_t n) {
  if (n > 10000)
    throw std::invalid_argument(
        "shifted_lil_series: the approximant recurrence is quadratic in n; cap is 1e4");
  if (n > traj.samples.size())
    throw std::out_of_range("shifted_lil_series: n beyond trajectory");
  auto ldx = traj.log_digits();
  ldx.resize(n);
  std::vector<double> lda(n);
  for (std::size_t k = 0; k < n; ++k) lda[k] = ctx.table(k).lp.log_alpha;
  auto lsx = log_shift_values(ldx);
  auto lsa = log_shift_values(lda);
  ShiftedSeries out;
  out.S_shift.resize(n + 1);
  out.S_q.resize(n + 1);
  out.per_step_gap.resize(n);
  out.S_shift[0] = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double g = ctx.table(k).lp.gamma;
    double term = g * (lsa[k] - lsx[k]) - 1.0;
    out.S_shift[k + 1] = out.S_shift[k] + term;
    double digit_term = ctx.table(k).lp.gamma *
                            (traj.samples[k].log_digit - ctx.table(k).lp.log_alpha) -
                        1.0;
    out.per_step_gap[k] = std::abs(term - digit_term);
  }
  // sum_{k<n} ((gamma_{k-1}-gamma_k) log [q_{n-k}(S^k a)/q_{n-k}(S^k x)] - 1)
  // with gamma_{-1} = 0; the ratio orientation follows the telescoping
  // identity sum gamma_k log (p/q)(S^k .) = sum (gamma_{k-1}-gamma_k) log q,
  // which makes this sum track the shifted-value sum above.
  out.S_q[0] = 0;
  std::vector<double> suffix_x, suffix_a;
  double acc = 0;
  for (std::size_t k = 0; k < n; ++k) {
    suffix_x.assign(ldx.begin() + static_cast<long>(k), ldx.end());
    suffix_a.assign(lda.begin() + static_cast<long>(k), lda.end());
    double lqx = log_q_from_digits(suffix_x).back();
    double lqa = log_q_from_digits(suffix_a).back();
    double gprev = (k == 0) ? 0.0 : ctx.table(k - 1).lp.gamma;
    double g = ctx.table(k).lp.gamma;
    acc += (gprev - g) * (lqa - lqx) - 1.0;
    out.S_q[k + 1] = acc;
  }
  return out;
}

struct LocalDimension {
  double estimate = 0;   // log mass / log diameter
  double log_mass = 0;
  double log_diam = 0;   // geometric-potential route
  double log_diam_q = 0; // -2 log q_n - log alpha_n cross-check
  double log_theta = 0;  // borel-cantelli diagnostic
  bool below_bc_threshold = true;  // x_n <= b_n^2
};

// diam([w] cap X) ~ phi_w(0)/alpha_n with the geometric potential; the mass
// is the accumulated conditional product.  delta enters the Theta_n
// diagnostic and the threshold b_n only.
inline LocalDimension local_dimension(const SamplerContext& ctx, const DigitTrajectory& traj,
                                      std::size_t n, double delta) {
  if (n >= traj.samples.size())
    throw std::out_of_range("local_dimension: need trajectory longer than n");
  LocalDimension out;
  out.log_mass = cylinder_log_mass(traj, n);
  auto ls = log_shift_values(traj.log_digits());
  const auto& tn = ctx.table(n);
  double acc = 0, comp = 0;
  double theta = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double y = 2.0 * ls[k] - comp;
    double t = acc + y;
    comp = (t - acc) - y;
    acc = t;
    const auto& tk = ctx.table(k);
    theta += std::log(tk.lp.gamma) + tk.lp.gamma * (tk.lp.log_alpha + ls[k]);
  }
  out.log_diam = acc - tn.lp.log_alpha;
  auto lq = log_q_from_digits(traj.log_digits());
  out.log_diam_q = -2.0 * lq[n] - tn.lp.log_alpha;
  if (out.log_diam >= -1.0)
    throw std::domain_error("local_dimension: cylinder too coarse for an estimate");
  out.estimate = out.log_mass / out.log_diam;
  out.log_theta = (1.0 + delta) / (2.0 * tn.lp.gamma) * std::log(static_cast<double>(n)) +
                  0.5 * tn.lp.log_alpha + theta;
  double log_bn_sq = tn.lp.log_alpha +
                     (1.0 + delta) / tn.lp.gamma * std::log(static_cast<double>(n));
  out.below_bc_threshold = traj.samples[n].log_digit <= log_bn_sq;
  return out;
}

// ---- one-sample Kolmogorov-Smirnov --------------------------------------

enum class KsTarget { exp1, std_normal };

struct KsReport {
  double ks_stat = 0;
  double p_value = 0;
};

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double acc = 0;
  for (int j = 1; j <= 100; ++j) {
    double term = 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
    acc += term;
    if (std::abs(term) < 1e-14) break;
  }
  return std::min(1.0, std::max(0.0, acc));
}

inline KsReport distribution_tests(std::vector<double> samples, KsTarget target) {
  if (samples.size() < 100)
    throw std::invalid_argument("distribution_tests: need at least 100 samples");
  std::sort(samples.begin(), samples.end());
  double n = static_cast<double>(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double cdf = (target == KsTarget::exp1) ? 1.0 - std::exp(-std::max(0.0, samples[i]))
                                            : std_normal_cdf(samples[i]);
    d = std::max(d, std::abs(cdf - (i + 1) / n));
    d = std::max(d, std::abs(cdf - i / n));
  }
  KsReport rep;
  rep.ks_stat = d;
  double sn = std::sqrt(n);
  rep.p_value = kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
  return rep;
}

// ---- streaming accumulator for long runs --------------------------------

// Tracks S_n and the iterated-logarithm ratio without materializing the
// trajectory; used by the large Monte Carlo sweeps.
class LilStream {
 public:
  explicit LilStream(std::size_t band_lo = 1000) : band_lo_(band_lo) {}

  void push(const SamplerContext::LevelTable& t, const DigitSample& d) {
    double st = t.lp.gamma * (d.log_digit - t.lp.log_alpha);
    double y = (st - 1.0) - comp_;
    double s = S_ + y;
    comp_ = (s - S_) - y;
    S_ = s;
    ++n_;
    if (n_ >= band_lo_ && n_ >= 16) {
      double r = std::abs(S_) / lil_denominator(static_cast<double>(n_));
      band_max_ = std::max(band_max_, r);
    }
  }

  std::size_t n() const { return n_; }
  double S() const { return S_; }
  double band_max() const { return band_max_; }

 private:
  std::size_t band_lo_;
  std::size_t n_ = 0;
  double S_ = 0, comp_ = 0;
  double band_max_ = 0;
};

}  // namespace rcf
