#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcf/alpha_family.hpp"
#include "rcf/continued_fraction.hpp"
#include "rcf/cylinder_grid.hpp"
#include "rcf/rng.hpp"
#include "rcf/tail_sum.hpp"
#include "rcf/transfer_operator.hpp"

namespace rcf {

struct DigitSample {
  std::optional<long long> exact;  // absent for digits at or beyond 2^62
  double log_digit = 0;
  double log_cond_prob = 0;
};

enum class SampleMode { product, op };

struct OperatorModeConfig {
  int K = 3;
  int candidates = 64;  // explicit digits resolved per step; rest aggregate
  int depth = 2;
  int width = 16;
};

struct DigitTrajectory {
  AlphaFamily family;
  std::uint64_t seed = 0;
  SampleMode mode = SampleMode::product;
  int K = 0;
  std::vector<DigitSample> samples;

  std::vector<double> log_digits() const {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(s.log_digit);
    return v;
  }
};

// sum_{k<n} log of the conditional digit masses: log of the product
// approximation to nu_0 of the depth-n cylinder around the trajectory
inline double cylinder_log_mass(const DigitTrajectory& traj, std::size_t n) {
  if (n > traj.samples.size())
    throw std::out_of_range("cylinder_log_mass: n beyond trajectory length");
  double acc = 0;
  for (std::size_t k = 0; k < n; ++k) acc += traj.samples[k].log_cond_prob;
  return acc;
}

namespace detail {

// Smooth right tail T(y) = sum_{a >= y-xi} (a+xi)^{-s} continued to real y,
// pure order-2 Euler-Maclaurin; accurate to ~1e-12 for y >= 50.
inline double smooth_tail(double s, double y) { return em_tail(s, 0, y); }

inline double smooth_log_tail(double s, double log_y) { return em_log_tail(s, log_y); }

// Solve smooth_log_tail(s, L) = log_target for L, Newton in L
inline double invert_log_tail(double s, double log_target, double L_min) {
  double c = s - 1.0;
  double L = (-log_target - std::log(c)) / c;  // leading-order seed
  if (L < L_min) L = L_min;
  for (int it = 0; it < 60; ++it) {
    double lt = smooth_log_tail(s, L);
    double g = lt - log_target;
    // dlogT/dL = -y f(y)(1 - s/(2y) + ...) / T with f = y^{-s}
    double y = std::exp(L);
    double dlog = -std::exp((1.0 - s) * L - lt) * (1.0 - 0.5 * s / y);
    double step = g / dlog;
    if (!std::isfinite(step)) break;
    if (step > 5.0) step = 5.0;
    if (step < -5.0) step = -5.0;
    L -= step;
    if (L < L_min) L = L_min;
    if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(L))) break;
  }
  return L;
}

}  // namespace detail

// Per-level sampling tables shared read-only across trajectories.
class SamplerContext {
 public:
  struct LevelTable {
    LevelParams lp;
    double s = 2.0;         // 2*delta = 1+gamma
    double xi = 0;          // minimal-tail continuation value at level+1
    bool log_branch = false;
    double log_z = 0;
    // linear branch only:
    double z = 0;
    double prefix_end = 0;  // alpha + prefix size
    double tail_end = 0;    // smooth tail mass from prefix_end
    std::vector<double> cum;
    std::vector<double> log_mass;
  };

  SamplerContext(AlphaFamily fam, std::size_t levels) : fam_(std::move(fam)) {
    tables_.reserve(levels);
    for (std::size_t n = 0; n < levels; ++n) tables_.push_back(build_level(n));
  }

  const AlphaFamily& family() const { return fam_; }
  std::size_t levels() const { return tables_.size(); }
  const LevelTable& table(std::size_t n) const {
    if (n >= tables_.size()) throw std::out_of_range("sampler context: level beyond table");
    return tables_[n];
  }

  DigitSample product_digit(std::size_t n, CounterRng& rng) const {
    const LevelTable& t = table(n);
    double u = rng.next_unit();
    DigitSample out;
    if (!t.log_branch) {
      double target = (1.0 - u) * t.z;  // mass to the right of the drawn digit
      if (target >= t.tail_end) {
        // inverse CDF over the explicit prefix
        double left = u * t.z;
        std::size_t lo = 0, hi = t.cum.size() - 1;
        while (lo < hi) {
          std::size_t mid = (lo + hi) / 2;
          if (t.cum[mid] >= left) hi = mid; else lo = mid + 1;
        }
        long long digit = static_cast<long long>(t.lp.alpha) + static_cast<long long>(lo);
        out.exact = digit;
        out.log_digit = std::log(static_cast<double>(digit));
        out.log_cond_prob = t.log_mass[lo] - t.log_z;
        return out;
      }
      return tail_digit(t, std::log(target));
    }
    double log_target = std::log1p(-u) + t.log_z;
    return tail_digit(t, log_target);
  }

  // digit drawn from the product conditional restricted to digit >= cut
  DigitSample tail_digit_from(std::size_t n, double cut, CounterRng& rng) const {
    const LevelTable& t = table(n);
    double lt = (!t.log_branch && cut + t.xi < 1e13)
                    ? std::log(detail::smooth_tail(t.s, cut + t.xi))
                    : detail::smooth_log_tail(t.s, std::log(cut));
    double u = rng.next_unit();
    DigitSample d = tail_digit(t, std::log1p(-u) + lt);
    // conditional on the restriction, relative to the full level mass
    d.log_cond_prob += t.log_z - lt;
    return d;
  }

 private:
  // invert the smooth tail at log(target mass); exact integer refinement
  // while the tail differences carry enough precision
  DigitSample tail_digit(const LevelTable& t, double log_target) const {
    double L_min = t.log_branch ? t.lp.log_alpha : std::log(t.prefix_end + t.xi);
    double L = detail::invert_log_tail(t.s, log_target, L_min);
    DigitSample out;
    double y = std::exp(L);
    double x = t.log_branch ? y : y - t.xi;
    if (x < 1e7) {
      long long k = static_cast<long long>(std::floor(x));
      // place k so that T(k) >= target > T(k+1)
      for (int guard = 0; guard < 4; ++guard) {
        double tk = std::log(detail::smooth_tail(t.s, k + t.xi));
        if (tk < log_target) { --k; continue; }
        double tk1 = std::log(detail::smooth_tail(t.s, k + 1 + t.xi));
        if (tk1 >= log_target) { ++k; continue; }
        break;
      }
      double mass = detail::smooth_tail(t.s, k + t.xi) - detail::smooth_tail(t.s, k + 1 + t.xi);
      out.exact = k;
      out.log_digit = std::log(static_cast<double>(k));
      out.log_cond_prob = std::log(mass) - t.log_z;
      return out;
    }
    double log_x = t.log_branch ? L : L + std::log1p(-t.xi / y);
    if (log_x < 42.975125194716609) {  // log(2^62)
      out.exact = static_cast<long long>(std::exp(log_x));
      out.log_digit = std::log(static_cast<double>(*out.exact));
    } else {
      out.log_digit = log_x;
    }
    // continuum mass reading: density at the drawn point
    out.log_cond_prob = -t.s * L - t.log_z;
    return out;
  }

  LevelTable build_level(std::size_t n) const {
    LevelTable t;
    t.lp = LevelParams::at(fam_, static_cast<long long>(n));
    t.s = 2.0 * t.lp.delta;
    t.log_branch = !(t.lp.alpha < 1e13);
    if (t.log_branch) {
      t.log_z = detail::smooth_log_tail(t.s, t.lp.log_alpha);
      return t;
    }
    t.xi = minimal_tail_value(fam_, static_cast<long long>(n) + 1);
    const int prefix = 64;
    t.prefix_end = t.lp.alpha + prefix;
    t.cum.resize(prefix);
    t.log_mass.resize(prefix);
    double acc = 0;
    for (int j = 0; j < prefix; ++j) {
      double ly = std::log(t.lp.alpha + j + t.xi);
      t.log_mass[j] = -t.s * ly;
      acc += std::exp(-t.s * ly);
      t.cum[j] = acc;
    }
    t.tail_end = detail::smooth_tail(t.s, t.prefix_end + t.xi);
    t.z = acc + t.tail_end;
    t.log_z = std::log(t.z);
    return t;
  }

  AlphaFamily fam_;
  std::vector<LevelTable> tables_;
};

// ---- operator-corrected conditional sampling ---------------------------

// Weights of the next-digit candidates given the prefix potential phi_w as a
// grid at level n: candidate a maps to the level-(n+1) grid
// y -> phi_w(tau_a y) * (a + [[y]])^{-2 delta_n}, probed after K ratio steps.
class OperatorSampler {
 public:
  OperatorSampler(const AlphaFamily& fam, OperatorModeConfig cfg, std::size_t levels)
      : cfg_(cfg),
        eng_(fam, EngineConfig{cfg.depth, cfg.width, 1e-8, 64, 24}),
        ctx_(fam, levels + 1) {
    pot_ = eng_.ones(0);
    level_ = 0;
  }

  const SamplerContext& context() const { return ctx_; }
  TransferEngine& engine() { return eng_; }

  // candidate probabilities (explicit digits..., aggregated tail) at the
  // current level given the current prefix potential
  std::vector<double> conditional_distribution(int K) {
    std::vector<double> lw = candidate_log_weights(K);
    double mx = lw[0];
    for (double v : lw) mx = std::max(mx, v);
    double z = 0;
    for (double& v : lw) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : lw) v /= z;
    return lw;
  }

  DigitSample step(CounterRng& rng) {
    std::vector<double> p = conditional_distribution(cfg_.K);
    double u = rng.next_unit();
    std::size_t pick = 0;
    double acc = 0;
    for (; pick + 1 < p.size(); ++pick) {
      acc += p[pick];
      if (u <= acc) break;
    }
    DigitSample out;
    const SamplerContext::LevelTable& t = ctx_.table(static_cast<std::size_t>(level_));
    if (pick + 1 < p.size()) {
      long long digit = static_cast<long long>(t.lp.alpha) + static_cast<long long>(pick);
      out.exact = digit;
      out.log_digit = std::log(static_cast<double>(digit));
      out.log_cond_prob = std::log(p[pick]);
    } else {
      // aggregated bucket: the operator assigns the bucket mass, the product
      // law refines the digit inside it (tail_digit_from already returns the
      // within-bucket conditional)
      double cut = t.lp.alpha + cfg_.candidates;
      out = ctx_.tail_digit_from(static_cast<std::size_t>(level_), cut, rng);
      out.log_cond_prob += std::log(p.back());
    }
    pot_ = candidate_grid(out);
    pot_.normalize();
    ++level_;
    return out;
  }

 private:
  std::vector<double> candidate_log_weights(int K) {
    std::vector<double> lw(static_cast<std::size_t>(cfg_.candidates) + 1);
    bool any_finite = false;
    for (int c = 0; c <= cfg_.candidates; ++c) {
      CylinderGrid g = (c < cfg_.candidates) ? explicit_candidate(c) : tail_candidate();
      for (int i = 0; i < K; ++i) {
        g = eng_.apply(g);
        g.normalize();
      }
      double v = g[0];
      lw[static_cast<std::size_t>(c)] =
          (v > 0) ? std::log(v) + g.log_scale() : -std::numeric_limits<double>::infinity();
      if (std::isfinite(lw[static_cast<std::size_t>(c)])) any_finite = true;
    }
    if (!any_finite)
      throw std::runtime_error("operator sampler: all candidate weights vanished");
    return lw;
  }

  CylinderGrid explicit_candidate(int c) {
    const SamplerContext::LevelTable& t = ctx_.table(static_cast<std::size_t>(level_));
    double a = t.lp.alpha + c;
    const LevelGeometry& out = eng_.geometry(level_ + 1);
    CylinderGrid g(eng_.grid_shape(level_ + 1));
    fill_candidate(g, out, [&](double xi_y) { return -t.s * std::log(a + xi_y); },
                   std::min(c, eng_.config().width));
    return g;
  }

  CylinderGrid tail_candidate() {
    const SamplerContext::LevelTable& t = ctx_.table(static_cast<std::size_t>(level_));
    double cut = t.lp.alpha + cfg_.candidates;
    const LevelGeometry& out = eng_.geometry(level_ + 1);
    CylinderGrid g(eng_.grid_shape(level_ + 1));
    fill_candidate(g, out,
                   [&](double xi_y) { return std::log(detail::smooth_tail(t.s, cut + xi_y)); },
                   eng_.config().width);
    return g;
  }

  CylinderGrid candidate_grid(const DigitSample& d) {
    const SamplerContext::LevelTable& t = ctx_.table(static_cast<std::size_t>(level_));
    double la = d.log_digit;
    const LevelGeometry& out = eng_.geometry(level_ + 1);
    CylinderGrid g(eng_.grid_shape(level_ + 1));
    int row = cfg_.width;
    if (d.exact && *d.exact - static_cast<long long>(t.lp.alpha) < cfg_.width)
      row = static_cast<int>(*d.exact - static_cast<long long>(t.lp.alpha));
    fill_candidate(g, out,
                   [&](double xi_y) {
                     return -t.s * (la + std::log1p(xi_y * std::exp(-la)));
                   },
                   row);
    return g;
  }

  template <typename LogWeightFn>
  void fill_candidate(CylinderGrid& g, const LevelGeometry& out, LogWeightFn&& lwf, int row) {
    // g[y] = pot[row][y drop-last] * weight(xi_y); the common weight scale is
    // factored into the log scale so huge alphas stay in range
    std::size_t inner = pot_.size() / static_cast<std::size_t>(pot_.shape().widths[0] + 1);
    const double* pr = pot_.values().data() + static_cast<std::size_t>(row) * inner;
    int wd = g.shape().widths[g.depth() - 1];
    double lw0 = lwf(out.rep_value[0]);
    std::size_t idx = 0;
    for (std::size_t k = 0; k < inner; ++k)
      for (int j = 0; j <= wd; ++j, ++idx)
        g[idx] = pr[k] * std::exp(lwf(out.rep_value[idx]) - lw0);
    g.set_log_scale(pot_.log_scale() + lw0);
  }

  OperatorModeConfig cfg_;
  TransferEngine eng_;
  SamplerContext ctx_;
  CylinderGrid pot_;
  long long level_ = 0;
};

// product conditional probabilities over the same candidate partition the
// operator sampler uses (explicit digits..., aggregated tail)
inline std::vector<double> product_candidate_distribution(const SamplerContext& ctx,
                                                          std::size_t level, int candidates) {
  const SamplerContext::LevelTable& t = ctx.table(level);
  std::vector<double> p(static_cast<std::size_t>(candidates) + 1);
  double acc = 0;
  for (int c = 0; c < candidates; ++c) {
    double m = std::exp(-t.s * std::log(t.lp.alpha + c + t.xi) - t.log_z);
    p[static_cast<std::size_t>(c)] = m;
    acc += m;
  }
  p.back() = std::max(0.0, 1.0 - acc);
  return p;
}

inline double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return 0.5 * acc;
}

// ---- trajectories -------------------------------------------------------

inline DigitTrajectory sample_trajectory(const SamplerContext& ctx, std::size_t n,
                                         std::uint64_t seed) {
  if (n > ctx.levels()) throw std::out_of_range("sample_trajectory: context too short");
  DigitTrajectory traj;
  traj.family = ctx.family();
  traj.seed = seed;
  traj.mode = SampleMode::product;
  CounterRng rng(seed, 0);
  traj.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) traj.samples.push_back(ctx.product_digit(k, rng));
  return traj;
}

inline DigitTrajectory sample_trajectory_operator(const AlphaFamily& fam, std::size_t n,
                                                  std::uint64_t seed, OperatorModeConfig cfg = {}) {
  DigitTrajectory traj;
  traj.family = fam;
  traj.seed = seed;
  traj.mode = SampleMode::op;
  traj.K = cfg.K;
  OperatorSampler os(fam, cfg, n);
  CounterRng rng(seed, 0);
  traj.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) traj.samples.push_back(os.step(rng));
  return traj;
}

// streaming product sampling without materializing the trajectory
template <typename Fn>
void stream_trajectory(const SamplerContext& ctx, std::size_t n, std::uint64_t seed, Fn&& fn) {
  CounterRng rng(seed, 0);
  for (std::size_t k = 0; k < n; ++k) fn(k, ctx.product_digit(k, rng));
}

inline void dump_trajectory(std::ostream& os, const DigitTrajectory& traj) {
  os << "# family=" << traj.family.describe()
     << " mode=" << (traj.mode == SampleMode::product ? "product" : "operator")
     << (traj.mode == SampleMode::op ? "(K=" + std::to_string(traj.K) + ")" : "")
     << " seed=" << traj.seed << "\n";
  os << "k,digit,log_digit,log_cond_prob\n";
  char buf[128];
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const DigitSample& d = traj.samples[k];
    if (d.exact)
      std::snprintf(buf, sizeof buf, "%zu,%lld,%.17g,%.17g\n", k, *d.exact, d.log_digit,
                    d.log_cond_prob);
    else
      std::snprintf(buf, sizeof buf, "%zu,,%.17g,%.17g\n", k, d.log_digit, d.log_cond_prob);
    os << buf;
  }
}

}  // namespace rcf
