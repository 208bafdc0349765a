#pragma once

#include <cmath>
#include <deque>
#include <iterator>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcf/alpha_family.hpp"
#include "rcf/cylinder_grid.hpp"
#include "rcf/continued_fraction.hpp"
#include "rcf/tail_sum.hpp"

namespace rcf {

struct EngineConfig {
  int depth = 3;
  int width = 64;
  double tol = 1e-8;
  int max_steps = 64;
  int taylor_cap = 24;
};

// G_n = L_0^n(1), stored max-normalized with the factored scale; the
// oscillation max/min - 1 tracks the distortion bound.
struct NormalizerTrack {
  long long level = 0;
  CylinderGrid grid;
  double oscillation = 0;
};

struct IntegrateResult {
  double value = 0;
  int steps = 0;
  double final_oscillation = 0;
};

class IntegrateError : public std::runtime_error {
 public:
  IntegrateError(std::string msg, std::vector<double> osc)
      : std::runtime_error(std::move(msg)), oscillation_trace(std::move(osc)) {}
  std::vector<double> oscillation_trace;
};

namespace detail {

// Branch weights of one Ruelle application expanded around the midpoint of
// the continuation values: (a+xi)^{-s} = sum_t c[a][t] (xi-xi0)^t, with the
// common factor s*log(alpha+xi0) pulled out so rows stay O(1) for any alpha.
// The tail bucket is one more row whose coefficients are shifted tail sums.
struct WeightTable {
  double s = 0;
  double xi0 = 0;
  double log_factor = 0;  // subtract from the output grid's log scale
  int order = 1;
  std::vector<std::vector<double>> rows;  // [width+1][order]
};

inline WeightTable build_weight_table(const AlphaFamily& fam, long long level,
                                      double s, int coord0_width,
                                      const LevelGeometry& out_geom, int taylor_cap) {
  WeightTable w;
  w.s = s;
  w.xi0 = 0.5 * (out_geom.rep_min + out_geom.rep_max);
  double alpha = fam.alpha(level);
  double y00 = alpha + w.xi0;
  w.log_factor = s * std::log(y00);
  double half_range = 0.5 * (out_geom.rep_max - out_geom.rep_min);
  double rho = half_range / y00;
  w.order = 1;
  double p = rho;
  while (w.order < taylor_cap && p > 1e-18) {
    p *= rho;
    ++w.order;
  }
  w.rows.assign(static_cast<std::size_t>(coord0_width) + 1,
                std::vector<double>(static_cast<std::size_t>(w.order), 0.0));
  for (int j = 0; j < coord0_width; ++j) {
    double y0 = alpha + j + w.xi0;
    double c = std::exp(w.log_factor - s * std::log(y0));
    for (int t = 0; t < w.order; ++t) {
      w.rows[j][t] = c;
      c *= -(s + t) / ((t + 1.0) * y0);
    }
  }
  // tail bucket: t-th Taylor coefficient of sum_{a>=cut}(a+xi)^{-s}
  double cut = alpha + coord0_width;
  double fall = 1.0;  // prod_{i<t} -(s+i) / t!
  for (int t = 0; t < w.order; ++t) {
    double plt = power_log_tail(s + t, 0, cut, w.xi0);
    double lc = w.log_factor + std::log(plt);
    w.rows[coord0_width][t] = (lc < 700.0) ? fall * std::exp(lc) : 0.0;
    if (!std::isfinite(w.rows[coord0_width][t])) w.rows[coord0_width][t] = 0.0;
    fall *= -(s + t) / (t + 1.0);
    if (plt == 0.0) break;
  }
  return w;
}

// L_level(f) restructured: accumulate B[inner][t] = sum_rows c[row][t]*f[row][inner],
// then evaluate the polynomial at each output slot's centered representative.
inline CylinderGrid apply_with_table(const CylinderGrid& f, const WeightTable& w,
                                     const LevelGeometry& out_geom) {
  const GridShape& in = f.shape();
  int d = in.depth();
  const GridShape& os = out_geom.shape;
  std::size_t inner = f.size() / static_cast<std::size_t>(in.widths[0] + 1);
  int order = w.order;
  std::vector<double> B(inner * static_cast<std::size_t>(order), 0.0);
  for (int row = 0; row <= in.widths[0]; ++row) {
    const double* fr = f.values().data() + static_cast<std::size_t>(row) * inner;
    const double* cr = w.rows[static_cast<std::size_t>(row)].data();
    for (std::size_t k = 0; k < inner; ++k) {
      double fv = fr[k];
      double* bk = B.data() + k * static_cast<std::size_t>(order);
      for (int t = 0; t < order; ++t) bk[t] += cr[t] * fv;
    }
  }
  CylinderGrid out(os);
  int wd = os.widths[d - 1];
  std::size_t idx = 0;
  for (std::size_t k = 0; k < inner; ++k) {
    const double* bk = B.data() + k * static_cast<std::size_t>(order);
    for (int j = 0; j <= wd; ++j, ++idx) {
      double dx = out_geom.rep_value[idx] - w.xi0;
      double acc = bk[order - 1];
      for (int t = order - 2; t >= 0; --t) acc = acc * dx + bk[t];
      out[idx] = acc;
    }
  }
  out.set_log_scale(f.log_scale() - w.log_factor);
  return out;
}

}  // namespace detail

// Finite-dimensional action of the Ruelle operators L_n with potential
// exponent 2*delta_n, the normalizer ladder G_n, the ratio operators P_n^k
// and the limit functional.  Uniform grid widths; caches (geometry, weight
// tables, ladder) grow on demand and can be dropped from below to bound
// memory in long sweeps.  Not safe for concurrent mutation; run independent
// pipelines on separate engines.
class TransferEngine {
 public:
  TransferEngine(AlphaFamily fam, EngineConfig cfg = {})
      : fam_(std::move(fam)), cfg_(cfg) {
    NormalizerTrack g0;
    g0.level = 0;
    g0.grid = ones_grid(grid_shape(0));
    g0.oscillation = 0;
    ladder_.push_back(std::move(g0));
  }

  const AlphaFamily& family() const { return fam_; }
  const EngineConfig& config() const { return cfg_; }

  GridShape grid_shape(long long level) const {
    return GridShape{level, std::vector<int>(static_cast<std::size_t>(cfg_.depth), cfg_.width)};
  }

  const LevelParams& params(long long level) {
    while (static_cast<long long>(params_.size()) <= level)
      params_.push_back(LevelParams::at(fam_, static_cast<long long>(params_.size())));
    return params_[static_cast<std::size_t>(level)];
  }

  const LevelGeometry& geometry(long long level) {
    auto it = geom_.find(level);
    if (it == geom_.end())
      it = geom_.emplace(level, std::make_unique<LevelGeometry>(
                                    LevelGeometry::build(fam_, grid_shape(level)))).first;
    return *it->second;
  }

  // one Ruelle step with the level's standard exponent 2*delta
  CylinderGrid apply(const CylinderGrid& f) {
    long long n = f.level();
    return detail::apply_with_table(f, weights(n), geometry(n + 1));
  }

  // one Ruelle step with an arbitrary potential exponent
  CylinderGrid apply_with_exponent(const CylinderGrid& f, double s_exp) {
    long long n = f.level();
    auto w = detail::build_weight_table(fam_, n, s_exp, f.shape().widths[0],
                                        geometry(n + 1), cfg_.taylor_cap);
    return detail::apply_with_table(f, w, geometry(n + 1));
  }

  const NormalizerTrack& normalizer(long long level) {
    if (level < ladder_base_)
      throw std::logic_error("normalizer ladder dropped below requested level");
    while (ladder_base_ + static_cast<long long>(ladder_.size()) <= level) {
      const NormalizerTrack& prev = ladder_.back();
      NormalizerTrack next;
      next.level = prev.level + 1;
      next.grid = apply(prev.grid);
      next.grid.normalize();
      next.oscillation = next.grid.max_value() / next.grid.min_value() - 1.0;
      if (std::abs(next.grid.log_scale()) > 1e15)
        throw std::overflow_error("normalizer log scale out of range");
      if (!std::isfinite(next.grid.log_scale()) || !(next.grid.min_value() > 0))
        throw std::runtime_error("normalizer degenerated at level " +
                                 std::to_string(next.level) +
                                 " (digit scale beyond double range?)");
      ladder_.push_back(std::move(next));
    }
    return ladder_[static_cast<std::size_t>(level - ladder_base_)];
  }

  // free memory held for levels below `level` (ladder and geometry)
  void drop_below(long long level) {
    while (ladder_base_ < level && ladder_.size() > 1) {
      ladder_.pop_front();
      ++ladder_base_;
    }
    for (auto it = geom_.begin(); it != geom_.end();)
      it = (it->first + 1 < level) ? geom_.erase(it) : std::next(it);
    for (auto it = weights_.begin(); it != weights_.end();)
      it = (it->first + 1 < level) ? weights_.erase(it) : std::next(it);
  }

  // P_n^k(f) = L_n^k(f * G_n) / G_{n+k}
  CylinderGrid ratio_apply(const CylinderGrid& f, int k) {
    if (k < 0) throw std::invalid_argument("ratio_apply: need k >= 0");
    long long n = f.level();
    CylinderGrid num = hadamard(f, normalizer(n).grid);
    for (int i = 0; i < k; ++i) {
      num = apply(num);
      num.normalize();
    }
    return ratio_divide(num, normalizer(n + k).grid);
  }

  // int f dnu_n as the limit of P_n^k(f); stops when the grid oscillation and
  // the midpoint drift both fall below tol.
  IntegrateResult integrate(const CylinderGrid& f, double tol) {
    if (!(tol > 0)) throw std::invalid_argument("integrate: need tol > 0");
    double scale = std::exp(f.log_scale());
    double mn = f.min_value() * scale, mx = f.max_value() * scale;
    if (mx - mn < tol) return {0.5 * (mn + mx), 0, mx - mn};
    long long n = f.level();
    CylinderGrid num = hadamard(f, normalizer(n).grid);
    std::vector<double> trace;
    double prev_mid = std::numeric_limits<double>::quiet_NaN();
    for (int k = 1; k <= cfg_.max_steps; ++k) {
      num = apply(num);
      num.normalize();
      CylinderGrid r = ratio_divide(num, normalizer(n + k).grid);
      double lo = r.min_value(), hi = r.max_value();
      double osc = hi - lo, mid = 0.5 * (lo + hi);
      trace.push_back(osc);
      if (osc < tol && !std::isnan(prev_mid) && std::abs(mid - prev_mid) < tol)
        return {mid, k, osc};
      prev_mid = mid;
    }
    throw IntegrateError("integrate: no convergence after " +
                             std::to_string(cfg_.max_steps) + " steps at level " +
                             std::to_string(n),
                         std::move(trace));
  }

  // slot-wise num/den honoring both log scales; result has scale 0
  static CylinderGrid ratio_divide(const CylinderGrid& num, const CylinderGrid& den) {
    num.require_same_shape(den);
    CylinderGrid out(num.shape());
    double f = std::exp(num.log_scale() - den.log_scale());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = num[i] / den[i] * f;
    return out;
  }

  // builders wired to this engine's family and geometry; tail-bucket moments
  // are frozen at the midpoint of the next level's representative range
  CylinderGrid ones(long long level) { return ones_grid(grid_shape(level)); }
  double tail_xi_hat(long long level) {
    const LevelGeometry& g = geometry(level + 1);
    return 0.5 * (g.rep_min + g.rep_max);
  }
  CylinderGrid log_poly(long long level, const std::vector<double>& coeff) {
    return log_poly_grid(fam_, geometry(level), coeff, 2.0 * params(level).delta,
                         tail_xi_hat(level));
  }
  // gamma_n * log(digit) + log(gamma_n)  (the centered statistic before
  // subtracting its nu_n-integral)
  CylinderGrid digit_log_stat(long long level) {
    const LevelParams& lp = params(level);
    return log_poly(level, {std::log(lp.gamma), lp.gamma});
  }
  CylinderGrid value_fn(long long level) {
    return value_grid(fam_, geometry(level), 2.0 * params(level).delta,
                      tail_xi_hat(level));
  }
  CylinderGrid indicator(long long level, int index = 0) {
    return first_digit_indicator(grid_shape(level), index);
  }

 private:
  const detail::WeightTable& weights(long long level) {
    auto it = weights_.find(level);
    if (it == weights_.end())
      it = weights_.emplace(level, detail::build_weight_table(
                                        fam_, level, 2.0 * params(level).delta,
                                        cfg_.width, geometry(level + 1),
                                        cfg_.taylor_cap)).first;
    return it->second;
  }

  AlphaFamily fam_;
  EngineConfig cfg_;
  std::vector<LevelParams> params_;
  std::map<long long, std::unique_ptr<LevelGeometry>> geom_;
  std::map<long long, detail::WeightTable> weights_;
  std::deque<NormalizerTrack> ladder_;
  long long ladder_base_ = 0;
};

// advance G one level; the spec-level entry point behind the ladder
inline NormalizerTrack advance_normalizer(TransferEngine& eng, const NormalizerTrack& track) {
  NormalizerTrack next;
  next.level = track.level + 1;
  next.grid = eng.apply(track.grid);
  next.grid.normalize();
  next.oscillation = next.grid.max_value() / next.grid.min_value() - 1.0;
  return next;
}

// log of the Lemma-style envelope b+ = prod_{k<n} gamma_k^{-1} (alpha_k-1)^{-gamma_k}
inline double log_b_plus(TransferEngine& eng, long long n) {
  double acc = 0;
  for (long long k = 0; k < n; ++k) {
    const LevelParams& lp = eng.params(k);
    acc += -std::log(lp.gamma) - lp.gamma * std::log(lp.alpha - 1.0);
  }
  return acc;
}

}  // namespace rcf
