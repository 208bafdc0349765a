#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcf/alpha_family.hpp"
#include "rcf/continued_fraction.hpp"
#include "rcf/tail_sum.hpp"

namespace rcf {

// A function on X_level that is constant on depth-d cylinders.  Slot i of the
// index tuple covers level+i with alphabet truncation widths[i]: indices
// 0..widths[i]-1 are the digits alpha_{level+i}+j, index widths[i] is the
// aggregated tail bucket (representative digit alpha_{level+i}+widths[i]).
struct GridShape {
  long long level = 0;
  std::vector<int> widths;

  int depth() const { return static_cast<int>(widths.size()); }
  std::size_t slots() const {
    std::size_t s = 1;
    for (int w : widths) s *= static_cast<std::size_t>(w + 1);
    return s;
  }
  bool operator==(const GridShape& o) const {
    return level == o.level && widths == o.widths;
  }
};

// Representative values for every slot of a shape: the value of the point
// with the slot's digits continued by the minimal tail.
struct LevelGeometry {
  GridShape shape;
  std::vector<double> rep_value;
  double alpha0 = 2;  // digit floor at the leading coordinate
  double xi_min = 0;  // minimal-tail value at shape.level
  double rep_min = 0, rep_max = 0;

  double first_digit(std::size_t slot) const {
    std::size_t inner = rep_value.size() / static_cast<std::size_t>(shape.widths[0] + 1);
    return alpha0 + static_cast<double>(slot / inner);
  }

  static LevelGeometry build(const AlphaFamily& fam, const GridShape& shape) {
    LevelGeometry g;
    g.shape = shape;
    int d = shape.depth();
    std::vector<double> alphas(d);
    for (int i = 0; i < d; ++i) alphas[i] = fam.alpha(shape.level + i);
    g.alpha0 = alphas[0];
    double tail = minimal_tail_value(fam, shape.level + d);
    g.xi_min = minimal_tail_value(fam, shape.level);
    std::size_t n = shape.slots();
    g.rep_value.resize(n);
    std::vector<int> idx(d, 0);
    for (std::size_t s = 0; s < n; ++s) {
      double v = tail;
      for (int i = d; i-- > 0;) v = 1.0 / (alphas[i] + idx[i] + v);
      g.rep_value[s] = v;
      for (int i = d; i-- > 0;) {
        if (++idx[i] <= shape.widths[i]) break;
        idx[i] = 0;
      }
    }
    g.rep_min = *std::min_element(g.rep_value.begin(), g.rep_value.end());
    g.rep_max = *std::max_element(g.rep_value.begin(), g.rep_value.end());
    return g;
  }
};

class CylinderGrid {
 public:
  CylinderGrid() = default;
  CylinderGrid(GridShape shape, double fill = 0.0)
      : shape_(std::move(shape)), v_(shape_.slots(), fill) {}

  const GridShape& shape() const { return shape_; }
  long long level() const { return shape_.level; }
  int depth() const { return shape_.depth(); }
  std::size_t size() const { return v_.size(); }
  double log_scale() const { return log_scale_; }
  void set_log_scale(double ls) { log_scale_ = ls; }

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }

  double min_value() const { return *std::min_element(v_.begin(), v_.end()); }
  double max_value() const { return *std::max_element(v_.begin(), v_.end()); }
  double max_abs() const {
    double m = 0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  // max - min including the factored scale
  double oscillation() const {
    return (max_value() - min_value()) * std::exp(log_scale_);
  }

  // rescale so that max |value| = 1, folding the factor into log_scale
  void normalize() {
    double m = max_abs();
    if (m <= 0 || !std::isfinite(m)) return;
    for (double& x : v_) x /= m;
    log_scale_ += std::log(m);
  }

  CylinderGrid& operator+=(const CylinderGrid& o) {
    require_same_shape(o);
    double f = std::exp(o.log_scale_ - log_scale_);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += f * o.v_[i];
    return *this;
  }
  CylinderGrid& operator-=(const CylinderGrid& o) {
    require_same_shape(o);
    double f = std::exp(o.log_scale_ - log_scale_);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= f * o.v_[i];
    return *this;
  }
  CylinderGrid& operator*=(double c) {
    for (double& x : v_) x *= c;
    return *this;
  }
  CylinderGrid& shift(double c) {  // add the constant c (in unscaled units)
    double f = std::exp(-log_scale_);
    for (double& x : v_) x += c * f;
    return *this;
  }
  // slot-wise product; log scales add
  friend CylinderGrid hadamard(const CylinderGrid& a, const CylinderGrid& b) {
    a.require_same_shape(b);
    CylinderGrid r(a.shape_);
    for (std::size_t i = 0; i < r.v_.size(); ++i) r.v_[i] = a.v_[i] * b.v_[i];
    r.log_scale_ = a.log_scale_ + b.log_scale_;
    return r;
  }

  void require_same_shape(const CylinderGrid& o) const {
    if (!(shape_ == o.shape_))
      throw std::invalid_argument("cylinder grid shape mismatch");
  }

 private:
  GridShape shape_;
  std::vector<double> v_;
  double log_scale_ = 0.0;
};

// Slot index of the digit tuple (coordinate-0 major); digits beyond the
// truncation land in the tail bucket.
inline std::size_t slot_of_digits(const AlphaFamily& fam, const GridShape& sh,
                                  const std::vector<double>& digits) {
  std::size_t s = 0;
  for (int i = 0; i < sh.depth(); ++i) {
    double a = fam.alpha(sh.level + i);
    long long j = (i < static_cast<int>(digits.size()))
                      ? static_cast<long long>(std::min(digits[i] - a, static_cast<double>(sh.widths[i])))
                      : 0;
    if (j < 0) throw std::domain_error("digit below the level alphabet");
    s = s * (sh.widths[i] + 1) + static_cast<std::size_t>(j);
  }
  return s;
}

// ---- builders ---------------------------------------------------------

inline CylinderGrid ones_grid(const GridShape& sh) { return CylinderGrid(sh, 1.0); }

inline CylinderGrid grid_from_function(const LevelGeometry& g,
                                       const std::function<double(double rep_value, double first_digit)>& fn) {
  CylinderGrid out(g.shape);
  for (std::size_t s = 0; s < out.size(); ++s)
    out[s] = fn(g.rep_value[s], g.first_digit(s));
  return out;
}

// Polynomial in the digit logarithm, sum_i coeff[i] * log(first digit)^i.
// Explicit slots take the exact digit log; the coordinate-0 tail bucket takes
// the weight-averaged moments so that the aggregated branch sum is exact:
//   T_i = sum_{a>=cut} log^i(a+xi) (a+xi)^{-s} / sum_{a>=cut} (a+xi)^{-s}.
inline CylinderGrid log_poly_grid(const AlphaFamily& fam, const LevelGeometry& g,
                                  const std::vector<double>& coeff, double s_exp,
                                  double xi_hat = -1.0) {
  int deg = static_cast<int>(coeff.size()) - 1;
  if (deg > 4) throw std::invalid_argument("log_poly_grid: degree must be <= 4");
  const GridShape& sh = g.shape;
  double alpha0 = fam.alpha(sh.level);
  double cut = alpha0 + sh.widths[0];
  double xi = (xi_hat >= 0) ? xi_hat : minimal_tail_value(fam, sh.level + 1);
  double t0 = power_log_tail(s_exp, 0, cut, xi);
  double tail_value = 0;
  for (int i = 0; i <= deg; ++i)
    tail_value += coeff[i] * (i == 0 ? 1.0 : power_log_tail(s_exp, i, cut, xi) / t0);
  CylinderGrid out(sh);
  std::size_t inner = sh.slots() / static_cast<std::size_t>(sh.widths[0] + 1);
  for (int j = 0; j <= sh.widths[0]; ++j) {
    double v;
    if (j < sh.widths[0]) {
      double lg = std::log(alpha0 + j);
      v = coeff[deg];
      for (int i = deg - 1; i >= 0; --i) v = v * lg + coeff[i];
    } else {
      v = tail_value;
    }
    for (std::size_t k = 0; k < inner; ++k) out[static_cast<std::size_t>(j) * inner + k] = v;
  }
  return out;
}

// The point-value function x -> [[x]]; coordinate-0 tail bucket takes the
// weighted mean of 1/(a+xi) over the aggregated digits.
inline CylinderGrid value_grid(const AlphaFamily& fam, const LevelGeometry& g, double s_exp,
                               double xi_hat = -1.0) {
  CylinderGrid out(g.shape);
  for (std::size_t s = 0; s < out.size(); ++s) out[s] = g.rep_value[s];
  const GridShape& sh = g.shape;
  double cut = fam.alpha(sh.level) + sh.widths[0];
  double xi = (xi_hat >= 0) ? xi_hat : minimal_tail_value(fam, sh.level + 1);
  double avg = power_log_tail(s_exp + 1.0, 0, cut, xi) / power_log_tail(s_exp, 0, cut, xi);
  std::size_t inner = sh.slots() / static_cast<std::size_t>(sh.widths[0] + 1);
  for (std::size_t k = 0; k < inner; ++k)
    out[static_cast<std::size_t>(sh.widths[0]) * inner + k] = avg;
  return out;
}

inline CylinderGrid first_digit_indicator(const GridShape& sh, int index = 0) {
  CylinderGrid out(sh);
  std::size_t inner = sh.slots() / static_cast<std::size_t>(sh.widths[0] + 1);
  for (std::size_t k = 0; k < inner; ++k)
    out[static_cast<std::size_t>(index) * inner + k] = 1.0;
  return out;
}

// f composed with the k-fold shift, as a grid at level sh.level where f lives
// at level sh.level+k.  Coordinates k..d-1 of the source slot select f's
// leading coordinates; f's trailing coordinates are padded with index 0,
// exact whenever f depends only on its first d-k coordinates.
inline CylinderGrid lift_through_shift(const CylinderGrid& f, const GridShape& sh, int k) {
  if (f.shape().level != sh.level + k)
    throw std::invalid_argument("lift_through_shift: level mismatch");
  int d = sh.depth();
  int df = f.depth();
  for (int i = k; i < d; ++i)
    if (sh.widths[i] != f.shape().widths[i - k])
      throw std::invalid_argument("lift_through_shift: width mismatch");
  CylinderGrid out(sh);
  std::vector<int> idx(d, 0);
  for (std::size_t s = 0; s < out.size(); ++s) {
    std::size_t fs = 0;
    for (int i = 0; i < df; ++i) {
      int j = (k + i < d) ? idx[k + i] : 0;
      fs = fs * (f.shape().widths[i] + 1) + static_cast<std::size_t>(j);
    }
    out[s] = f[fs];
    for (int i = d; i-- > 0;) {
      if (++idx[i] <= sh.widths[i]) break;
      idx[i] = 0;
    }
  }
  out.set_log_scale(f.log_scale());
  return out;
}

// ---- metric -----------------------------------------------------------

// Lipschitz constant on the grid resolution for d_r(x,y) = r^{i+1} where i is
// the first differing coordinate: max over i of r^{-(i+1)} * (range of values
// over slot groups sharing coordinates 0..i-1).
inline double lipschitz_estimate(const CylinderGrid& f, double r = 0.5) {
  const GridShape& sh = f.shape();
  int d = sh.depth();
  double best = 0;
  std::size_t block = f.size();
  double scale = std::exp(f.log_scale());
  for (int i = 0; i < d; ++i) {
    std::size_t groups = f.size() / block;
    double worst = 0;
    for (std::size_t gidx = 0; gidx < groups; ++gidx) {
      double lo = f[gidx * block], hi = lo;
      for (std::size_t k = 1; k < block; ++k) {
        double v = f[gidx * block + k];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      worst = std::max(worst, hi - lo);
    }
    best = std::max(best, worst * std::pow(r, -(i + 1)));
    block /= static_cast<std::size_t>(sh.widths[i] + 1);
  }
  return best * scale;
}

// ---- dump / load ------------------------------------------------------
// CSV with one metadata comment line, then a header row, then one row per
// slot: index tuple, representative value, slot value.

inline void dump_grid(std::ostream& os, const CylinderGrid& f, const LevelGeometry& g) {
  char buf[400];
  os << "# level=" << f.level() << " depth=" << f.depth() << " widths=";
  for (int i = 0; i < f.depth(); ++i) os << (i ? "," : "") << f.shape().widths[i];
  std::snprintf(buf, sizeof buf, " log_scale=%.17g\n", f.log_scale());
  os << buf;
  for (int i = 0; i < f.depth(); ++i) os << "i" << i << ",";
  os << "representative,value\n";
  std::vector<int> idx(f.depth(), 0);
  for (std::size_t s = 0; s < f.size(); ++s) {
    std::string row;
    for (int i = 0; i < f.depth(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,", idx[i]);
      row += buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", g.rep_value[s], f[s]);
    row += buf;
    os << row;
    for (int i = f.depth(); i-- > 0;) {
      if (++idx[i] <= f.shape().widths[i]) break;
      idx[i] = 0;
    }
  }
}

inline CylinderGrid load_grid(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# level=", 0) != 0)
    throw std::runtime_error("load_grid: missing metadata line");
  GridShape sh;
  double ls = 0;
  {
    long long level;
    if (std::sscanf(line.c_str(), "# level=%lld", &level) != 1)
      throw std::runtime_error("load_grid: bad level");
    sh.level = level;
    auto wpos = line.find("widths=");
    auto lpos = line.find("log_scale=");
    if (wpos == std::string::npos || lpos == std::string::npos)
      throw std::runtime_error("load_grid: bad metadata");
    std::string ws = line.substr(wpos + 7, line.find(' ', wpos) - wpos - 7);
    const char* pc = ws.c_str();
    while (*pc) {
      sh.widths.push_back(std::atoi(pc));
      const char* comma = std::strchr(pc, ',');
      if (!comma) break;
      pc = comma + 1;
    }
    ls = std::atof(line.c_str() + lpos + 10);
  }
  if (!std::getline(is, line)) throw std::runtime_error("load_grid: missing header");
  CylinderGrid out(sh);
  out.set_log_scale(ls);
  for (std::size_t s = 0; s < out.size(); ++s) {
    if (!std::getline(is, line)) throw std::runtime_error("load_grid: truncated table");
    const char* pc = line.c_str();
    for (int i = 0; i < sh.depth() + 1; ++i) {
      pc = std::strchr(pc, ',');
      if (!pc) throw std::runtime_error("load_grid: short row");
      ++pc;
    }
    out[s] = std::atof(pc);
  }
  return out;
}

}  // namespace rcf
