#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rcf/alpha_family.hpp"

namespace rcf {

// A point of X_level given by finitely many digits, padded with the canonical
// minimal tail (alpha_{level+len}, alpha_{level+len+1}, ...).  Digits are
// doubles so that families beyond the integer range still index correctly.
struct CfPoint {
  long long level = 0;
  std::vector<double> digits;
};

namespace detail {

// Backward evaluation of [d_0, d_1, ..., d_{m-1}] (terminating).
inline double eval_terminating(const std::vector<double>& ds, std::size_t m) {
  double v = 0.0;
  for (std::size_t i = m; i-- > 0;) v = 1.0 / (ds[i] + v);
  return v;
}

}  // namespace detail

// Value of the all-minimal point [alpha_level, alpha_{level+1}, ...].
// Successive terminating convergents bracket the value; stop once the
// enclosure is below 1e-15 relative.
inline double minimal_tail_value(const AlphaFamily& fam, long long level) {
  std::vector<double> ds;
  double prev = 0, cur = 0;
  for (int depth = 1; depth <= 64; ++depth) {
    long long idx = level + depth - 1;
    if (fam.kind == AlphaFamily::Kind::explicit_list &&
        static_cast<std::size_t>(idx) >= fam.digits.size())
      ds.push_back(ds.empty() ? 2.0 : ds.back());  // continue the last digit
    else
      ds.push_back(fam.alpha(idx));
    prev = cur;
    cur = detail::eval_terminating(ds, ds.size());
    if (depth >= 2 && std::abs(cur - prev) < 1e-15 * cur) break;
    if (!std::isfinite(ds.back()) || ds.back() > 1e18) break;  // tail below resolution
  }
  return cur;
}

// Value of a CfPoint with minimal-tail padding, enclosure width < 1e-15*value.
inline double cf_value(const AlphaFamily& fam, const CfPoint& pt) {
  if (pt.digits.empty())
    throw std::invalid_argument("cf_value: empty digit list");
  for (double d : pt.digits)
    if (!(d >= 1)) throw std::domain_error("cf_value: digits must be >= 1");
  double tail = minimal_tail_value(fam, pt.level + static_cast<long long>(pt.digits.size()));
  double v = tail;
  for (std::size_t i = pt.digits.size(); i-- > 0;) v = 1.0 / (pt.digits[i] + v);
  return v;
}

// Terminating value of an explicit digit list, no padding.
inline double cf_value_terminating(const std::vector<double>& digits) {
  if (digits.empty())
    throw std::invalid_argument("cf_value: empty digit list");
  return detail::eval_terminating(digits, digits.size());
}

// phi_level(x) = value^{2 delta_level}; log-space entry for products
inline double potential_value(double two_delta, double value) {
  if (!(value > 0)) throw std::domain_error("potential_value: need value > 0");
  return std::exp(two_delta * std::log(value));
}

inline double log_potential_value(double two_delta, double log_value) {
  return two_delta * log_value;
}

// log S^k(x) for k = 0..n-1 computed by one backward pass from the digit
// logs: log S^k = -(log x_k + log1p(exp(log S^{k+1} - log x_k))).  The seed
// beyond position n contributes O(prod 1/x^2) and is below double noise after
// the first few factors; callers wanting full accuracy at k near n should
// pass a trajectory longer than n.
inline std::vector<double> log_shift_values(const std::vector<double>& log_digits) {
  std::size_t n = log_digits.size();
  std::vector<double> ls(n);
  double next = 0.0;  // log S^n seed: S in (0,1), log <= 0; start from 1
  for (std::size_t k = n; k-- > 0;) {
    double cur = -(log_digits[k] + std::log1p(std::exp(next - log_digits[k])));
    ls[k] = cur;
    next = cur;
  }
  return ls;
}

// log q_m along the convergent recurrence q_m = x_{m-1} q_{m-1} + q_{m-2},
// q_0 = 1; stable in log space for arbitrarily large digits.
inline std::vector<double> log_q_from_digits(const std::vector<double>& log_digits) {
  std::size_t n = log_digits.size();
  std::vector<double> lq(n + 1);
  lq[0] = 0.0;
  if (n == 0) return lq;
  lq[1] = log_digits[0];
  for (std::size_t m = 2; m <= n; ++m)
    lq[m] = log_digits[m - 1] + lq[m - 1] +
            std::log1p(std::exp(lq[m - 2] - lq[m - 1] - log_digits[m - 1]));
  return lq;
}

}  // namespace rcf
