#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcf {

// Digit-floor sequences (alpha_n).  The formula value is ceiling-rounded to
// an integer and shifted by `offset`; every family must satisfy alpha_n >= 2.
// For very fast-growing families alpha_n exceeds the double range long before
// n does, so log(alpha_n) is always available separately.
struct AlphaFamily {
  enum class Kind { polynomial, geometric, doubly_exponential, explicit_list };

  Kind kind = Kind::geometric;
  double c = 4.0;        // scale (polynomial/geometric), base mantissa (doubly exp)
  double p = 1.5;        // polynomial exponent
  double lambda = 2.0;   // geometric ratio
  double b = 2.0;        // doubly exponential exponent base
  long long offset = 0;  // added after rounding
  std::vector<long long> digits;  // explicit kind

  static AlphaFamily polynomial(double c, double p, long long offset = 0) {
    AlphaFamily f;
    f.kind = Kind::polynomial;
    f.c = c;
    f.p = p;
    f.offset = offset;
    f.validate();
    return f;
  }
  static AlphaFamily geometric(double c, double lambda, long long offset = 0) {
    AlphaFamily f;
    f.kind = Kind::geometric;
    f.c = c;
    f.lambda = lambda;
    f.offset = offset;
    f.validate();
    return f;
  }
  static AlphaFamily doubly_exponential(double c, double b, long long offset = 0) {
    AlphaFamily f;
    f.kind = Kind::doubly_exponential;
    f.c = c;
    f.b = b;
    f.offset = offset;
    f.validate();
    return f;
  }
  static AlphaFamily explicit_digits(std::vector<long long> ds, long long offset = 0) {
    AlphaFamily f;
    f.kind = Kind::explicit_list;
    f.digits = std::move(ds);
    f.offset = offset;
    f.validate();
    return f;
  }

  void validate() const {
    switch (kind) {
      case Kind::polynomial:
        if (!(c > 0) || !(p > 0))
          throw std::invalid_argument("polynomial family needs c > 0, p > 0");
        break;
      case Kind::geometric:
        if (!(c >= 1) || !(lambda > 1))
          throw std::invalid_argument("geometric family needs c >= 1, lambda > 1");
        break;
      case Kind::doubly_exponential:
        if (!(c > 1) || !(b > 1))
          throw std::invalid_argument("doubly exponential family needs c > 1, b > 1");
        break;
      case Kind::explicit_list:
        if (digits.empty())
          throw std::invalid_argument("explicit family needs at least one digit");
        for (auto d : digits)
          if (d + offset < 2)
            throw std::invalid_argument("explicit family digit below 2");
        break;
    }
    if (alpha(0) < 2.0)
      throw std::invalid_argument("alpha_0 < 2; increase offset");
  }

  // Ceiling with a guard against ties produced by inexact pow: values within
  // 1e-9 (relative) of an integer are taken as that integer.
  static double ceil_guarded(double x) {
    double r = std::nearbyint(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return r;
    return std::ceil(x);
  }

  // alpha_n as a double (exact while below 2^53, +inf when out of range)
  double alpha(long long n) const {
    switch (kind) {
      case Kind::polynomial:
        return ceil_guarded(c * std::pow(static_cast<double>(n), p)) + static_cast<double>(offset);
      case Kind::geometric:
        return ceil_guarded(c * std::pow(lambda, static_cast<double>(n))) + static_cast<double>(offset);
      case Kind::doubly_exponential: {
        double la = std::pow(b, static_cast<double>(n)) * std::log(c);
        if (la > 690.0) return std::numeric_limits<double>::infinity();
        return ceil_guarded(std::exp(la)) + static_cast<double>(offset);
      }
      case Kind::explicit_list:
        if (n < 0 || static_cast<std::size_t>(n) >= digits.size())
          throw std::out_of_range("explicit family: index " + std::to_string(n) +
                                  " beyond digit list of length " + std::to_string(digits.size()));
        return static_cast<double>(digits[static_cast<std::size_t>(n)] + offset);
    }
    return 0;
  }

  // log(alpha_n); finite for any n the double range can express.  Beyond the
  // range of alpha itself the rounding and offset are far below double
  // resolution, so the formula value stands in.
  double log_alpha(long long n) const {
    double a = alpha(n);
    if (std::isfinite(a)) return std::log(a);
    switch (kind) {
      case Kind::polynomial:
        return std::log(c) + p * std::log(static_cast<double>(n));
      case Kind::geometric:
        return std::log(c) + static_cast<double>(n) * std::log(lambda);
      case Kind::doubly_exponential:
        return std::pow(b, static_cast<double>(n)) * std::log(c);
      case Kind::explicit_list:
        break;  // explicit digits always fit
    }
    return std::log(a);
  }

  bool summable() const {
    switch (kind) {
      case Kind::polynomial: return p > 1;
      case Kind::geometric:
      case Kind::doubly_exponential:
      case Kind::explicit_list: return true;
    }
    return false;
  }

  std::string describe() const {
    char buf[128];
    switch (kind) {
      case Kind::polynomial:
        std::snprintf(buf, sizeof buf, "polynomial(c=%g,p=%g,offset=%lld)", c, p, offset);
        break;
      case Kind::geometric:
        std::snprintf(buf, sizeof buf, "geometric(c=%g,lambda=%g,offset=%lld)", c, lambda, offset);
        break;
      case Kind::doubly_exponential:
        std::snprintf(buf, sizeof buf, "doubly_exponential(c=%g,b=%g,offset=%lld)", c, b, offset);
        break;
      case Kind::explicit_list:
        std::snprintf(buf, sizeof buf, "explicit(%zu digits,offset=%lld)", digits.size(), offset);
        break;
    }
    return buf;
  }
};

// alpha_n as an exact integer; throws when the value cannot be represented.
inline long long alpha_at(const AlphaFamily& fam, long long n) {
  double a = fam.alpha(n);
  if (!(a < 9.2e18))
    throw std::overflow_error("alpha_n exceeds the integer range at n = " + std::to_string(n));
  return static_cast<long long>(a);
}

// Unique gamma in (0,1] with gamma * alpha^gamma = 1, for log(alpha) = L >= 0.
// Solves g(gamma) = log(gamma) + gamma*L = 0 by Newton steps clipped to a
// shrinking bracket (g is increasing and concave).
inline double gamma_of_log_alpha(double L) {
  if (!(L >= 0)) throw std::domain_error("gamma_of_log_alpha: need alpha >= 1");
  if (L == 0) return 1.0;
  double lo = std::numeric_limits<double>::min();
  double hi = 1.0;
  // seed from the Lambert-W asymptotics W(L) ~ log L - log log L
  double g = (L > 2.0) ? std::exp(-(std::log(L) - std::log(std::log(L)))) : 0.5;
  if (!(g > 0) || !(g < 1)) g = 0.5;
  for (int it = 0; it < 200; ++it) {
    double val = std::log(g) + g * L;
    if (std::abs(val) < 1e-14) break;
    if (val > 0) hi = g; else lo = g;
    double step = val / (1.0 / g + L);
    double next = g - step;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (next == g) break;
    g = next;
  }
  return g;
}

inline double gamma_of_alpha(double alpha) {
  if (!(alpha >= 1)) throw std::domain_error("gamma_of_alpha: need alpha >= 1");
  return gamma_of_log_alpha(std::log(alpha));
}

// loglog(alpha)/log(alpha); cross-check only, requires alpha > e
inline double gamma_asymptotic(double alpha) {
  if (!(alpha > std::exp(1.0)))
    throw std::domain_error("gamma_asymptotic: need alpha > e");
  double L = std::log(alpha);
  return std::log(L) / L;
}

// Scalars attached to one level: alpha_n, gamma_n (gamma*alpha^gamma = 1),
// delta_n = (gamma_n+1)/2 and the distortion scale eps_n = 1/(alpha_n*alpha_{n-1}).
struct LevelParams {
  long long n = 0;
  double alpha = 2.0;      // +inf when beyond double range
  double log_alpha = 0.0;
  double gamma = 1.0;
  double delta = 1.0;      // (gamma+1)/2
  double epsilon = 0.25;   // eps_0 := 1/alpha_0^2

  static LevelParams at(const AlphaFamily& fam, long long n) {
    LevelParams lp;
    lp.n = n;
    lp.alpha = fam.alpha(n);
    lp.log_alpha = fam.log_alpha(n);
    lp.gamma = gamma_of_log_alpha(lp.log_alpha);
    lp.delta = 0.5 * (lp.gamma + 1.0);
    double prev = (n == 0) ? lp.alpha : fam.alpha(n - 1);
    lp.epsilon = 1.0 / (lp.alpha * prev);  // underflows to 0 for huge alpha
    return lp;
  }
};

struct SummabilityReport {
  double partial_sum = 0;
  double tail_bound = 0;  // analytic bound on the omitted tail
  bool converges = false;
};

inline SummabilityReport summability_report(const AlphaFamily& fam, long long N) {
  if (N < 10) throw std::invalid_argument("summability_report: need N >= 10");
  SummabilityReport rep;
  rep.converges = fam.summable();
  long long last = N;
  if (fam.kind == AlphaFamily::Kind::explicit_list)
    last = std::min<long long>(N, static_cast<long long>(fam.digits.size()) - 1);
  double sum = 0, comp = 0;
  for (long long n = 0; n <= last; ++n) {
    double term = 1.0 / fam.alpha(n);
    double y = term - comp, t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  rep.partial_sum = sum;
  switch (fam.kind) {
    case AlphaFamily::Kind::polynomial:
      // integral bound for sum_{n>N} 1/(c n^p), ignoring the helpful offset
      rep.tail_bound = (fam.p > 1)
          ? std::pow(static_cast<double>(N), 1.0 - fam.p) / (fam.c * (fam.p - 1.0))
          : std::numeric_limits<double>::infinity();
      break;
    case AlphaFamily::Kind::geometric:
      rep.tail_bound = 1.0 / (fam.c * std::pow(fam.lambda, static_cast<double>(N + 1))) *
                       fam.lambda / (fam.lambda - 1.0);
      break;
    case AlphaFamily::Kind::doubly_exponential: {
      // ratios alpha_{n}/alpha_{n+1} <= 1/2 beyond any point where alpha >= 2
      double la = fam.log_alpha(N + 1);
      rep.tail_bound = (la > 690.0) ? 0.0 : 2.0 * std::exp(-la);
      break;
    }
    case AlphaFamily::Kind::explicit_list:
      rep.tail_bound = 0.0;  // finite list
      break;
  }
  return rep;
}

struct GrowthConditionReport {
  std::vector<double> e_n;   // e_n[i] holds E_{i+1}
  double window_max = 0;
  double window_slope = 0;
  bool satisfied = false;
};

// E_n = (1/n)( (log a_n)/2 * ((1+delta) log n / loglog a_n + 1) - sum_{k<n} loglog a_k ).
// The family is accepted when the window [N/2, N] stays below 1 with a
// non-increasing trend.
inline GrowthConditionReport growth_condition(const AlphaFamily& fam, double delta, long long N) {
  if (!(delta > 0)) throw std::invalid_argument("growth_condition: need delta > 0");
  if (N < 4) throw std::invalid_argument("growth_condition: need N >= 4");
  GrowthConditionReport rep;
  rep.e_n.reserve(static_cast<std::size_t>(N));
  double prefix = 0;  // sum_{k<n} loglog alpha_k
  for (long long n = 1; n <= N; ++n) {
    double la_prev = fam.log_alpha(n - 1);
    if (!(la_prev > 0))
      throw std::domain_error("growth_condition: loglog undefined at k = " + std::to_string(n - 1));
    prefix += std::log(la_prev);
    double la = fam.log_alpha(n);
    double lla = std::log(la);
    if (!(lla > 0))
      throw std::domain_error("growth_condition: loglog alpha_n <= 0 at n = " + std::to_string(n));
    double term = 0.5 * la * ((1.0 + delta) * std::log(static_cast<double>(n)) / lla + 1.0);
    rep.e_n.push_back((term - prefix) / static_cast<double>(n));
  }
  long long w0 = N / 2;
  double mx = -std::numeric_limits<double>::infinity();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long long cnt = 0;
  for (long long n = w0; n <= N; ++n) {
    double e = rep.e_n[static_cast<std::size_t>(n - 1)];
    mx = std::max(mx, e);
    double x = static_cast<double>(n);
    sx += x; sy += e; sxx += x * x; sxy += x * e;
    ++cnt;
  }
  rep.window_max = mx;
  double denom = cnt * sxx - sx * sx;
  rep.window_slope = (denom != 0) ? (cnt * sxy - sx * sy) / denom : 0.0;
  double slope_tol = 1e-6 * std::max(1.0, std::abs(mx));
  rep.satisfied = (mx < 1.0) && (rep.window_slope <= slope_tol);
  return rep;
}

}  // namespace rcf
