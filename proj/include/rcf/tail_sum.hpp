#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace rcf {

namespace detail {

// Terms c * log(y)^i * y^(-p); closed under d/dy, which is all the
// Euler-Maclaurin corrections need.
struct PowLogTerm {
  double coef;
  int logpow;
  double pow;
};

template <std::size_t N>
struct TermList {
  std::array<PowLogTerm, N> t{};
  std::size_t size = 0;
  void add(double c, int i, double p) { t[size++] = {c, i, p}; }
};

// d/dy [c log^i y * y^-p] = c*i*log^{i-1} y * y^{-p-1} - c*p*log^i y * y^{-p-1}
template <std::size_t N>
TermList<N> differentiate(const TermList<N>& in) {
  TermList<N> out;
  for (std::size_t k = 0; k < in.size; ++k) {
    const auto& tm = in.t[k];
    if (tm.logpow > 0) out.add(tm.coef * tm.logpow, tm.logpow - 1, tm.pow + 1);
    out.add(-tm.coef * tm.pow, tm.logpow, tm.pow + 1);
  }
  return out;
}

template <std::size_t N>
double eval_terms(const TermList<N>& tl, double logy) {
  double acc = 0;
  for (std::size_t k = 0; k < tl.size; ++k) {
    const auto& tm = tl.t[k];
    acc += tm.coef * std::pow(logy, tm.logpow) * std::exp(-tm.pow * logy);
  }
  return acc;
}

// int_y0^inf log^j(y) y^-s dy = e^{-cL} * j!/c^{j+1} * sum_{i<=j} (cL)^i/i!,
// where c = s-1 and L = log y0.
inline double powlog_integral(double s, int j, double logy0) {
  double c = s - 1.0;
  double cl = c * logy0;
  double fact = 1.0, sum = 0.0, term = 1.0;
  for (int i = 0; i <= j; ++i) {
    if (i > 0) {
      term *= cl / i;
      fact *= i;
    }
    sum += term;
  }
  double base = std::exp(-cl) * fact / std::pow(c, j + 1);
  return base * sum;
}

// Smooth tail evaluated from a real point y0 = x + xi: explicit-sum handover
// happens in power_log_tail, so this is pure Euler-Maclaurin:
//   integral + f/2 - f'/12 + f'''/720.
inline double em_tail(double s, int j, double y0) {
  if (j == 0) {
    // closed form on the sampler's hot path
    double inv = 1.0 / y0;
    double f = std::exp(-s * std::log(y0));
    return f * (y0 / (s - 1.0) + 0.5 + (s / 12.0) * inv -
                (s * (s + 1.0) * (s + 2.0) / 720.0) * inv * inv * inv);
  }
  double L = std::log(y0);
  TermList<16> f;
  f.add(1.0, j, s);
  auto f1 = differentiate(f);
  auto f3 = differentiate(differentiate(f1));
  return powlog_integral(s, j, L) + 0.5 * eval_terms(f, L) -
         eval_terms(f1, L) / 12.0 + eval_terms(f3, L) / 720.0;
}

inline double em_log_tail(double s, double y_log) {
  // log of em_tail(s, 0, e^{y_log}); factored to survive y^{-s} underflow
  double c = s - 1.0;
  double base = -c * y_log - std::log(c);
  double ey = std::exp(-y_log);
  double corr1 = c * (0.5 * ey + (s / 12.0) * ey * ey) -
                 (s * (s + 1) * (s + 2) * c / 720.0) * ey * ey * ey * ey;
  return base + std::log1p(corr1);
}

}  // namespace detail

// sum_{a >= start} log^j(a+xi) / (a+xi)^s for s > 1, j in 0..4.  Explicit
// terms carry the sum to a point where the order-2 Euler-Maclaurin tail is
// accurate to ~1e-12 relative.
inline double power_log_tail(double s, int j, double start, double xi) {
  if (!(s > 1.0)) throw std::domain_error("power_log_tail: diverges for s <= 1");
  if (!(start >= 1.0)) throw std::domain_error("power_log_tail: need start >= 1");
  if (j < 0 || j > 4) throw std::domain_error("power_log_tail: j must be 0..4");
  double cutoff = std::max(start, 128.0);
  double sum = 0, comp = 0;
  for (double a = start; a < cutoff; a += 1.0) {
    double y = a + xi;
    double ly = std::log(y);
    double term = std::exp(-s * ly);
    for (int i = 0; i < j; ++i) term *= ly;
    double t1 = term - comp, t2 = sum + t1;
    comp = (t2 - sum) - t1;
    sum = t2;
  }
  return sum + detail::em_tail(s, j, cutoff + xi);
}

// spec-facing form: sum_{a >= start} log^j(a+xi) / (a+xi)^{2 delta}
inline double tail_sum(double delta, long long start, double xi, int j) {
  if (!(2.0 * delta > 1.0)) throw std::domain_error("tail_sum: need 2*delta > 1");
  return power_log_tail(2.0 * delta, j, static_cast<double>(start), xi);
}

}  // namespace rcf
