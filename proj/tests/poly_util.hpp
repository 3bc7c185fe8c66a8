#pragma once

// Polynomial and rational-function helpers for the one-dimensional quadrature
// oracles. Independent of the jet machinery they are used to validate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "raretail/jet.hpp"
#include "raretail/oracle.hpp"

namespace testutil {

using Poly = std::vector<double>;  // power-basis coefficients

inline double peval(const Poly& p, double t) {
  double r = 0;
  for (std::size_t i = p.size(); i-- > 0;) r = r * t + p[i];
  return r;
}

inline Poly pderiv(const Poly& p) {
  Poly r;
  for (std::size_t i = 1; i < p.size(); ++i) r.push_back(p[i] * static_cast<double>(i));
  if (r.empty()) r.push_back(0.0);
  return r;
}

inline Poly pmul(const Poly& a, const Poly& b) {
  Poly r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

inline Poly psub(const Poly& a, const Poly& b) {
  Poly r(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) r[i] -= b[i];
  return r;
}

// Rational function num/den; closed under f -> (f / h')'.
struct Rational {
  Poly num, den;
  double eval(double t) const { return peval(num, t) / peval(den, t); }
};

inline Rational apply_Dh(const Rational& f, const Poly& hp) {
  const Poly den = pmul(f.den, hp);
  const Poly num = psub(pmul(pderiv(f.num), den), pmul(f.num, pderiv(den)));
  return {num, pmul(den, den)};
}

inline double sup_abs_on_interval(const Rational& r, double T) {
  const int n = 4000;
  double best = 0, tbest = 0;
  for (int i = 0; i <= n; ++i) {
    const double t = T * i / n;
    const double v = std::abs(r.eval(t));
    if (v > best) {
      best = v;
      tbest = t;
    }
  }
  double lo = std::max(0.0, tbest - T / n), hi = std::min(T, tbest + T / n);
  for (int it = 0; it < 80; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (std::abs(r.eval(m1)) < std::abs(r.eval(m2)))
      lo = m1;
    else
      hi = m2;
  }
  return std::max(best, std::abs(r.eval(0.5 * (lo + hi))));
}

inline double integral_oracle(const Poly& f, const Poly& h, double lambda, double T) {
  raretail::detail::SimpsonState st;
  return raretail::detail::adaptive_simpson(
      [&](double t) { return peval(f, t) * std::exp(-lambda * peval(h, t)); }, 0.0, T, 1e-14, st);
}

inline raretail::Jetd jet_from_poly(const Poly& p, int order) {
  std::vector<double> d(static_cast<std::size_t>(order) + 1, 0.0);
  double fact = 1;
  for (int j = 0; j <= order; ++j) {
    if (j > 0) fact *= j;
    if (static_cast<std::size_t>(j) < p.size())
      d[static_cast<std::size_t>(j)] = p[static_cast<std::size_t>(j)] * fact;
  }
  return raretail::Jetd(d);
}

}  // namespace testutil
