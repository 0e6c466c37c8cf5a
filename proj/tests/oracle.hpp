#pragma once

// Dense reference solver in long double, written without any library code: plain loops,
// kernel-free log-sum-exp, 10^4 damped fixed-point sweeps. Used to freeze expected values.

#include <cmath>
#include <vector>

namespace oracle {

using Real = long double;
using Vec = std::vector<Real>;
using Pts = std::vector<std::vector<Real>>;  // Pts[m] is one point

struct Solution {
  Vec f, g;
  std::vector<Vec> plan;
  Real ot = 0;
};

inline Real cost(const std::vector<Real>& x, const std::vector<Real>& y) {
  Real s = 0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return s / 2;
}

/// out_m = -eps log sum_n w_n exp((pot_n - C(x_m, y_n)) / eps)
inline Vec transform(const Pts& x, const Pts& y, const Vec& w, const Vec& pot, Real eps) {
  Vec out(x.size());
  for (std::size_t m = 0; m < x.size(); ++m) {
    Real peak = -INFINITY;
    std::vector<Real> t(y.size());
    for (std::size_t n = 0; n < y.size(); ++n) {
      t[n] = std::log(w[n]) + (pot[n] - cost(x[m], y[n])) / eps;
      if (t[n] > peak) peak = t[n];
    }
    Real s = 0;
    for (Real v : t) s += std::exp(v - peak);
    out[m] = -eps * (peak + std::log(s));
  }
  return out;
}

inline Solution finish(const Vec& a, const Pts& x, const Vec& b, const Pts& y, Vec f, Vec g, Real eps) {
  Real shift = 0;
  for (std::size_t m = 0; m < a.size(); ++m) shift += a[m] * f[m];
  for (auto& v : f) v -= shift;
  for (auto& v : g) v += shift;
  Solution s{f, g, {}, 0};
  s.plan.assign(a.size(), Vec(b.size()));
  for (std::size_t m = 0; m < a.size(); ++m)
    for (std::size_t n = 0; n < b.size(); ++n) {
      const Real c = cost(x[m], y[n]);
      const Real l = (f[m] + g[n] - c) / eps;
      const Real p = a[m] * b[n] * std::exp(l);
      s.plan[m][n] = p;
      if (p > 0) s.ot += p * (c + eps * l);
    }
  return s;
}

/// Damped simultaneous sweeps on the Schroedinger system: (f, g) <- ((f, g) + (T(g), T(f))) / 2.
inline Solution solve(const Vec& a, const Pts& x, const Vec& b, const Pts& y, Real eps,
                      int sweeps = 10000) {
  Vec g(b.size(), 0), f(a.size(), 0);
  for (int k = 0; k < sweeps; ++k) {
    const Vec tf = transform(x, y, b, g, eps);
    const Vec tg = transform(y, x, a, f, eps);
    for (std::size_t m = 0; m < f.size(); ++m) f[m] = (f[m] + tf[m]) / 2;
    for (std::size_t n = 0; n < g.size(); ++n) g[n] = (g[n] + tg[n]) / 2;
  }
  return finish(a, x, b, y, f, g, eps);
}

/// Damped symmetric iteration f <- (f + T(f)) / 2 for the self problem.
inline Solution solve_self(const Vec& a, const Pts& x, Real eps, int sweeps = 10000) {
  Vec f(a.size(), 0);
  for (int k = 0; k < sweeps; ++k) {
    const Vec t = transform(x, x, a, f, eps);
    for (std::size_t m = 0; m < f.size(); ++m) f[m] = (f[m] + t[m]) / 2;
  }
  Solution s = finish(a, x, a, x, f, f, eps);
  s.f = f;  // keep the symmetric gauge for the self potential
  s.g = f;
  return s;
}

inline Real divergence(const Vec& a, const Pts& x, const Vec& b, const Pts& y, Real eps) {
  return solve(a, x, b, y, eps).ot - solve_self(a, x, eps).ot / 2 - solve_self(b, y, eps).ot / 2;
}

}  // namespace oracle
