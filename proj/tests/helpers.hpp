#pragma once

#include "oracle.hpp"
#include "otdam/measure.hpp"
#include "otdam/sinkhorn.hpp"

#include <random>

namespace testing_util {

using otdam::Measure;
using otdam::MatrixXd;
using otdam::VectorXd;

// Two-atom pair x=((0,0),(1,0)), y=((0,1),(1,1)), uniform weights, eps=0.05 (50-digit oracle).
constexpr double kPairOt = 0.53465508908303642;
constexpr double kPairSelf = 0.034655089083036422;

inline Measure make(std::initializer_list<double> weights,
                    std::initializer_list<std::initializer_list<double>> points) {
  const auto m = Eigen::Index(points.size());
  const auto d = Eigen::Index(points.begin()->size());
  MatrixXd x(d, m);
  Eigen::Index j = 0;
  for (const auto& p : points) {
    Eigen::Index k = 0;
    for (double v : p) x(k++, j) = v;
    ++j;
  }
  VectorXd a(m);
  j = 0;
  for (double w : weights) a[j++] = w;
  return Measure(a, x);
}

/// Random measure with weights bounded away from zero and supports in [-half, half]^d.
inline Measure random_measure(std::mt19937_64& rng, Eigen::Index m, Eigen::Index d, double half) {
  std::uniform_real_distribution<double> u(-half, half), w(0.2, 1.0);
  MatrixXd x(d, m);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = u(rng);
  VectorXd a(m);
  for (Eigen::Index k = 0; k < m; ++k) a[k] = w(rng);
  a /= a.sum();
  return Measure(a, x);
}

inline oracle::Vec weights_of(const Measure& mu) {
  return oracle::Vec(mu.weights().data(), mu.weights().data() + mu.size());
}

inline oracle::Pts points_of(const Measure& mu) {
  oracle::Pts out;
  for (Eigen::Index m = 0; m < mu.size(); ++m) {
    std::vector<oracle::Real> p;
    for (Eigen::Index k = 0; k < mu.dim(); ++k) p.push_back(mu.supports()(k, m));
    out.push_back(p);
  }
  return out;
}

inline oracle::Solution oracle_solve(const Measure& mu, const Measure& nu, double eps) {
  return oracle::solve(weights_of(mu), points_of(mu), weights_of(nu), points_of(nu), eps);
}

inline oracle::Solution oracle_self(const Measure& mu, double eps) {
  return oracle::solve_self(weights_of(mu), points_of(mu), eps);
}

inline double oracle_divergence(const Measure& mu, const Measure& nu, double eps) {
  return double(oracle::divergence(weights_of(mu), points_of(mu), weights_of(nu), points_of(nu), eps));
}

inline otdam::SinkhornConfig<double> tight(double eps, double tol = 1e-12, int cap = 2000) {
  otdam::SinkhornConfig<double> c;
  c.epsilon = eps;
  c.tol = tol;
  c.max_iter = cap;
  c.newton_steps = 60;
  return c;
}

}  // namespace testing_util
