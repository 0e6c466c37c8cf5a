#pragma once

// Log-domain Sinkhorn for the quadratic cost c(x, y) = |x - y|^2 / 2.

#include "otdam/measure.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace otdam {

template <typename Scalar>
struct SinkhornConfig {
  Scalar epsilon = Scalar(0.05);
  int max_iter = 120;
  Scalar tol = Scalar(1e-9);
  /// Initial target potential g; the first update computes f from it.
  std::optional<Vector<Scalar>> warm_start;
  /// Newton steps on the semi-dual after the sweeps stall; 0 keeps plain Sinkhorn. Nearly
  /// diagonal kernels (atoms far apart relative to sqrt(eps)) contract like 1 - e^{-c/eps}
  /// per sweep, which no practical cap fixes.
  int newton_steps = 0;

  void validate() const {
    if (!(epsilon > 0)) throw ConfigError("SinkhornConfig: epsilon must be positive");
    if (max_iter < 1) throw ConfigError("SinkhornConfig: max_iter must be >= 1");
    if (!(tol > 0)) throw ConfigError("SinkhornConfig: tol must be positive");
    if (newton_steps < 0) throw ConfigError("SinkhornConfig: newton_steps must be >= 0");
  }
};

template <typename Scalar>
struct SinkhornSolution {
  Vector<Scalar> f;  // source potential at source atoms, <a, f> = 0
  Vector<Scalar> g;  // target potential at target atoms
  int iterations = 0;
  Scalar marginal_err = 0;
  bool converged = false;
};

template <typename Scalar>
struct SelfPotential {
  Vector<Scalar> f_sym;
  int iterations = 0;
  Scalar residual = 0;  // |f_sym - A(f_sym)|_inf
  Scalar marginal_err = 0;
  bool converged = false;
};

/// A scalar together with the convergence status of the solves behind it.
template <typename Scalar>
struct Evaluation {
  Scalar value = 0;
  bool converged = true;
};

/// C(m, n) = |x_m - y_n|^2 / 2, evaluated from differences (no expansion).
template <typename Scalar>
Matrix<Scalar> quadratic_cost(const Points<Scalar>& x, const Points<Scalar>& y) {
  if (x.rows() != y.rows()) throw StructuralError("point sets live in different dimensions");
  Matrix<Scalar> cost(x.cols(), y.cols());
  for (Eigen::Index n = 0; n < y.cols(); ++n)
    for (Eigen::Index m = 0; m < x.cols(); ++m)
      cost(m, n) = Scalar(0.5) * (x.col(m) - y.col(n)).squaredNorm();
  if (!cost.allFinite()) throw NumericError("non-finite cost entry");
  return cost;
}

/// Row-wise soft c-transform:
///   out_m = -eps * log sum_n exp(log_w_n + (potential_n - cost(m, n)) / eps),
/// with max-subtraction in the log-sum-exp.
template <typename Scalar>
Vector<Scalar> soft_c_transform(const Matrix<Scalar>& cost, const Vector<Scalar>& potential,
                                const Vector<Scalar>& log_weights, Scalar eps) {
  Matrix<Scalar> logits = (-cost).rowwise() + potential.transpose();
  logits /= eps;
  logits.rowwise() += log_weights.transpose();
  const Vector<Scalar> peak = logits.rowwise().maxCoeff();
  const Vector<Scalar> sums = (logits.colwise() - peak).array().exp().rowwise().sum();
  return -eps * (peak.array() + sums.array().log()).matrix();
}

/// log of the Gibbs coupling density against a (x) b: (f_m + g_n - C_mn) / eps.
template <typename Scalar>
Matrix<Scalar> log_density(const Matrix<Scalar>& cost, const Vector<Scalar>& f,
                           const Vector<Scalar>& g, Scalar eps) {
  Matrix<Scalar> out = (-cost).colwise() + f;
  out.rowwise() += g.transpose();
  return out / eps;
}

/// P_mn = a_m b_n exp((f_m + g_n - C_mn) / eps), exponentiated from the log domain.
template <typename Scalar>
Matrix<Scalar> gibbs_coupling(const Matrix<Scalar>& cost, const Vector<Scalar>& a,
                              const Vector<Scalar>& b, const Vector<Scalar>& f,
                              const Vector<Scalar>& g, Scalar eps) {
  Matrix<Scalar> logp = log_density(cost, f, g, eps);
  logp.colwise() += a.array().log().matrix();
  logp.rowwise() += b.array().log().matrix().transpose();
  return logp.array().exp().matrix();
}

template <typename Scalar>
Scalar marginal_violation(const Matrix<Scalar>& plan, const Vector<Scalar>& a,
                          const Vector<Scalar>& b) {
  const Scalar rows = (plan.rowwise().sum() - a).cwiseAbs().maxCoeff();
  const Scalar cols = (plan.colwise().sum().transpose() - b).cwiseAbs().maxCoeff();
  return std::max(rows, cols);
}

/// Alternating log-domain updates f <- A(g, tgt), g <- A(f, src) until both marginals of
/// the Gibbs coupling are within tol (infinity norm) or max_iter sweeps are spent.
/// Running out of iterations is reported through `converged`, not thrown.
/// Newton on the semi-dual g -> <a, A(g)> + <b, g>. Rows are exact after f = A(g), so the
/// gradient is the column residual b - P^T 1 and the Hessian is
/// -(diag(P^T 1) - P^T diag(1/a) P) / eps. Steps are halved until the residual drops.
template <typename Scalar>
void newton_refine(const Matrix<Scalar>& cost, const Vector<Scalar>& a, const Vector<Scalar>& b,
                   Vector<Scalar>& g, Scalar eps, Scalar tol, int steps) {
  const Vector<Scalar> log_b = b.array().log();
  const auto residual = [&](const Vector<Scalar>& pot, Matrix<Scalar>* plan) {
    const Vector<Scalar> f = soft_c_transform(cost, pot, log_b, eps);
    Matrix<Scalar> p = gibbs_coupling(cost, a, b, f, pot, eps);
    Vector<Scalar> r = b - p.colwise().sum().transpose();
    if (plan) *plan = std::move(p);
    return r;
  };
  Matrix<Scalar> plan;
  Vector<Scalar> r = residual(g, &plan);
  for (int k = 0; k < steps && r.cwiseAbs().maxCoeff() > tol; ++k) {
    const Vector<Scalar> col = plan.colwise().sum().transpose();
    Matrix<Scalar> H = col.asDiagonal();
    H.noalias() -= plan.transpose() * a.cwiseInverse().asDiagonal() * plan;
    // H 1 = 0; the gauge direction is pinned by a rank-one term.
    H += b * b.transpose();
    const Vector<Scalar> step = eps * H.ldlt().solve(r);
    if (!step.allFinite()) return;
    const Scalar current = r.cwiseAbs().maxCoeff();
    bool moved = false;
    for (Scalar t = 1; t > Scalar(1e-6); t /= 2) {
      const Vector<Scalar> trial = g + t * step;
      Matrix<Scalar> trial_plan;
      Vector<Scalar> trial_r = residual(trial, &trial_plan);
      if (trial_r.allFinite() && trial_r.cwiseAbs().maxCoeff() < current) {
        g = trial;
        r = std::move(trial_r);
        plan = std::move(trial_plan);
        moved = true;
        break;
      }
    }
    if (!moved) return;
  }
}

template <typename Scalar>
SinkhornSolution<Scalar> sinkhorn_solve(const DiscreteMeasure<Scalar>& src,
                                        const DiscreteMeasure<Scalar>& tgt,
                                        const SinkhornConfig<Scalar>& cfg) {
  cfg.validate();
  const Matrix<Scalar> cost = quadratic_cost(src.supports(), tgt.supports());
  const Matrix<Scalar> cost_t = cost.transpose();
  const Scalar eps = cfg.epsilon;
  const Vector<Scalar> log_a = src.weights().array().log();
  const Vector<Scalar> log_b = tgt.weights().array().log();
  const Vector<Scalar>& a = src.weights();

  Vector<Scalar> g = Vector<Scalar>::Zero(tgt.size());
  if (cfg.warm_start && cfg.warm_start->size() == tgt.size() && cfg.warm_start->allFinite())
    g = *cfg.warm_start;

  SinkhornSolution<Scalar> sol;
  Vector<Scalar> f = soft_c_transform(cost, g, log_b, eps);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    g = soft_c_transform(cost_t, f, log_a, eps);
    // After the g-update the column marginals are exact; the row sums are
    // a_m exp((f_m - A(g)_m) / eps), so the next f doubles as the row check.
    Vector<Scalar> f_next = soft_c_transform(cost, g, log_b, eps);
    const Scalar row_err =
        (a.array() * (((f - f_next) / eps).array().exp() - Scalar(1)).abs()).maxCoeff();
    sol.iterations = it;
    if (!std::isfinite(row_err)) throw NumericError("Sinkhorn iterate became non-finite");
    if (row_err <= cfg.tol) {
      sol.converged = true;
      break;
    }
    if (it < cfg.max_iter) f = std::move(f_next);
  }
  const bool polished = !sol.converged && cfg.newton_steps > 0;
  if (polished) {
    newton_refine(cost, a, tgt.weights(), g, eps, cfg.tol, cfg.newton_steps);
    f = soft_c_transform(cost, g, log_b, eps);
  }

  const Scalar shift = a.dot(f);
  f.array() -= shift;
  g.array() += shift;
  sol.marginal_err =
      marginal_violation(gibbs_coupling(cost, a, tgt.weights(), f, g, eps), a, tgt.weights());
  sol.converged = (sol.converged || polished) && sol.marginal_err <= cfg.tol;
  sol.f = std::move(f);
  sol.g = std::move(g);
  return sol;
}

template <typename Scalar>
Matrix<Scalar> coupling(const DiscreteMeasure<Scalar>& src, const DiscreteMeasure<Scalar>& tgt,
                        const SinkhornSolution<Scalar>& sol, const SinkhornConfig<Scalar>& cfg) {
  const Matrix<Scalar> cost = quadratic_cost(src.supports(), tgt.supports());
  return gibbs_coupling(cost, src.weights(), tgt.weights(), sol.f, sol.g, cfg.epsilon);
}

/// Primal value sum_mn P_mn C_mn + eps KL(P | a (x) b) of a Gibbs coupling, with 0 log 0 = 0.
template <typename Scalar>
Scalar primal_value(const Matrix<Scalar>& cost, const Vector<Scalar>& a,
                    const Vector<Scalar>& b, const Vector<Scalar>& f, const Vector<Scalar>& g,
                    Scalar eps) {
  const Matrix<Scalar> logd = log_density(cost, f, g, eps);
  Scalar total = 0;
  for (Eigen::Index n = 0; n < cost.cols(); ++n) {
    for (Eigen::Index m = 0; m < cost.rows(); ++m) {
      const Scalar p = a[m] * b[n] * std::exp(logd(m, n));
      if (p > Scalar(0)) total += p * (cost(m, n) + eps * logd(m, n));
    }
  }
  return total;
}

template <typename Scalar>
Evaluation<Scalar> ot_cost(const DiscreteMeasure<Scalar>& src, const DiscreteMeasure<Scalar>& tgt,
                           const SinkhornSolution<Scalar>& sol, const SinkhornConfig<Scalar>& cfg) {
  const Matrix<Scalar> cost = quadratic_cost(src.supports(), tgt.supports());
  return {primal_value(cost, src.weights(), tgt.weights(), sol.f, sol.g, cfg.epsilon),
          sol.converged};
}

/// <a, f> + <b, g>; a diagnostic, the primal value is authoritative.
template <typename Scalar>
Scalar dual_value(const DiscreteMeasure<Scalar>& src, const DiscreteMeasure<Scalar>& tgt,
                  const SinkhornSolution<Scalar>& sol) {
  return src.weights().dot(sol.f) + tgt.weights().dot(sol.g);
}

/// Symmetric fixed point f = A(f, mu) of the self problem, reached by the damped
/// iteration f <- (f + A(f, mu)) / 2. Equals (f_mumu + g_mumu) / 2 in any gauge.
template <typename Scalar>
SelfPotential<Scalar> symmetric_self_potential(const DiscreteMeasure<Scalar>& mu,
                                               const SinkhornConfig<Scalar>& cfg) {
  cfg.validate();
  const Matrix<Scalar> cost = quadratic_cost(mu.supports(), mu.supports());
  const Scalar eps = cfg.epsilon;
  const Vector<Scalar>& a = mu.weights();
  const Vector<Scalar> log_a = a.array().log();

  SelfPotential<Scalar> out;
  Vector<Scalar> f = Vector<Scalar>::Zero(mu.size());
  // The symmetric fixed point is unique, so a warm start only changes the path.
  if (cfg.warm_start && cfg.warm_start->size() == mu.size() && cfg.warm_start->allFinite())
    f = *cfg.warm_start;
  const int cap = std::max(cfg.max_iter, 1);
  for (int it = 1; it <= cap; ++it) {
    const Vector<Scalar> image = soft_c_transform(cost, f, log_a, eps);
    out.residual = (f - image).cwiseAbs().maxCoeff();
    out.marginal_err =
        (a.array() * (((f - image) / eps).array().exp() - Scalar(1)).abs()).maxCoeff();
    out.iterations = it;
    if (!std::isfinite(out.residual)) throw NumericError("self potential became non-finite");
    if (out.residual <= cfg.tol && out.marginal_err <= cfg.tol) {
      out.converged = true;
      break;
    }
    f = Scalar(0.5) * (f + image);
  }
  out.f_sym = std::move(f);
  return out;
}

/// Gibbs self-coupling a_m a_l exp((f_m + f_l - C_ml) / eps) from the symmetric potential.
template <typename Scalar>
Matrix<Scalar> self_coupling(const DiscreteMeasure<Scalar>& mu, const SelfPotential<Scalar>& self,
                             const SinkhornConfig<Scalar>& cfg) {
  const Matrix<Scalar> cost = quadratic_cost(mu.supports(), mu.supports());
  return gibbs_coupling(cost, mu.weights(), mu.weights(), self.f_sym, self.f_sym, cfg.epsilon);
}

template <typename Scalar>
Evaluation<Scalar> self_ot_cost(const DiscreteMeasure<Scalar>& mu,
                                const SelfPotential<Scalar>& self,
                                const SinkhornConfig<Scalar>& cfg) {
  const Matrix<Scalar> cost = quadratic_cost(mu.supports(), mu.supports());
  return {primal_value(cost, mu.weights(), mu.weights(), self.f_sym, self.f_sym, cfg.epsilon),
          self.converged};
}

/// OT_eps(mu, mu) via the symmetric solver. Bounded above by eps * H(a) <= eps log M.
template <typename Scalar>
Evaluation<Scalar> self_ot_cost(const DiscreteMeasure<Scalar>& mu,
                                const SinkhornConfig<Scalar>& cfg) {
  return self_ot_cost(mu, symmetric_self_potential(mu, cfg), cfg);
}

/// S_eps(mu, nu) = OT(mu, nu) - OT(mu, mu) / 2 - OT(nu, nu) / 2, reported raw; it can dip
/// below zero by roughly the solver tolerance.
template <typename Scalar>
Evaluation<Scalar> sinkhorn_divergence(const DiscreteMeasure<Scalar>& mu,
                                       const DiscreteMeasure<Scalar>& nu,
                                       const SinkhornConfig<Scalar>& cfg) {
  SinkhornConfig<Scalar> cold = cfg;
  cold.warm_start.reset();
  const auto cross_sol = sinkhorn_solve(mu, nu, cold);
  const auto cross = ot_cost(mu, nu, cross_sol, cold);
  const auto self_mu = self_ot_cost(mu, cold);
  const auto self_nu = self_ot_cost(nu, cold);
  return {cross.value - Scalar(0.5) * self_mu.value - Scalar(0.5) * self_nu.value,
          cross.converged && self_mu.converged && self_nu.converged};
}

/// T(x_m) = sum_n (P_mn / a_m) y_n, the conditional mean of the coupling.
template <typename Scalar>
Points<Scalar> barycentric_map(const Matrix<Scalar>& plan, const Vector<Scalar>& a,
                               const Points<Scalar>& targets) {
  if (plan.rows() != a.size() || plan.cols() != targets.cols())
    throw StructuralError("coupling shape does not match weights and targets");
  if ((a.array() <= Scalar(0)).any())
    throw StructuralError("barycentric map undefined for a zero-weight atom");
  return targets * (plan.transpose() * a.cwiseInverse().asDiagonal());
}

}  // namespace otdam
