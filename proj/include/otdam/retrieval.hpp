#pragma once

// Log-sum-exp energy over a bank of stored measures and the transport + replicator
// retrieval loop.

#include "otdam/measure.hpp"
#include "otdam/sinkhorn.hpp"

#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace otdam {

enum class BoundaryPolicy { Clip, Error };

template <typename Scalar>
struct RetrievalConfig {
  Scalar beta = Scalar(50);
  Scalar eta = Scalar(0.1);
  Scalar lambda = Scalar(1);
  int max_iter = 200;
  Scalar stop_tol = Scalar(1e-7);    // max atom displacement
  Scalar weight_tol = Scalar(1e-9);  // max weight change
  bool enable_weight_step = true;
  BoundaryPolicy boundary_policy = BoundaryPolicy::Clip;
  bool warm_start = true;

  void validate() const {
    if (!(beta > 0)) throw ConfigError("RetrievalConfig: beta must be positive");
    if (!(eta >= 0)) throw ConfigError("RetrievalConfig: eta must be nonnegative");
    if (!(lambda > 0)) throw ConfigError("RetrievalConfig: lambda must be positive");
    if (max_iter < 1) throw ConfigError("RetrievalConfig: max_iter must be >= 1");
  }
};

/// The stored measures plus the geometry they live in.
template <typename Scalar>
struct PatternBank {
  MeasureParams params;
  DomainSpec<Scalar> domain;
  std::vector<DiscreteMeasure<Scalar>> patterns;
  Scalar beta = Scalar(50);
  Scalar epsilon = Scalar(0.05);
  Scalar lambda = Scalar(1);

  std::size_t size() const { return patterns.size(); }
};

template <typename Scalar>
struct Softmin {
  Vector<Scalar> weights;  // softmax(-beta * values)
  Scalar value = 0;        // -(1/beta) log sum exp(-beta * values)
};

/// Gibbs weights and softmin value from one max-subtracted log-sum-exp pass.
template <typename Scalar>
Softmin<Scalar> softmin(const Vector<Scalar>& values, Scalar beta) {
  if (values.size() == 0) throw StructuralError("softmin of an empty vector");
  const Scalar lowest = values.minCoeff();
  const Vector<Scalar> terms = (-beta * (values.array() - lowest)).exp();
  const Scalar total = terms.sum();
  return {terms / total, lowest - std::log(total) / beta};
}

template <typename Scalar>
struct EnergyState {
  Vector<Scalar> divergences;  // S_eps(query, X_i)
  Vector<Scalar> weights;      // Gibbs weights over patterns
  Scalar energy = 0;
  Vector<Scalar> z;            // particle first-variation values
  Scalar zbar = 0;             // <a, z>
  bool converged = true;       // every Sinkhorn solve behind this state converged
};

template <typename Scalar>
struct ShkGradient {
  Vector<Scalar> weight_component;    // (a_m / lambda^2)(z_m - zbar)
  Points<Scalar> position_component;  // T_0(x_m) - sum_i w_i T_i(x_m)
  Scalar norm = 0;
};

/// Per-bank quantities that do not depend on the query, plus warm-start potentials.
template <typename Scalar>
struct BankCache {
  Vector<Scalar> pattern_self_ot;
  bool pattern_self_converged = true;
  std::vector<Vector<Scalar>> cross_g;  // last target potential per pattern
  // Symmetric potential of each pattern, the starting g of every cross solve. With atoms far
  // apart relative to sqrt(eps) the marginals pin f + g only along the diagonal and leave the
  // split between f and g almost free; starting from the pattern's own potential makes the
  // split exact at query = pattern and continuous nearby.
  std::vector<Vector<Scalar>> pattern_self_f;
  std::optional<Vector<Scalar>> self_f;
};

template <typename Scalar>
BankCache<Scalar> prepare_bank(const PatternBank<Scalar>& bank, const SinkhornConfig<Scalar>& ot) {
  BankCache<Scalar> cache;
  cache.pattern_self_ot.resize(static_cast<Eigen::Index>(bank.size()));
  SinkhornConfig<Scalar> cold = ot;
  cold.warm_start.reset();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto potential = symmetric_self_potential(bank.patterns[i], cold);
    const auto self = self_ot_cost(bank.patterns[i], potential, cold);
    cache.pattern_self_ot[static_cast<Eigen::Index>(i)] = self.value;
    cache.pattern_self_converged = cache.pattern_self_converged && self.converged;
    cache.pattern_self_f.push_back(potential.f_sym);
  }
  cache.cross_g = cache.pattern_self_f;
  return cache;
}

/// Everything one iteration of the retrieval loop needs at the current query.
template <typename Scalar>
struct StepData {
  EnergyState<Scalar> state;
  std::vector<Points<Scalar>> pattern_maps;  // T_i at query atoms
  Points<Scalar> self_map;                   // T_0 at query atoms
  Vector<Scalar> self_potential;             // f_sym
  std::vector<Vector<Scalar>> cross_f;       // f_i at query atoms
};

template <typename Scalar>
StepData<Scalar> evaluate_step(const DiscreteMeasure<Scalar>& query,
                               const PatternBank<Scalar>& bank, Scalar beta,
                               const SinkhornConfig<Scalar>& ot, BankCache<Scalar>& cache,
                               bool warm) {
  if (bank.patterns.empty()) throw StructuralError("pattern bank is empty");
  const auto n_pat = static_cast<Eigen::Index>(bank.size());
  StepData<Scalar> out;
  out.state.divergences.resize(n_pat);
  out.state.converged = cache.pattern_self_converged;

  SinkhornConfig<Scalar> self_cfg = ot;
  self_cfg.warm_start.reset();
  if (warm && cache.self_f) self_cfg.warm_start = cache.self_f;
  const auto self = symmetric_self_potential(query, self_cfg);
  const auto self_value = self_ot_cost(query, self, self_cfg);
  cache.self_f = self.f_sym;
  out.state.converged = out.state.converged && self.converged;
  out.self_potential = self.f_sym;
  out.self_map = barycentric_map(self_coupling(query, self, self_cfg), query.weights(),
                                 query.supports());

  for (Eigen::Index i = 0; i < n_pat; ++i) {
    const auto& pattern = bank.patterns[static_cast<std::size_t>(i)];
    if (pattern.dim() != query.dim() || pattern.size() != query.size()) {
      std::ostringstream msg;
      msg << "pattern " << i << " does not match the query shape";
      throw StructuralError(msg.str());
    }
    SinkhornConfig<Scalar> cfg = ot;
    cfg.warm_start.reset();
    auto& g_prev = cache.cross_g[static_cast<std::size_t>(i)];
    if (warm && g_prev.size() == pattern.size())
      cfg.warm_start = g_prev;
    else
      cfg.warm_start = cache.pattern_self_f[static_cast<std::size_t>(i)];
    SinkhornSolution<Scalar> sol;
    try {
      sol = sinkhorn_solve(query, pattern, cfg);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "pattern " << i << ": " << e.what();
      throw NumericError(msg.str());
    }
    g_prev = sol.g;
    const auto cross = ot_cost(query, pattern, sol, cfg);
    out.state.converged = out.state.converged && sol.converged;
    out.state.divergences[i] = cross.value - Scalar(0.5) * self_value.value -
                               Scalar(0.5) * cache.pattern_self_ot[i];
    out.pattern_maps.push_back(
        barycentric_map(coupling(query, pattern, sol, cfg), query.weights(), pattern.supports()));
    out.cross_f.push_back(sol.f);
  }

  const auto soft = softmin(out.state.divergences, beta);
  out.state.weights = soft.weights;
  out.state.energy = soft.value;
  out.state.z = Vector<Scalar>::Zero(query.size());
  for (Eigen::Index i = 0; i < n_pat; ++i)
    out.state.z += soft.weights[i] * (out.cross_f[static_cast<std::size_t>(i)] - self.f_sym);
  out.state.zbar = query.weights().dot(out.state.z);
  return out;
}

template <typename Scalar>
EnergyState<Scalar> energy_state(const DiscreteMeasure<Scalar>& query,
                                 const PatternBank<Scalar>& bank,
                                 const RetrievalConfig<Scalar>& cfg,
                                 const SinkhornConfig<Scalar>& ot) {
  cfg.validate();
  auto cache = prepare_bank(bank, ot);
  return evaluate_step(query, bank, cfg.beta, ot, cache, false).state;
}

/// sum_i w_i T_i, the Gibbs-weighted target of every query atom.
template <typename Scalar>
Points<Scalar> weighted_target(const std::vector<Points<Scalar>>& pattern_maps,
                               const Vector<Scalar>& w) {
  Points<Scalar> out = Points<Scalar>::Zero(pattern_maps.front().rows(),
                                            pattern_maps.front().cols());
  for (std::size_t i = 0; i < pattern_maps.size(); ++i)
    out += w[static_cast<Eigen::Index>(i)] * pattern_maps[i];
  return out;
}

template <typename Scalar>
struct TransportResult {
  Points<Scalar> supports;
  int clipped = 0;
};

/// Strictly interior point near x: the projection, pulled slightly toward the domain's center.
template <typename Scalar>
Vector<Scalar> pull_inside(const DomainSpec<Scalar>& dom, const Vector<Scalar>& x) {
  Vector<Scalar> y = dom.project(x);
  if (dom.contains(y)) return y;
  const Vector<Scalar> mid = dom.kind() == DomainKind::Box
                                 ? Vector<Scalar>((dom.lower() + dom.upper()) / Scalar(2))
                                 : dom.center();
  const Scalar shrink = Scalar(1) - Scalar(1e-9);
  return mid + shrink * (y - mid);
}

/// x_m <- x_m + eta (sum_i w_i T_i(x_m) - T_0(x_m)), then the boundary policy.
template <typename Scalar>
TransportResult<Scalar> transport_step(const Points<Scalar>& supports,
                                       const std::vector<Points<Scalar>>& pattern_maps,
                                       const Points<Scalar>& self_map, const Vector<Scalar>& w,
                                       Scalar eta, const DomainSpec<Scalar>& dom,
                                       BoundaryPolicy policy) {
  if (pattern_maps.empty() || static_cast<Eigen::Index>(pattern_maps.size()) != w.size())
    throw StructuralError("one barycentric map per Gibbs weight is required");
  TransportResult<Scalar> out;
  out.supports = supports + eta * (weighted_target(pattern_maps, w) - self_map);
  for (Eigen::Index m = 0; m < out.supports.cols(); ++m) {
    if (dom.contains(out.supports.col(m))) continue;
    if (policy == BoundaryPolicy::Error) {
      std::ostringstream msg;
      msg << "atom " << m << " left the domain during the transport step";
      throw BoundaryError(msg.str());
    }
    out.supports.col(m) = pull_inside(dom, Vector<Scalar>(out.supports.col(m)));
    ++out.clipped;
  }
  return out;
}

/// a_m <- a_m exp(-(eta / lambda^2) z_m), renormalized, max-subtracted in the exponent.
template <typename Scalar>
Vector<Scalar> weight_step(const Vector<Scalar>& a, const Vector<Scalar>& z, Scalar eta,
                           Scalar lambda) {
  if (a.size() != z.size()) throw StructuralError("weights and z differ in length");
  const Scalar rate = eta / (lambda * lambda);
  const Vector<Scalar> expo = -rate * z;
  const Vector<Scalar> log_new = a.array().log() + (expo.array() - expo.maxCoeff());
  const Vector<Scalar> scaled = (log_new.array() - log_new.maxCoeff()).exp();
  return scaled / scaled.sum();
}

template <typename Scalar>
ShkGradient<Scalar> shk_grad(const Vector<Scalar>& a, const Vector<Scalar>& z, Scalar zbar,
                             const Points<Scalar>& position_grads, Scalar lambda) {
  if (a.size() != z.size() || position_grads.cols() != a.size())
    throw StructuralError("shk_grad inputs differ in atom count");
  ShkGradient<Scalar> out;
  const Vector<Scalar> centered = z.array() - zbar;
  out.weight_component = a.cwiseProduct(centered) / (lambda * lambda);
  out.position_component = position_grads;
  const Scalar sq = (a.array() * (centered.array().square() / (lambda * lambda) +
                                  position_grads.colwise().squaredNorm().transpose().array()))
                        .sum();
  out.norm = std::sqrt(std::max(sq, Scalar(0)));
  return out;
}

/// SHK gradient bound G = D sqrt(1 + D^2 / lambda^2).
template <typename Scalar>
Scalar shk_gradient_bound(Scalar diameter, Scalar lambda) {
  return diameter * std::sqrt(Scalar(1) + diameter * diameter / (lambda * lambda));
}

enum class TraceStatus { Converged, IterationCap, Error };

inline const char* to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::Converged: return "converged";
    case TraceStatus::IterationCap: return "iteration_cap";
    case TraceStatus::Error: return "error";
  }
  return "unknown";
}

/// State at iterate k and the step taken from it (step fields are zero on the final record).
template <typename Scalar>
struct TraceRecord {
  int iteration = 0;
  DiscreteMeasure<Scalar> measure;
  EnergyState<Scalar> state;
  Scalar shk_grad_norm = 0;
  Scalar max_displacement = 0;
  Scalar max_weight_change = 0;
  int clipped = 0;
};

template <typename Scalar>
struct RetrievalTrace {
  std::vector<TraceRecord<Scalar>> records;
  TraceStatus status = TraceStatus::IterationCap;
  std::string message;
  int steps = 0;             // update steps actually taken
  int clipped_total = 0;
  bool solver_converged = true;

  const DiscreteMeasure<Scalar>& final_measure() const { return records.back().measure; }
  const EnergyState<Scalar>& final_state() const { return records.back().state; }
};

/// Transport + replicator retrieval: solve the N cross problems and the self problem,
/// form Gibbs weights and barycentric maps, move the atoms, reweight. Stops when both the
/// largest atom displacement and the largest weight change fall below their thresholds,
/// or after max_iter steps. Solver errors end the run with a partial trace.
template <typename Scalar>
RetrievalTrace<Scalar> retrieve(const DiscreteMeasure<Scalar>& query,
                                const PatternBank<Scalar>& bank,
                                const RetrievalConfig<Scalar>& cfg,
                                const SinkhornConfig<Scalar>& ot) {
  cfg.validate();
  ot.validate();
  RetrievalTrace<Scalar> trace;
  try {
    if (query.dim() != bank.domain.dim())
      throw StructuralError("query and domain dimensions differ");
    auto cache = prepare_bank(bank, ot);
    DiscreteMeasure<Scalar> current = query;
    for (int k = 0;; ++k) {
      StepData<Scalar> step = evaluate_step(current, bank, cfg.beta, ot, cache, cfg.warm_start);
      const Points<Scalar> target = weighted_target(step.pattern_maps, step.state.weights);
      const Points<Scalar> zeta = step.self_map - target;
      const auto grad = shk_grad(current.weights(), step.state.z, step.state.zbar, zeta,
                                 cfg.lambda);
      trace.solver_converged = trace.solver_converged && step.state.converged;
      TraceRecord<Scalar> rec{k, current, step.state, grad.norm, 0, 0, 0};
      if (k == cfg.max_iter) {
        trace.records.push_back(std::move(rec));
        trace.status = TraceStatus::IterationCap;
        break;
      }
      auto moved = transport_step(current.supports(), step.pattern_maps, step.self_map,
                                  step.state.weights, cfg.eta, bank.domain, cfg.boundary_policy);
      Vector<Scalar> new_weights = current.weights();
      if (cfg.enable_weight_step)
        new_weights = weight_step(current.weights(), step.state.z, cfg.eta, cfg.lambda);
      rec.max_displacement = (moved.supports - current.supports()).colwise().norm().maxCoeff();
      rec.max_weight_change = (new_weights - current.weights()).cwiseAbs().maxCoeff();
      rec.clipped = moved.clipped;
      trace.clipped_total += moved.clipped;
      const bool settled =
          rec.max_displacement < cfg.stop_tol && rec.max_weight_change < cfg.weight_tol;
      trace.records.push_back(std::move(rec));
      current = DiscreteMeasure<Scalar>(std::move(new_weights), std::move(moved.supports));
      trace.steps = k + 1;
      if (settled) {
        StepData<Scalar> last = evaluate_step(current, bank, cfg.beta, ot, cache, cfg.warm_start);
        const Points<Scalar> t = weighted_target(last.pattern_maps, last.state.weights);
        const auto g = shk_grad(current.weights(), last.state.z, last.state.zbar,
                                Points<Scalar>(last.self_map - t), cfg.lambda);
        trace.solver_converged = trace.solver_converged && last.state.converged;
        trace.records.push_back({k + 1, current, last.state, g.norm, 0, 0, 0});
        trace.status = TraceStatus::Converged;
        break;
      }
    }
  } catch (const Error& e) {
    trace.status = TraceStatus::Error;
    trace.message = e.what();
  }
  return trace;
}

template <typename Scalar>
struct Classification {
  std::size_t index = 0;
  Scalar margin = std::numeric_limits<Scalar>::infinity();
  bool margin_infinite = true;  // N = 1
  bool tie = false;
  Vector<Scalar> divergences;
};

/// Nearest stored pattern in S_eps; ties go to the lowest index and are flagged.
template <typename Scalar>
Classification<Scalar> success_metric(const DiscreteMeasure<Scalar>& retrieved,
                                      const PatternBank<Scalar>& bank,
                                      const SinkhornConfig<Scalar>& ot) {
  if (bank.patterns.empty()) throw StructuralError("pattern bank is empty");
  Classification<Scalar> out;
  const auto n = static_cast<Eigen::Index>(bank.size());
  out.divergences.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.divergences[i] =
        sinkhorn_divergence(retrieved, bank.patterns[static_cast<std::size_t>(i)], ot).value;
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (out.divergences[i] < out.divergences[best]) best = i;
  out.index = static_cast<std::size_t>(best);
  if (n > 1) {
    Scalar runner = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != best) runner = std::min(runner, out.divergences[i]);
    out.margin = runner - out.divergences[best];
    out.margin_infinite = false;
    out.tie = out.margin == Scalar(0);
  }
  return out;
}

}  // namespace otdam
