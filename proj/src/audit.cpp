#include "otdam/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace otdam {

const char* to_string(AuditStatus s) {
  switch (s) {
    case AuditStatus::Passed: return "passed";
    case AuditStatus::Failed: return "failed";
    case AuditStatus::Skipped: return "skipped";
  }
  return "unknown";
}

InputDigest& InputDigest::add(double v) {
  unsigned char bytes[sizeof(double)];
  std::memcpy(bytes, &v, sizeof(double));
  for (unsigned char b : bytes) {
    state_ ^= b;
    state_ *= 0x100000001b3ULL;
  }
  return *this;
}

InputDigest& InputDigest::add(const VectorXd& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) add(v[k]);
  return *this;
}

InputDigest& InputDigest::add(const MatrixXd& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) add(v.data()[k]);
  return *this;
}

InputDigest& InputDigest::add(const Measure& mu) {
  add(mu.weights());
  return add(mu.supports());
}

std::string InputDigest::hex() const {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << state_;
  return out.str();
}

SinkhornConfig<double> precise_config(double eps, double tol, int max_iter) {
  SinkhornConfig<double> cfg;
  cfg.epsilon = eps;
  cfg.tol = tol;
  cfg.max_iter = max_iter;
  cfg.newton_steps = 60;
  return cfg;
}

namespace {

AuditReport finish(AuditReport rep) {
  rep.slack = rep.lower_bound ? rep.measured - rep.bound : rep.bound - rep.measured;
  rep.pass = rep.slack >= -rep.tolerance;
  rep.status = rep.pass ? AuditStatus::Passed : AuditStatus::Failed;
  return rep;
}

AuditReport skipped(std::string name, std::string digest, std::string why) {
  AuditReport rep;
  rep.name = std::move(name);
  rep.digest = std::move(digest);
  rep.status = AuditStatus::Skipped;
  rep.pass = false;
  rep.note = std::move(why);
  return rep;
}

double plain_softmin(const VectorXd& v, double beta) {
  double lo = v[0];
  for (Eigen::Index k = 1; k < v.size(); ++k) lo = std::min(lo, v[k]);
  double total = 0;
  for (Eigen::Index k = 0; k < v.size(); ++k) total += std::exp(-beta * (v[k] - lo));
  return lo - std::log(total) / beta;
}

/// Second-smallest minus smallest entry; +inf for a single entry.
double empirical_gap(const VectorXd& v) {
  if (v.size() < 2) return std::numeric_limits<double>::infinity();
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  return s[1] - s[0];
}

double interference(std::size_t n, double beta, double gap) {
  if (n < 2) return 0;
  return double(n - 1) * std::exp(-beta * gap);
}

double divergence(const Measure& mu, const Measure& nu, const SinkhornConfig<double>& cfg) {
  return sinkhorn_divergence(mu, nu, cfg).value;
}

/// min_{j != i} S(X_i, X_j); +inf when the bank has one pattern.
double pattern_gap(const PatternBank<double>& bank, std::size_t i,
                   const SinkhornConfig<double>& cfg) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < bank.size(); ++j)
    if (j != i) gap = std::min(gap, divergence(bank.patterns[i], bank.patterns[j], cfg));
  return gap;
}

}  // namespace

AuditReport audit_self_ot(const Measure& mu, double eps) {
  AuditReport rep;
  rep.name = "self_ot";
  rep.digest = InputDigest().add(mu).add(eps).hex();
  const auto value = self_ot_cost(mu, precise_config(eps));
  const auto& a = mu.weights();
  double entropy = 0;
  for (Eigen::Index m = 0; m < a.size(); ++m) entropy -= a[m] * std::log(a[m]);
  rep.measured = value.value;
  rep.bound = eps * std::log(double(mu.size()));
  rep.tolerance = 1e-8;
  rep = finish(rep);
  const bool sharp_ok = rep.measured <= eps * entropy + rep.tolerance;
  std::ostringstream note;
  note << "eps*H(a) = " << eps * entropy << (sharp_ok ? "" : " (violated)");
  if (!value.converged) note << "; solver did not converge";
  rep.note = note.str();
  if (!sharp_ok) {
    rep.pass = false;
    rep.status = AuditStatus::Failed;
  }
  return rep;
}

AuditReport audit_mean_bound(const Measure& mu, const Measure& nu, double eps) {
  AuditReport rep;
  rep.name = "mean_bound";
  rep.digest = InputDigest().add(mu).add(nu).add(eps).hex();
  rep.lower_bound = true;
  rep.measured = divergence(mu, nu, precise_config(eps));
  const VectorXd dm = mu.mean() - nu.mean();
  double sq = 0;
  for (Eigen::Index k = 0; k < dm.size(); ++k) sq += dm[k] * dm[k];
  const double atoms = double(std::max(mu.size(), nu.size()));
  rep.bound = 0.5 * sq - eps * std::log(atoms);
  rep.tolerance = 1e-7;
  return finish(rep);
}

AuditReport audit_softmin_lipschitz(const VectorXd& z, const VectorXd& zprime, double beta) {
  if (z.size() != zprime.size() || z.size() == 0)
    throw StructuralError("softmin audit needs two nonempty vectors of equal length");
  AuditReport rep;
  rep.name = "softmin_lipschitz";
  rep.digest = InputDigest().add(z).add(zprime).add(beta).hex();
  rep.measured = std::abs(softmin<double>(z, beta).value - softmin<double>(zprime, beta).value);
  double sup = 0, scale = 1;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    sup = std::max(sup, std::abs(z[k] - zprime[k]));
    scale = std::max({scale, std::abs(z[k]), std::abs(zprime[k])});
  }
  rep.bound = sup;
  rep.tolerance = 1e-12 * scale;
  return finish(rep);
}

AuditReport audit_grad_bound(const Measure& xi, const Measure& pattern, double lambda,
                             const DomainSpec<double>& dom, double eps) {
  AuditReport rep;
  rep.name = "grad_bound";
  rep.digest = InputDigest().add(xi).add(pattern).add(lambda).add(eps).hex();
  PatternBank<double> bank;
  bank.domain = dom;
  bank.patterns = {pattern};
  bank.epsilon = eps;
  bank.lambda = lambda;
  const auto ot = precise_config(eps, 1e-10, 2000);
  auto cache = prepare_bank(bank, ot);
  const auto step = evaluate_step(xi, bank, 1.0, ot, cache, false);
  const MatrixXd zeta = step.self_map - step.pattern_maps.front();
  rep.measured = shk_grad(xi.weights(), step.state.z, step.state.zbar, zeta, lambda).norm;
  const double D = dom.diameter();
  rep.bound = D * std::sqrt(1.0 + D * D / (lambda * lambda));
  rep.tolerance = 1e-6;
  return finish(rep);
}

AuditReport audit_gibbs_weight(const VectorXd& divergences, double beta) {
  AuditReport rep;
  rep.name = "gibbs_weight";
  rep.digest = InputDigest().add(divergences).add(beta).hex();
  rep.lower_bound = true;
  const auto soft = softmin<double>(divergences, beta);
  Eigen::Index best = 0;
  divergences.minCoeff(&best);
  rep.measured = soft.weights[best];
  const double gap = empirical_gap(divergences);
  rep.bound = 1.0 / (1.0 + interference(std::size_t(divergences.size()), beta, gap));
  rep.tolerance = 1e-12;
  return finish(rep);
}

AuditReport audit_energy_gap(const VectorXd& divergences, double beta) {
  AuditReport rep;
  rep.name = "energy_gap";
  rep.digest = InputDigest().add(divergences).add(beta).hex();
  const double lowest = divergences.minCoeff();
  rep.measured = lowest - softmin<double>(divergences, beta).value;
  const double gap = empirical_gap(divergences);
  rep.bound = std::log1p(interference(std::size_t(divergences.size()), beta, gap)) / beta;
  rep.tolerance = 1e-12 * std::max(1.0, std::abs(lowest));
  rep = finish(rep);
  // The gap is also bounded below by zero, and the independent softmin must agree.
  const double independent = lowest - plain_softmin(divergences, beta);
  if (rep.measured < -rep.tolerance ||
      std::abs(independent - rep.measured) > 1e-10 * std::max(1.0, std::abs(lowest))) {
    rep.pass = false;
    rep.status = AuditStatus::Failed;
    rep.note = "energy above min divergence or softmin paths disagree";
  }
  return rep;
}

AuditReport audit_margin_separation(const PatternBank<double>& bank, double r, double delta,
                                    int probe_count, std::uint64_t seed,
                                    std::vector<MarginViolation>* violations) {
  AuditReport rep;
  rep.name = "margin_separation";
  InputDigest dig;
  for (const auto& x : bank.patterns) dig.add(x);
  dig.add(r).add(delta).add(double(probe_count)).add(double(seed));
  rep.digest = dig.hex();
  if (bank.size() < 2) return skipped(rep.name, rep.digest, "needs at least two patterns");
  if (!(r > 0)) return skipped(rep.name, rep.digest, "basin radius r must be positive");

  rep.lower_bound = true;
  rep.bound = delta;
  rep.tolerance = 1e-9;
  rep.measured = std::numeric_limits<double>::infinity();
  const auto ot = precise_config(bank.epsilon, 1e-11, 2000);
  std::size_t worst_i = 0, worst_j = 0;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& target = bank.patterns[i];
    std::mt19937_64 rng = pattern_stream(seed, i);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int probe = 0; probe < std::max(probe_count, 1); ++probe) {
      Measure xi = target;
      if (probe > 0) {
        MatrixXd noise(target.dim(), target.size());
        for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = gauss(rng);
        double scale = 1.0;
        for (int shrink = 0; shrink < 80; ++shrink, scale *= 0.5) {
          Measure trial(target.weights(), target.supports() + scale * noise);
          if (divergence(trial, target, ot) <= r) {
            xi = std::move(trial);
            break;
          }
        }
      }
      const double own = divergence(xi, target, ot);
      for (std::size_t j = 0; j < bank.size(); ++j) {
        if (j == i) continue;
        const double gap = divergence(xi, bank.patterns[j], ot) - own;
        if (gap < rep.measured) {
          rep.measured = gap;
          worst_i = i;
          worst_j = j;
        }
        if (violations && gap < delta - rep.tolerance)
          violations->push_back({i, j, static_cast<std::size_t>(probe), gap});
      }
    }
  }
  rep = finish(rep);
  std::ostringstream note;
  note << "smallest gap between pattern " << worst_i << " and pattern " << worst_j;
  rep.note = note.str();
  return rep;
}

double fixed_point_displacement(const PatternBank<double>& bank, std::size_t i,
                                const RetrievalConfig<double>& cfg) {
  RetrievalConfig<double> one = cfg;
  one.max_iter = 1;
  const auto ot = precise_config(bank.epsilon, 1e-11, 2000);
  const auto trace = retrieve(bank.patterns[i], bank, one, ot);
  if (trace.status == TraceStatus::Error) throw NumericError(trace.message);
  return divergence(bank.patterns[i], trace.final_measure(), precise_config(bank.epsilon));
}

AuditReport audit_fixed_point(const PatternBank<double>& bank, std::size_t i,
                              const RetrievalConfig<double>& cfg) {
  AuditReport rep;
  rep.name = "fixed_point";
  InputDigest dig;
  for (const auto& x : bank.patterns) dig.add(x);
  dig.add(double(i)).add(cfg.beta).add(cfg.eta).add(cfg.lambda);
  rep.digest = dig.hex();
  if (i >= bank.size()) return skipped(rep.name, rep.digest, "pattern index out of range");

  rep.measured = fixed_point_displacement(bank, i, cfg);
  const double gap = pattern_gap(bank, i, precise_config(bank.epsilon));
  const double D = bank.domain.diameter();
  const double lam2 = cfg.lambda * cfg.lambda;
  const double G = D * std::sqrt(1.0 + D * D / lam2);
  const double stretch = std::min(std::exp(cfg.eta * D * D / lam2), 1.0 / std::sqrt(bank.params.a_min));
  const double leak = interference(bank.size(), cfg.beta, gap);
  rep.bound = stretch * cfg.eta * G * G * leak / (1.0 + leak);
  rep.tolerance = 1e-9;
  std::ostringstream note;
  note << "empirical gap " << gap;
  rep.note = note.str();
  return finish(rep);
}

AuditReport audit_minimizer_proximity(const PatternBank<double>& bank, std::size_t i,
                                      const RetrievalConfig<double>& cfg) {
  AuditReport rep;
  rep.name = "minimizer_proximity";
  InputDigest dig;
  for (const auto& x : bank.patterns) dig.add(x);
  dig.add(double(i)).add(cfg.beta).add(cfg.eta).add(cfg.lambda).add(double(cfg.max_iter));
  rep.digest = dig.hex();
  if (i >= bank.size()) return skipped(rep.name, rep.digest, "pattern index out of range");

  const auto precise = precise_config(bank.epsilon);
  const auto trace = retrieve(bank.patterns[i], bank, cfg, precise_config(bank.epsilon, 1e-11, 2000));
  if (trace.status == TraceStatus::Error) return skipped(rep.name, rep.digest, trace.message);
  const Measure& limit = trace.final_measure();
  rep.measured = divergence(limit, bank.patterns[i], precise);
  // Gap taken at both ends of the run; the smaller one gives the looser bound.
  double gap = pattern_gap(bank, i, precise);
  for (std::size_t j = 0; j < bank.size(); ++j) {
    if (j == i) continue;
    gap = std::min(gap, divergence(limit, bank.patterns[j], precise) - rep.measured);
  }
  const double leak = interference(bank.size(), cfg.beta, gap);
  rep.bound = std::log1p(leak) / cfg.beta;
  rep.tolerance = 1e-8;
  std::ostringstream note;
  note << "status " << to_string(trace.status) << " after " << trace.steps
       << " steps; weaker form (N-1)/beta e^{-beta gap} = " << leak / cfg.beta;
  rep.note = note.str();
  return finish(rep);
}

namespace {

struct Analytic {
  MatrixXd position;  // a_m (T_0(x_m) - T(x_m))
  VectorXd phi;       // f_cross - f_sym
};

Analytic analytic_gradient(const Measure& xi, const Measure& nu, const SinkhornConfig<double>& cfg) {
  const auto cross = sinkhorn_solve(xi, nu, cfg);
  const auto self = symmetric_self_potential(xi, cfg);
  const MatrixXd t_cross = barycentric_map(coupling(xi, nu, cross, cfg), xi.weights(), nu.supports());
  const MatrixXd t_self = barycentric_map(self_coupling(xi, self, cfg), xi.weights(), xi.supports());
  return {(t_self - t_cross) * xi.weights().asDiagonal(), cross.f - self.f_sym};
}

double relative_error(const MatrixXd& fd, const MatrixXd& an) {
  if (fd.size() == 0) return 0;
  const double scale = std::max(an.cwiseAbs().maxCoeff(), 1e-4);
  return (fd - an).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

AuditReport audit_fd_gradients(const Measure& xi, const Measure& pattern, double eps, double h,
                               GradientCheck* detail) {
  AuditReport rep;
  rep.name = "fd_gradients";
  rep.digest = InputDigest().add(xi).add(pattern).add(eps).add(h).hex();
  if (eps < 1e-3) return skipped(rep.name, rep.digest, "eps below 1e-3 is refused");
  if (!(h > 0)) return skipped(rep.name, rep.digest, "step h must be positive");

  const auto cfg = precise_config(eps, 1e-13, 2000);
  const auto S = [&](const Measure& m) { return sinkhorn_divergence(m, pattern, cfg).value; };
  GradientCheck chk;
  const auto an = analytic_gradient(xi, pattern, cfg);
  chk.position_analytic = an.position;
  chk.position_fd.resize(xi.dim(), xi.size());
  for (Eigen::Index m = 0; m < xi.size(); ++m) {
    for (Eigen::Index k = 0; k < xi.dim(); ++k) {
      MatrixXd up = xi.supports(), down = xi.supports();
      up(k, m) += h;
      down(k, m) -= h;
      chk.position_fd(k, m) =
          (S(Measure(xi.weights(), up)) - S(Measure(xi.weights(), down))) / (2 * h);
    }
  }
  const auto& a = xi.weights();
  for (Eigen::Index m = 0; m + 1 < xi.size(); ++m) chk.directions.emplace_back(int(m), int(m + 1));
  chk.weight_analytic.resize(Eigen::Index(chk.directions.size()));
  chk.weight_fd.resize(Eigen::Index(chk.directions.size()));
  for (std::size_t q = 0; q < chk.directions.size(); ++q) {
    const auto [m, n] = chk.directions[q];
    const double step = std::min(h, 0.5 * std::min(a[m], a[n]));
    VectorXd up = a, down = a;
    up[m] += step;
    up[n] -= step;
    down[m] -= step;
    down[n] += step;
    chk.weight_fd[Eigen::Index(q)] =
        (S(Measure(up, xi.supports())) - S(Measure(down, xi.supports()))) / (2 * step);
    chk.weight_analytic[Eigen::Index(q)] = an.phi[m] - an.phi[n];
  }
  chk.position_error = relative_error(chk.position_fd, chk.position_analytic);
  chk.weight_error = relative_error(chk.weight_fd, chk.weight_analytic);
  rep.measured = std::max(chk.position_error, chk.weight_error);
  rep.bound = 1e-3;
  rep.tolerance = 0;
  rep = finish(rep);
  std::ostringstream note;
  note << "eps " << eps << ", position error " << chk.position_error << ", weight error "
       << chk.weight_error;
  if (eps < 0.05) note << "; eps below 0.05, finite differences may be noisy";
  rep.note = note.str();
  if (detail) *detail = std::move(chk);
  return rep;
}

RetractionConstants eta_ret(const Measure& pattern, double delta, double tau, double lambda,
                            const DomainSpec<double>& dom, const MeasureParams& params,
                            double eps) {
  if (pattern.dim() != dom.dim()) throw StructuralError("pattern and domain dimensions differ");
  if (!(lambda > 0)) throw ConfigError("eta_ret: lambda must be positive");
  RetractionConstants c;
  const auto& b = pattern.weights();
  const double b_min = b.minCoeff();
  c.weight_margin = b_min - params.a_min;
  c.boundary = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < pattern.size(); ++m)
    c.boundary = std::min(c.boundary, dom.boundary_distance(pattern.atom(m)));
  c.separation = min_separation<double>(pattern.supports());

  const double delta_cap = std::min(c.boundary, (c.separation - params.delta_min) / 2);
  if (!(delta > 0)) throw ConfigError("eta_ret: need delta > 0");
  if (!(delta < delta_cap)) {
    std::ostringstream msg;
    msg << "eta_ret: need delta < min{d_boundary, (s - delta_min)/2} = " << delta_cap;
    throw ConfigError(msg.str());
  }
  if (!(tau > 0)) throw ConfigError("eta_ret: need tau > 0");
  if (!(tau < c.weight_margin)) {
    std::ostringstream msg;
    msg << "eta_ret: need tau < min_m b_m - a_min = " << c.weight_margin;
    throw ConfigError(msg.str());
  }

  const double D = dom.diameter();
  const double reweight = lambda * lambda / (2 * D * D) * std::log((b_min - tau) / params.a_min);
  const double move = std::min(c.boundary - delta, c.separation - 2 * delta - params.delta_min) / (2 * D);
  c.eta_ret = std::min(reweight, move);
  const double entropy = eps * std::log(double(pattern.size()));
  c.r_loc = std::min(params.a_min * delta * delta / 2 - entropy,
                     tau * (c.separation - delta) * (c.separation - delta) / 4 - entropy);
  return c;
}

}  // namespace otdam
