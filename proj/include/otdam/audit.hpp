#pragma once

// Numeric checks of the computable bounds: each audit measures a quantity, evaluates the
// bound from its closed form, and reports the slack.

#include "otdam/retrieval.hpp"
#include "otdam/sampling.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace otdam {

enum class AuditStatus { Passed, Failed, Skipped };

const char* to_string(AuditStatus s);

struct AuditReport {
  std::string name;
  std::string digest;   // FNV-1a of the numeric inputs
  double bound = 0;
  double measured = 0;
  double slack = 0;     // bound - measured (measured - bound for lower bounds)
  bool lower_bound = false;
  bool pass = false;
  double tolerance = 0;
  AuditStatus status = AuditStatus::Failed;
  std::string note;
};

/// Hex FNV-1a digest over the raw bytes of a list of arrays.
class InputDigest {
 public:
  InputDigest& add(double v);
  InputDigest& add(const VectorXd& v);
  InputDigest& add(const MatrixXd& v);
  InputDigest& add(const Measure& mu);
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Sinkhorn settings used when an audit needs values well below the retrieval tolerance.
SinkhornConfig<double> precise_config(double eps, double tol = 1e-12, int max_iter = 2000);

AuditReport audit_self_ot(const Measure& mu, double eps);
AuditReport audit_mean_bound(const Measure& mu, const Measure& nu, double eps);
AuditReport audit_softmin_lipschitz(const VectorXd& z, const VectorXd& zprime, double beta);
AuditReport audit_grad_bound(const Measure& xi, const Measure& pattern, double lambda,
                             const DomainSpec<double>& dom, double eps);
/// w_best >= 1 / (1 + (N-1) e^{-beta gap}), gap = second-smallest minus smallest divergence.
AuditReport audit_gibbs_weight(const VectorXd& divergences, double beta);
/// 0 <= min_i S_i - E <= (1/beta) log(1 + (N-1) e^{-beta gap}).
AuditReport audit_energy_gap(const VectorXd& divergences, double beta);

struct MarginViolation {
  std::size_t pattern = 0, other = 0, probe = 0;
  double gap = 0;
};

/// Probes near each pattern (jitter shrunk until S(probe, X_i) <= r) must keep every other
/// pattern at least `delta` farther away in S_eps.
AuditReport audit_margin_separation(const PatternBank<double>& bank, double r, double delta,
                                    int probe_count, std::uint64_t seed,
                                    std::vector<MarginViolation>* violations = nullptr);

/// One retrieval step from X_i stays within the fixed-point bound built from the empirical
/// gap min_j S(X_i, X_j).
AuditReport audit_fixed_point(const PatternBank<double>& bank, std::size_t i,
                              const RetrievalConfig<double>& cfg);
/// S(Phi_eta(X_i), X_i) at high accuracy; also used by the fixed-point audit.
double fixed_point_displacement(const PatternBank<double>& bank, std::size_t i,
                                const RetrievalConfig<double>& cfg);

/// S(limit of retrieval from X_i, X_i) <= (1/beta) log(1 + (N-1) e^{-beta gap}).
AuditReport audit_minimizer_proximity(const PatternBank<double>& bank, std::size_t i,
                                      const RetrievalConfig<double>& cfg);

struct GradientCheck {
  MatrixXd position_analytic, position_fd;  // d x M
  std::vector<std::pair<int, int>> directions;
  VectorXd weight_analytic, weight_fd;      // one entry per direction e_m - e_n
  double position_error = 0, weight_error = 0;
};

/// Position and simplex-tangent weight derivatives of S_eps(xi, pattern) against central
/// differences. Errors are |fd - analytic|_inf / max(|analytic|_inf, 1e-4).
AuditReport audit_fd_gradients(const Measure& xi, const Measure& pattern, double eps,
                               double h = 1e-5, GradientCheck* detail = nullptr);

struct RetractionConstants {
  double weight_margin = 0;  // w_i = min_m (b_m - a_min)
  double boundary = 0;       // d_i
  double separation = 0;     // s_i
  double eta_ret = 0;
  double r_loc = 0;
};

/// Step-size and local-radius constants of a stored pattern for given (delta, tau).
/// Throws ConfigError naming the violated inequality when (delta, tau) is infeasible.
RetractionConstants eta_ret(const Measure& pattern, double delta, double tau, double lambda,
                            const DomainSpec<double>& dom, const MeasureParams& params,
                            double eps);

}  // namespace otdam
