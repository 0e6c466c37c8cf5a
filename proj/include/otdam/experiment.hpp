#pragma once

// The two synthetic Gaussian point-cloud experiments, run with both the transport
// retrieval and the Euclidean baseline.

#include "otdam/io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace otdam {

enum class QueryOrder { Aligned, Shuffled };

const char* to_string(QueryOrder q);
QueryOrder query_order_from_string(const std::string& s);

struct ExperimentConfig {
  std::string id = "exp1";  // exp1 | exp2 | custom
  int N = 5;
  int d = 2;
  int M = 30;
  double beta = 50;
  double eps = 0.05;
  double eta = 1.3;
  double lambda = 1.0;
  double noise_sd = 0.5;
  int max_iter = 200;
  int sinkhorn_cap = 120;
  double sinkhorn_tol = 1e-9;
  double stop_tol = 1e-7;
  double weight_tol = 1e-9;
  bool weight_step = false;
  QueryOrder query_order = QueryOrder::Shuffled;
  int euclid_max_iter = 200;
  double euclid_stop_tol = 1e-9;
  int classify_cap = 1000;  // Sinkhorn cap for the nearest-pattern rule
  std::uint64_t seed = 0;
  /// custom runs: Gaussian generators, one mean and one covariance per pattern
  std::vector<VectorXd> means;
  std::vector<MatrixXd> covariances;

  static ExperimentConfig exp1(std::uint64_t seed);
  static ExperimentConfig exp2(std::uint64_t seed);
  void validate() const;
};

/// Apply overrides from a JSON object using the field names above.
ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& cfg);

/// Five fixed 2-D Gaussians, 30 uniformly weighted samples each.
PatternBank<double> build_experiment1(std::uint64_t seed);
/// Five zero-mean 2-D Gaussians with random rotations and eigenvalues in [0.15, 1.75].
PatternBank<double> build_experiment2(std::uint64_t seed);
/// Covariances drawn by build_experiment2 for this seed (exposed for tests).
std::vector<MatrixXd> experiment2_covariances(std::uint64_t seed);

/// Bank for any config: the fixed generators for exp1, the random ones for exp2, the
/// explicit means/covariances for custom.
PatternBank<double> build_bank(const ExperimentConfig& cfg);

/// Axis-aligned bounding box of every atom, widened by 20% of its extent on each side.
DomainSpec<double> padded_box(const std::vector<Measure>& clouds, double padding = 0.2);

/// Pattern i with iid Gaussian noise on its supports, optionally with atoms permuted.
Measure make_query(const Measure& pattern, double noise_sd, QueryOrder order, std::uint64_t seed,
                   std::size_t index);

struct PatternOutcome {
  PatternOutcome(std::size_t t, Measure q) : target(t), query(std::move(q)) {}

  std::size_t target = 0;
  Measure query;
  // transport retrieval
  std::optional<Measure> shk_final;
  std::size_t shk_index = 0;
  bool shk_success = false;
  VectorXd shk_divergences;
  int shk_iterations = 0;
  std::string shk_status;
  int clipped = 0;
  std::string error;
  // Euclidean baseline
  std::optional<Measure> euclid_final;
  std::size_t euclid_index = 0;
  bool euclid_success = false;
  VectorXd euclid_divergences;
  int euclid_steps = 0;
  bool euclid_converged = false;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<PatternOutcome> outcomes;
  int shk_successes() const;
  int euclid_successes() const;
};

struct RunArtifacts {
  std::vector<std::string> shk_traces;     // CSV text per pattern
  std::vector<std::string> euclid_traces;
};

RunResult run_experiment(const ExperimentConfig& cfg, RunArtifacts* artifacts = nullptr);

Json result_to_json(const RunResult& r);
/// Columns pattern, role, atom, x1..xd, weight; roles query, retrieved, target.
std::string plotdata_csv(const RunResult& r, const PatternBank<double>& bank);

/// Runs and writes result.json, plotdata.csv and per-pattern traces into dir.
RunResult run_and_write(const ExperimentConfig& cfg, const std::string& dir);

}  // namespace otdam
