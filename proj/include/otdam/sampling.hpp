#pragma once

// Random pattern banks with separated means, and the capacity/separation constants
// that go with them.

#include "otdam/retrieval.hpp"

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace otdam {

struct SampleConfig {
  int dim = 2;
  VectorXd center;  // empty means the origin
  double R = 10.0;
  double sigma = 1.0;
  double gamma = 0.5;
  double p = 0.05;
  int M = 4;
  double a_min = 0.05;
  double delta_min = 0.1;
  double eps = 0.05;
  std::uint64_t seed = 0;

  VectorXd center_or_origin() const;
  /// Everything except the shape-set feasibility, which sample_patterns probes.
  void validate() const;
};

struct CapacityResult {
  std::uint64_t n = 0;
  bool saturated = false;  // true value exceeds the 1e9 cap; n holds the cap
  bool empty = false;      // n = 0: no pattern is storable at this budget
};

inline constexpr std::uint64_t kCapacityCap = 1000000000ULL;

/// floor(sqrt(2p) exp(gamma^2 d / 4)), evaluated in log space.
CapacityResult capacity(double p, double gamma, int d);

struct TheoryConstants {
  CapacityResult capacity;
  double R0 = 0;     // R - 2 sigma
  double d_min = 0;  // sqrt(2 (1 - gamma)) R0
  double r = 0;      // d_min^2 / 32 - eps log M
  double delta = 0;  // d_min^2 / 4
};

/// Throws ConfigError naming "r <= 0" when eps log M >= d_min^2 / 32.
TheoryConstants theory_constants(const SampleConfig& cfg);

/// Independent per-pattern stream: splitmix64 of (seed, index) seeds a mt19937_64.
std::mt19937_64 pattern_stream(std::uint64_t seed, std::uint64_t index);

struct SampledBank {
  PatternBank<double> bank;
  std::vector<VectorXd> means;               // mu_i = c + (R0 / sqrt d) s_i
  std::vector<std::vector<int>> signs;       // s_i
  std::vector<Points<double>> shapes;        // z_i before mean correction
  TheoryConstants constants;
  int shape_attempts_max = 0;
};

inline constexpr int kShapeAttemptCap = 100000;

/// M iid uniform points in B(0, sigma), redrawn until every pairwise gap exceeds delta_min.
/// Returns the shape and the number of draws used; throws ConfigError past the cap.
std::pair<Points<double>, int> sample_shape(int dim, int atoms, double sigma, double delta_min,
                                            std::mt19937_64& rng);

/// Sampled bank over the ball Omega = B(c, R + sigma), which contains closed B(c, R).
SampledBank sample_patterns(const SampleConfig& cfg, std::size_t count);

struct SeparationStats {
  std::size_t pair_count = 0;
  double min_mean_distance = 0;  // +inf with fewer than two patterns
  std::size_t closest_i = 0, closest_j = 0;
  std::size_t pairs_below_d_min = 0;
  bool event_a = true;  // every mean pair at least d_min apart
  bool divergence_computed = false;
  double min_pattern_divergence = 0;
};

SeparationStats separation_stats(const PatternBank<double>& bank, const TheoryConstants& consts,
                                 bool with_divergence = true);

}  // namespace otdam
