#include "otdam/sampling.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace otdam {

VectorXd SampleConfig::center_or_origin() const {
  return center.size() == 0 ? VectorXd::Zero(dim) : center;
}

void SampleConfig::validate() const {
  if (dim < 1) throw ConfigError("SampleConfig: dim must be >= 1");
  if (center.size() != 0 && center.size() != dim)
    throw StructuralError("SampleConfig: center has the wrong dimension");
  if (!(R > 0)) throw ConfigError("SampleConfig: R must be positive");
  if (!(sigma > 0 && sigma < R / 4)) throw ConfigError("SampleConfig: need 0 < sigma < R/4");
  if (!(gamma > 0 && gamma < 1)) throw ConfigError("SampleConfig: need 0 < gamma < 1");
  if (!(p > 0 && p < 1)) throw ConfigError("SampleConfig: need 0 < p < 1");
  if (!(eps > 0)) throw ConfigError("SampleConfig: eps must be positive");
  MeasureParams{M, a_min, delta_min}.validate();
}

CapacityResult capacity(double p, double gamma, int d) {
  if (!(p > 0 && p < 1)) throw ConfigError("capacity: need 0 < p < 1");
  if (!(gamma >= 0 && gamma < 1)) throw ConfigError("capacity: need 0 <= gamma < 1");
  if (d < 1) throw ConfigError("capacity: need d >= 1");
  using LD = long double;
  const LD log_n = LD(0.5) * std::log(LD(2) * LD(p)) + LD(gamma) * LD(gamma) * LD(d) / LD(4);
  CapacityResult out;
  if (log_n >= std::log(LD(kCapacityCap))) {
    out.n = kCapacityCap;
    out.saturated = true;
    return out;
  }
  LD n = std::floor(std::exp(log_n));
  // exp can land a hair off an integer; settle the floor by comparing logs.
  if (n >= 1 && std::log(n) > log_n) n -= 1;
  if (std::log(n + 1) <= log_n) n += 1;
  out.n = static_cast<std::uint64_t>(n);
  out.empty = out.n == 0;
  return out;
}

TheoryConstants theory_constants(const SampleConfig& cfg) {
  if (!(cfg.R > 0)) throw ConfigError("theory_constants: R must be positive");
  if (!(cfg.sigma >= 0 && cfg.sigma < cfg.R / 4))
    throw ConfigError("theory_constants: need 0 <= sigma < R/4");
  if (!(cfg.gamma >= 0 && cfg.gamma < 1)) throw ConfigError("theory_constants: need 0 <= gamma < 1");
  if (cfg.M < 1) throw ConfigError("theory_constants: M must be >= 1");
  TheoryConstants c;
  c.capacity = capacity(cfg.p, cfg.gamma, cfg.dim);
  c.R0 = cfg.R - 2 * cfg.sigma;
  c.d_min = std::sqrt(2 * (1 - cfg.gamma)) * c.R0;
  const double budget = c.d_min * c.d_min / 32;
  const double entropy = cfg.eps * std::log(double(cfg.M));
  c.r = budget - entropy;
  c.delta = c.d_min * c.d_min / 4;
  if (!(c.r > 1e-12 * budget)) {
    std::ostringstream msg;
    msg << "r <= 0: eps log M = " << entropy << " must be below d_min^2/32 = " << budget;
    throw ConfigError(msg.str());
  }
  return c;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

VectorXd uniform_in_ball(int dim, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VectorXd dir(dim);
  double norm = 0;
  do {
    for (int k = 0; k < dim; ++k) dir[k] = gauss(rng);
    norm = dir.norm();
  } while (norm == 0);
  return dir * (radius * std::pow(unif(rng), 1.0 / dim) / norm);
}

}  // namespace

std::mt19937_64 pattern_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{splitmix64(seed), splitmix64(seed ^ splitmix64(index + 1))};
  return std::mt19937_64(seq);
}

std::pair<Points<double>, int> sample_shape(int dim, int atoms, double sigma, double delta_min,
                                            std::mt19937_64& rng) {
  Points<double> z(dim, atoms);
  for (int attempt = 1; attempt <= kShapeAttemptCap; ++attempt) {
    for (int m = 0; m < atoms; ++m) z.col(m) = uniform_in_ball(dim, sigma, rng);
    if (min_separation<double>(z) > delta_min) return {z, attempt};
  }
  std::ostringstream msg;
  msg << "no separated shape after " << kShapeAttemptCap << " draws: sigma = " << sigma
      << ", delta_min = " << delta_min << ", M = " << atoms;
  throw ConfigError(msg.str());
}

SampledBank sample_patterns(const SampleConfig& cfg, std::size_t count) {
  cfg.validate();
  if (count < 1) throw ConfigError("sample_patterns: count must be >= 1");
  SampledBank out;
  out.constants = theory_constants(cfg);
  const VectorXd c = cfg.center_or_origin();
  const double R0 = out.constants.R0;
  const double lift = R0 / std::sqrt(double(cfg.dim));

  auto& bank = out.bank;
  bank.params = MeasureParams{cfg.M, cfg.a_min, cfg.delta_min};
  bank.domain = DomainSpec<double>::ball(c, cfg.R + cfg.sigma);
  bank.epsilon = cfg.eps;

  for (std::size_t i = 0; i < count; ++i) {
    auto rng = pattern_stream(cfg.seed, i);
    std::bernoulli_distribution coin(0.5);
    std::exponential_distribution<double> expo(1.0);

    std::vector<int> s(static_cast<std::size_t>(cfg.dim));
    VectorXd mean = c;
    for (int k = 0; k < cfg.dim; ++k) {
      s[static_cast<std::size_t>(k)] = coin(rng) ? 1 : -1;
      mean[k] += lift * s[static_cast<std::size_t>(k)];
    }

    // Flat Dirichlet via normalized exponentials, shifted onto the a_min floor.
    VectorXd dir(cfg.M);
    for (int m = 0; m < cfg.M; ++m) dir[m] = expo(rng);
    dir /= dir.sum();
    VectorXd b = VectorXd::Constant(cfg.M, cfg.a_min) + (1 - cfg.M * cfg.a_min) * dir;
    b /= b.sum();

    auto [z, attempts] = sample_shape(cfg.dim, cfg.M, cfg.sigma, cfg.delta_min, rng);
    out.shape_attempts_max = std::max(out.shape_attempts_max, attempts);
    const VectorXd zbar = z * b;
    Points<double> y = (z.colwise() - zbar).colwise() + mean;

    DiscreteMeasure<double> pattern(b, y);
    if ((pattern.mean() - mean).cwiseAbs().maxCoeff() > 1e-10)
      throw NumericError("sampled pattern mean drifted from its target");
    for (int m = 0; m < cfg.M; ++m)
      if ((y.col(m) - c).norm() > cfg.R * (1 + 1e-12))
        throw NumericError("sampled atom outside the closed ball B(c, R)");

    bank.patterns.push_back(std::move(pattern));
    out.means.push_back(mean);
    out.signs.push_back(std::move(s));
    out.shapes.push_back(std::move(z));
  }
  return out;
}

SeparationStats separation_stats(const PatternBank<double>& bank, const TheoryConstants& consts,
                                 bool with_divergence) {
  SeparationStats st;
  st.min_mean_distance = std::numeric_limits<double>::infinity();
  st.min_pattern_divergence = std::numeric_limits<double>::infinity();
  std::vector<VectorXd> means;
  for (const auto& x : bank.patterns) means.push_back(x.mean());
  SinkhornConfig<double> ot;
  ot.epsilon = bank.epsilon;
  ot.max_iter = 2000;
  for (std::size_t i = 0; i < means.size(); ++i) {
    for (std::size_t j = i + 1; j < means.size(); ++j) {
      ++st.pair_count;
      const double dist = (means[i] - means[j]).norm();
      if (dist < st.min_mean_distance) {
        st.min_mean_distance = dist;
        st.closest_i = i;
        st.closest_j = j;
      }
      if (dist < consts.d_min * (1 - 1e-12)) ++st.pairs_below_d_min;
      if (with_divergence) {
        const double s = sinkhorn_divergence(bank.patterns[i], bank.patterns[j], ot).value;
        st.min_pattern_divergence = std::min(st.min_pattern_divergence, s);
      }
    }
  }
  st.event_a = st.pairs_below_d_min == 0;
  st.divergence_computed = with_divergence && st.pair_count > 0;
  return st;
}

}  // namespace otdam
