#include "otdam/experiment.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

namespace otdam {

namespace {

// Stream tags so patterns, covariances and query noise never share a generator.
constexpr std::uint64_t kCovarianceTag = 0xC0FA7A1A5EEDULL;
constexpr std::uint64_t kQueryTag = 0x0E4E1D5EEDULL;

const std::vector<VectorXd>& exp1_means() {
  static const std::vector<VectorXd> means = [] {
    std::vector<VectorXd> out;
    for (auto [x, y] : {std::pair{-4.0, -1.0}, {-2.0, 2.2}, {1.0, -6.0}, {4.0, -4.2}, {4.2, -0.8}})
      out.push_back((VectorXd(2) << x, y).finished());
    return out;
  }();
  return means;
}

const std::vector<MatrixXd>& exp1_covariances() {
  static const std::vector<MatrixXd> covs = [] {
    std::vector<MatrixXd> out;
    const double entries[5][3] = {
        {0.60, 0.20, 0.90}, {0.80, -0.15, 0.55}, {0.65, 0.0, 0.65}, {0.55, 0.10, 1.00}, {0.95, 0.0, 0.50}};
    for (const auto& e : entries) out.push_back((MatrixXd(2, 2) << e[0], e[1], e[1], e[2]).finished());
    return out;
  }();
  return covs;
}

Points<double> gaussian_cloud(const VectorXd& mean, const MatrixXd& cov, int count,
                              std::mt19937_64& rng) {
  const Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ConfigError("covariance is not positive definite");
  const MatrixXd L = llt.matrixL();
  std::normal_distribution<double> gauss(0.0, 1.0);
  Points<double> x(mean.size(), count);
  for (int m = 0; m < count; ++m) {
    VectorXd z(mean.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = gauss(rng);
    x.col(m) = mean + L * z;
  }
  return x;
}

PatternBank<double> gaussian_bank(const std::vector<VectorXd>& means,
                                  const std::vector<MatrixXd>& covs, int atoms, std::uint64_t seed) {
  if (means.size() != covs.size() || means.empty())
    throw ConfigError("need one covariance per mean and at least one pattern");
  PatternBank<double> bank;
  for (std::size_t i = 0; i < means.size(); ++i) {
    auto rng = pattern_stream(seed, i);
    bank.patterns.push_back(Measure::uniform(gaussian_cloud(means[i], covs[i], atoms, rng)));
  }
  bank.params = MeasureParams{atoms, 0.5 / atoms, 1e-6};
  bank.domain = padded_box(bank.patterns);
  return bank;
}

}  // namespace

const char* to_string(QueryOrder q) { return q == QueryOrder::Aligned ? "aligned" : "shuffled"; }

QueryOrder query_order_from_string(const std::string& s) {
  if (s == "aligned") return QueryOrder::Aligned;
  if (s == "shuffled") return QueryOrder::Shuffled;
  throw ConfigError("query_order must be 'aligned' or 'shuffled'");
}

ExperimentConfig ExperimentConfig::exp1(std::uint64_t seed) {
  ExperimentConfig c;
  c.id = "exp1";
  c.M = 30;
  c.noise_sd = 0.5;
  c.seed = seed;
  return c;
}

ExperimentConfig ExperimentConfig::exp2(std::uint64_t seed) {
  ExperimentConfig c;
  c.id = "exp2";
  c.M = 25;
  c.noise_sd = 0.2;
  c.seed = seed;
  return c;
}

void ExperimentConfig::validate() const {
  if (id != "exp1" && id != "exp2" && id != "custom")
    throw ConfigError("experiment id must be exp1, exp2 or custom");
  if (N < 1 || d < 1 || M < 2) throw ConfigError("experiment needs N >= 1, d >= 1, M >= 2");
  if (!(beta > 0 && eps > 0 && eta >= 0 && lambda > 0)) throw ConfigError("invalid beta/eps/eta/lambda");
  if (!(noise_sd >= 0)) throw ConfigError("noise_sd must be nonnegative");
  if (max_iter < 1 || sinkhorn_cap < 1 || euclid_max_iter < 1 || classify_cap < 1)
    throw ConfigError("iteration caps must be >= 1");
  if ((id == "exp1" || id == "exp2") && (N != 5 || d != 2))
    throw ConfigError("exp1 and exp2 are fixed at N = 5, d = 2");
  if (id == "custom") {
    if (means.size() != std::size_t(N) || covariances.size() != std::size_t(N))
      throw ConfigError("custom experiments need N means and N covariances");
    for (std::size_t i = 0; i < means.size(); ++i)
      if (means[i].size() != d || covariances[i].rows() != d || covariances[i].cols() != d)
        throw StructuralError("custom generator has the wrong dimension");
  }
}

ExperimentConfig config_from_json(const Json& j) {
  const std::string id = j.value("id", std::string("exp1"));
  const std::uint64_t seed = j.value("seed", std::uint64_t(0));
  ExperimentConfig c = id == "exp2" ? ExperimentConfig::exp2(seed) : ExperimentConfig::exp1(seed);
  c.id = id;
  c.N = j.value("N", c.N);
  c.d = j.value("d", c.d);
  c.M = j.value("M", c.M);
  c.beta = j.value("beta", c.beta);
  c.eps = j.value("eps", c.eps);
  c.eta = j.value("eta", c.eta);
  c.lambda = j.value("lambda", c.lambda);
  c.noise_sd = j.value("noise_sd", c.noise_sd);
  c.max_iter = j.value("max_iter", c.max_iter);
  c.sinkhorn_cap = j.value("sinkhorn_cap", c.sinkhorn_cap);
  c.sinkhorn_tol = j.value("sinkhorn_tol", c.sinkhorn_tol);
  c.stop_tol = j.value("stop_tol", c.stop_tol);
  c.weight_tol = j.value("weight_tol", c.weight_tol);
  c.weight_step = j.value("weight_step", c.weight_step);
  if (j.contains("query_order")) c.query_order = query_order_from_string(j.at("query_order").get<std::string>());
  c.euclid_max_iter = j.value("euclid_max_iter", c.euclid_max_iter);
  c.euclid_stop_tol = j.value("euclid_stop_tol", c.euclid_stop_tol);
  c.classify_cap = j.value("classify_cap", c.classify_cap);
  if (j.contains("means"))
    for (const auto& m : j.at("means")) c.means.push_back(vector_from_json(m));
  if (j.contains("covariances")) {
    for (const auto& cov : j.at("covariances")) {
      MatrixXd mat(Eigen::Index(cov.size()), Eigen::Index(cov.size()));
      for (std::size_t r = 0; r < cov.size(); ++r) mat.row(Eigen::Index(r)) = vector_from_json(cov[r]).transpose();
      c.covariances.push_back(mat);
    }
  }
  c.validate();
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j{{"id", c.id},          {"N", c.N},
         {"d", c.d},            {"M", c.M},
         {"beta", c.beta},      {"eps", c.eps},
         {"eta", c.eta},        {"lambda", c.lambda},
         {"noise_sd", c.noise_sd}, {"max_iter", c.max_iter},
         {"sinkhorn_cap", c.sinkhorn_cap}, {"sinkhorn_tol", c.sinkhorn_tol},
         {"stop_tol", c.stop_tol}, {"weight_tol", c.weight_tol},
         {"weight_step", c.weight_step}, {"query_order", to_string(c.query_order)},
         {"euclid_max_iter", c.euclid_max_iter}, {"euclid_stop_tol", c.euclid_stop_tol},
         {"classify_cap", c.classify_cap}, {"seed", c.seed}};
  if (c.id == "custom") {
    Json means = Json::array(), covs = Json::array();
    for (const auto& m : c.means) means.push_back(vector_to_json(m));
    for (const auto& cov : c.covariances) {
      Json rows = Json::array();
      for (Eigen::Index r = 0; r < cov.rows(); ++r) rows.push_back(vector_to_json(cov.row(r).transpose()));
      covs.push_back(rows);
    }
    j["means"] = means;
    j["covariances"] = covs;
  }
  return j;
}

DomainSpec<double> padded_box(const std::vector<Measure>& clouds, double padding) {
  if (clouds.empty()) throw StructuralError("no point clouds to bound");
  VectorXd lo = clouds.front().supports().rowwise().minCoeff();
  VectorXd hi = clouds.front().supports().rowwise().maxCoeff();
  for (const auto& c : clouds) {
    lo = lo.cwiseMin(c.supports().rowwise().minCoeff());
    hi = hi.cwiseMax(c.supports().rowwise().maxCoeff());
  }
  const VectorXd extent = (hi - lo).cwiseMax(1e-12);
  return DomainSpec<double>::box(lo - padding * extent, hi + padding * extent);
}

PatternBank<double> build_experiment1(std::uint64_t seed) {
  return gaussian_bank(exp1_means(), exp1_covariances(), 30, seed);
}

std::vector<MatrixXd> experiment2_covariances(std::uint64_t seed) {
  std::vector<MatrixXd> covs;
  for (std::size_t i = 0; i < 5; ++i) {
    auto rng = pattern_stream(seed ^ kCovarianceTag, i);
    std::uniform_real_distribution<double> angle(0.0, 2 * M_PI);
    std::uniform_real_distribution<double> eig(0.15, 1.75);
    const double t = angle(rng);
    const double l1 = eig(rng), l2 = eig(rng);
    MatrixXd Q(2, 2);
    Q << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    covs.push_back(Q * VectorXd((VectorXd(2) << l1, l2).finished()).asDiagonal() * Q.transpose());
  }
  return covs;
}

PatternBank<double> build_experiment2(std::uint64_t seed) {
  const std::vector<VectorXd> means(5, VectorXd::Zero(2));
  return gaussian_bank(means, experiment2_covariances(seed), 25, seed);
}

PatternBank<double> build_bank(const ExperimentConfig& cfg) {
  cfg.validate();
  PatternBank<double> bank;
  if (cfg.id == "exp1" && cfg.M == 30) {
    bank = build_experiment1(cfg.seed);
  } else if (cfg.id == "exp1") {
    bank = gaussian_bank(exp1_means(), exp1_covariances(), cfg.M, cfg.seed);
  } else if (cfg.id == "exp2") {
    bank = gaussian_bank(std::vector<VectorXd>(5, VectorXd::Zero(2)),
                         experiment2_covariances(cfg.seed), cfg.M, cfg.seed);
  } else {
    bank = gaussian_bank(cfg.means, cfg.covariances, cfg.M, cfg.seed);
  }
  bank.beta = cfg.beta;
  bank.epsilon = cfg.eps;
  bank.lambda = cfg.lambda;
  return bank;
}

Measure make_query(const Measure& pattern, double noise_sd, QueryOrder order, std::uint64_t seed,
                   std::size_t index) {
  auto rng = pattern_stream(seed ^ kQueryTag, index);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Points<double> x = pattern.supports();
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] += noise_sd * gauss(rng);
  VectorXd a = pattern.weights();
  if (order == QueryOrder::Shuffled) {
    std::vector<Eigen::Index> perm(std::size_t(x.cols()));
    std::iota(perm.begin(), perm.end(), Eigen::Index(0));
    // Fisher-Yates.
    for (std::size_t k = perm.size(); k > 1; --k) {
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      std::swap(perm[k - 1], perm[pick(rng)]);
    }
    Points<double> xs(x.rows(), x.cols());
    VectorXd as(a.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      xs.col(Eigen::Index(k)) = x.col(perm[k]);
      as[Eigen::Index(k)] = a[perm[k]];
    }
    x = std::move(xs);
    a = std::move(as);
  }
  return Measure(a, x);
}

int RunResult::shk_successes() const {
  int n = 0;
  for (const auto& o : outcomes) n += o.shk_success ? 1 : 0;
  return n;
}

int RunResult::euclid_successes() const {
  int n = 0;
  for (const auto& o : outcomes) n += o.euclid_success ? 1 : 0;
  return n;
}

RunResult run_experiment(const ExperimentConfig& cfg, RunArtifacts* artifacts) {
  cfg.validate();
  const PatternBank<double> bank = build_bank(cfg);

  RetrievalConfig<double> rc;
  rc.beta = cfg.beta;
  rc.eta = cfg.eta;
  rc.lambda = cfg.lambda;
  rc.max_iter = cfg.max_iter;
  rc.stop_tol = cfg.stop_tol;
  rc.weight_tol = cfg.weight_tol;
  rc.enable_weight_step = cfg.weight_step;
  rc.boundary_policy = BoundaryPolicy::Clip;

  SinkhornConfig<double> ot;
  ot.epsilon = cfg.eps;
  ot.max_iter = cfg.sinkhorn_cap;
  ot.tol = cfg.sinkhorn_tol;

  SinkhornConfig<double> classify = ot;
  classify.max_iter = cfg.classify_cap;

  RunResult result;
  result.config = cfg;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    PatternOutcome out(i, make_query(bank.patterns[i], cfg.noise_sd, cfg.query_order, cfg.seed, i));

    const auto trace = retrieve(out.query, bank, rc, ot);
    out.shk_status = to_string(trace.status);
    out.error = trace.message;
    out.shk_iterations = trace.steps;
    out.clipped = trace.clipped_total;
    if (!trace.records.empty()) {
      out.shk_final = trace.final_measure();
      const auto cls = success_metric(*out.shk_final, bank, classify);
      out.shk_index = cls.index;
      out.shk_divergences = cls.divergences;
      out.shk_success = trace.status != TraceStatus::Error && cls.index == i;
    }

    const auto eu = retrieve_euclidean(out.query, bank.patterns, cfg.beta, cfg.euclid_max_iter,
                                       cfg.euclid_stop_tol);
    out.euclid_final = eu.final_measure;
    out.euclid_steps = eu.steps;
    out.euclid_converged = eu.converged;
    const auto ecls = success_metric(eu.final_measure, bank, classify);
    out.euclid_index = ecls.index;
    out.euclid_divergences = ecls.divergences;
    out.euclid_success = ecls.index == i;

    if (artifacts) {
      artifacts->shk_traces.push_back(trace_csv(trace));
      artifacts->euclid_traces.push_back(
          euclidean_trace_csv(eu, bank, cfg.beta, out.query.dim(), out.query.size(), classify));
    }
    result.outcomes.push_back(std::move(out));
  }
  return result;
}

Json result_to_json(const RunResult& r) {
  const PatternBank<double> bank = build_bank(r.config);
  Json runs = Json::array();
  for (const auto& o : r.outcomes) {
    Json shk{{"retrieved", o.shk_index},
             {"success", o.shk_success},
             {"status", o.shk_status},
             {"iterations", o.shk_iterations},
             {"clipped", o.clipped},
             {"final_divergences", vector_to_json(o.shk_divergences)}};
    if (!o.error.empty()) shk["error"] = o.error;
    Json eu{{"retrieved", o.euclid_index},
            {"success", o.euclid_success},
            {"steps", o.euclid_steps},
            {"converged", o.euclid_converged},
            {"final_divergences", vector_to_json(o.euclid_divergences)}};
    runs.push_back(Json{{"target", o.target}, {"sinkhorn_shk", shk}, {"euclidean", eu}});
  }
  Json meta{{"rng", "mt19937_64 per stream, seeded from splitmix64(seed, index)"},
            {"domain", domain_to_json(bank.domain)},
            {"domain_rule", "bounding box of all pattern atoms padded by 20% per axis"},
            {"query_order", to_string(r.config.query_order)},
            {"shk_stop_rule", "max displacement < stop_tol and max weight change < weight_tol, or max_iter"},
            {"euclid_stop_rule", "|xi_{k+1} - xi_k|_inf < euclid_stop_tol, or euclid_max_iter"},
            {"classification", "argmin_i S_eps(retrieved, X_i), ties to the lowest index"}};
  return Json{{"config", config_to_json(r.config)},
              {"metadata", meta},
              {"runs", runs},
              {"aggregate",
               {{"sinkhorn_shk_successes", r.shk_successes()},
                {"euclidean_successes", r.euclid_successes()},
                {"patterns", r.outcomes.size()}}}};
}

std::string plotdata_csv(const RunResult& r, const PatternBank<double>& bank) {
  const Eigen::Index d = bank.domain.dim();
  std::ostringstream out;
  out << "pattern,role,atom";
  for (Eigen::Index k = 0; k < d; ++k) out << ",x" << (k + 1);
  out << ",weight\n";
  const auto rows = [&](std::size_t i, const char* role, const Measure& mu) {
    for (Eigen::Index m = 0; m < mu.size(); ++m) {
      out << i << ',' << role << ',' << m;
      for (Eigen::Index k = 0; k < d; ++k) out << ',' << format_number(mu.supports()(k, m));
      out << ',' << format_number(mu.weights()[m]) << '\n';
    }
  };
  for (const auto& o : r.outcomes) {
    rows(o.target, "query", o.query);
    rows(o.target, "retrieved", o.shk_final ? *o.shk_final : o.query);
    rows(o.target, "target", bank.patterns[o.target]);
  }
  return out.str();
}

RunResult run_and_write(const ExperimentConfig& cfg, const std::string& dir) {
  RunArtifacts art;
  RunResult r = run_experiment(cfg, &art);
  const std::filesystem::path base(dir);
  write_text_atomic((base / "result.json").string(), dump_json(result_to_json(r)));
  write_text_atomic((base / "plotdata.csv").string(), plotdata_csv(r, build_bank(cfg)));
  for (std::size_t i = 0; i < art.shk_traces.size(); ++i) {
    write_text_atomic((base / ("trace_shk_" + std::to_string(i) + ".csv")).string(), art.shk_traces[i]);
    write_text_atomic((base / ("trace_euclid_" + std::to_string(i) + ".csv")).string(),
                      art.euclid_traces[i]);
  }
  return r;
}

}  // namespace otdam
