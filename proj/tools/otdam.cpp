// Command-line front end: sample, retrieve, audit, experiment.

#include "otdam/audit.hpp"
#include "otdam/experiment.hpp"
#include "otdam/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <random>

using namespace otdam;

namespace {

int cmd_sample(SampleConfig cfg, long long count, const std::string& out) {
  const TheoryConstants consts = theory_constants(cfg);
  std::size_t n = count > 0 ? std::size_t(count) : std::size_t(consts.capacity.n);
  if (n == 0) {
    std::cerr << "capacity is 0 at this budget; pass --count to sample anyway\n";
    return 2;
  }
  if (consts.capacity.saturated && count <= 0) {
    std::cerr << "capacity saturates at " << kCapacityCap << "; pass --count\n";
    return 2;
  }
  const SampledBank sb = sample_patterns(cfg, n);
  const SeparationStats st = separation_stats(sb.bank, consts);
  write_text_atomic(out, dump_json(bank_to_json(sb.bank, consts)));

  Json report{{"config",
               {{"dim", cfg.dim}, {"R", cfg.R}, {"sigma", cfg.sigma}, {"gamma", cfg.gamma},
                {"p", cfg.p}, {"M", cfg.M}, {"a_min", cfg.a_min}, {"delta_min", cfg.delta_min},
                {"eps", cfg.eps}, {"seed", cfg.seed}, {"count", n}}},
              {"theory", theory_to_json(consts)},
              {"separation", separation_to_json(st)},
              {"shape_attempts_max", sb.shape_attempts_max}};
  std::filesystem::path side(out);
  side.replace_extension(".report.json");
  write_text_atomic(side.string(), dump_json(report));
  std::cout << "wrote " << n << " patterns to " << out << " (event A: " << (st.event_a ? "yes" : "no")
            << ")\n";
  return 0;
}

struct RetrieveArgs {
  std::string bank, query, out;
  double beta = 0, eps = 0, eta = 0.1, lambda = 0;
  int max_iter = 200, sinkhorn_cap = 120, stride = 0;
  double stop_tol = 1e-7;
  bool weight_step = true, error_on_exit = false;
};

int cmd_retrieve(const RetrieveArgs& a) {
  PatternBank<double> bank = bank_from_json(read_json_file(a.bank));
  const Measure query = measure_from_json(read_json_file(a.query));
  RetrievalConfig<double> rc;
  rc.beta = a.beta > 0 ? a.beta : bank.beta;
  rc.eta = a.eta;
  rc.lambda = a.lambda > 0 ? a.lambda : bank.lambda;
  rc.max_iter = a.max_iter;
  rc.stop_tol = a.stop_tol;
  rc.enable_weight_step = a.weight_step;
  rc.boundary_policy = a.error_on_exit ? BoundaryPolicy::Error : BoundaryPolicy::Clip;
  SinkhornConfig<double> ot;
  ot.epsilon = a.eps > 0 ? a.eps : bank.epsilon;
  ot.max_iter = a.sinkhorn_cap;
  bank.epsilon = ot.epsilon;

  const auto trace = retrieve(query, bank, rc, ot);
  const std::filesystem::path dir(a.out);
  write_text_atomic((dir / "trace.csv").string(), trace_csv(trace));
  if (a.stride > 0)
    for (const auto& rec : trace.records)
      if (rec.iteration % a.stride == 0)
        write_text_atomic((dir / ("snapshot_" + std::to_string(rec.iteration) + ".json")).string(),
                          dump_json(measure_to_json(rec.measure)));

  Json summary{{"status", to_string(trace.status)},
               {"message", trace.message},
               {"steps", trace.steps},
               {"clipped", trace.clipped_total},
               {"solver_converged", trace.solver_converged},
               {"beta", rc.beta},
               {"eps", ot.epsilon},
               {"eta", rc.eta},
               {"lambda", rc.lambda},
               {"max_iter", rc.max_iter},
               {"sinkhorn_cap", ot.max_iter}};
  if (!trace.records.empty()) {
    SinkhornConfig<double> cls = ot;
    cls.max_iter = std::max(ot.max_iter, 1000);
    const auto c = success_metric(trace.final_measure(), bank, cls);
    summary["final_energy"] = trace.final_state().energy;
    summary["retrieved"] = c.index;
    summary["margin"] = c.margin_infinite ? Json(nullptr) : Json(c.margin);
    summary["tie"] = c.tie;
    summary["final_divergences"] = vector_to_json(c.divergences);
    write_text_atomic((dir / "final.json").string(), dump_json(measure_to_json(trace.final_measure())));
  }
  write_text_atomic((dir / "summary.json").string(), dump_json(summary));
  std::cout << "retrieval " << to_string(trace.status) << " after " << trace.steps << " steps\n";
  return trace.status == TraceStatus::Error ? 1 : 0;
}

int cmd_audit(const std::string& bank_path, const std::string& suite, std::uint64_t seed,
              double eta, const std::string& out) {
  const Json raw = read_json_file(bank_path);
  const PatternBank<double> bank = bank_from_json(raw);
  const auto theory = theory_from_json(raw);
  const bool all = suite == "all";
  std::vector<AuditReport> reports;
  Json diagnostics = Json::array();
  const double eps = bank.epsilon;
  const std::size_t n = bank.size();

  if (all || suite == "bounds") {
    SinkhornConfig<double> ot = precise_config(eps, 1e-11, 2000);
    for (std::size_t i = 0; i < n; ++i) {
      reports.push_back(audit_self_ot(bank.patterns[i], eps));
      VectorXd div(static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j)
        div[Eigen::Index(j)] = sinkhorn_divergence(bank.patterns[i], bank.patterns[j], ot).value;
      reports.push_back(audit_gibbs_weight(div, bank.beta));
      reports.push_back(audit_energy_gap(div, bank.beta));
      for (std::size_t j = i + 1; j < n; ++j) {
        reports.push_back(audit_mean_bound(bank.patterns[i], bank.patterns[j], eps));
        reports.push_back(audit_grad_bound(bank.patterns[j], bank.patterns[i], bank.lambda, bank.domain, eps));
      }
    }
    std::mt19937_64 rng = pattern_stream(seed, 0);
    std::normal_distribution<double> gauss(0.0, 3.0);
    for (int t = 0; t < 20; ++t) {
      VectorXd z(std::max<Eigen::Index>(Eigen::Index(n), 2)), zp(z.size());
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        z[k] = gauss(rng);
        zp[k] = gauss(rng);
      }
      reports.push_back(audit_softmin_lipschitz(z, zp, bank.beta));
    }
  }
  if (all || suite == "gradients") {
    std::mt19937_64 rng = pattern_stream(seed, 1);
    std::normal_distribution<double> gauss(0.0, 0.3);
    for (std::size_t i = 0; i < n; ++i) {
      MatrixXd noise(bank.patterns[i].dim(), bank.patterns[i].size());
      for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = gauss(rng);
      const Measure xi(bank.patterns[i].weights(), bank.patterns[i].supports() + noise);
      reports.push_back(audit_fd_gradients(xi, bank.patterns[i], eps));
    }
  }
  if (all || suite == "separation") {
    if (theory) {
      reports.push_back(audit_margin_separation(bank, theory->r, theory->delta, 3, seed));
    } else {
      AuditReport rep;
      rep.name = "margin_separation";
      rep.status = AuditStatus::Skipped;
      rep.note = "bank carries no theory constants (r, Delta); sample it with the sampler";
      reports.push_back(rep);
    }
  }
  if (all || suite == "fixed-point") {
    RetrievalConfig<double> rc;
    rc.beta = bank.beta;
    rc.lambda = bank.lambda;
    rc.eta = eta;
    rc.max_iter = 500;
    for (std::size_t i = 0; i < n; ++i) {
      reports.push_back(audit_fixed_point(bank, i, rc));
      reports.push_back(audit_minimizer_proximity(bank, i, rc));
      const Measure& x = bank.patterns[i];
      double bdist = std::numeric_limits<double>::infinity();
      for (Eigen::Index m = 0; m < x.size(); ++m) bdist = std::min(bdist, bank.domain.boundary_distance(x.atom(m)));
      const double cap = std::min(bdist, (min_separation<double>(x.supports()) - bank.params.delta_min) / 2);
      const double margin = x.weights().minCoeff() - bank.params.a_min;
      Json diag{{"pattern", i}, {"delta", cap / 2}, {"tau", margin / 2}};
      try {
        const auto rcst = eta_ret(x, cap / 2, margin / 2, bank.lambda, bank.domain, bank.params, eps);
        diag["eta_ret"] = rcst.eta_ret;
        diag["r_loc"] = rcst.r_loc;
        diag["eta_used"] = eta;
        diag["eta_within_eta_ret"] = eta <= rcst.eta_ret;
      } catch (const ConfigError& e) {
        diag["skipped"] = e.what();
      }
      diagnostics.push_back(diag);
    }
  }
  if (reports.empty() && diagnostics.empty()) throw ConfigError("unknown audit suite '" + suite + "'");

  int failed = 0, skipped = 0, passed = 0;
  Json list = Json::array();
  for (const auto& r : reports) {
    list.push_back(audit_to_json(r));
    if (r.status == AuditStatus::Failed) ++failed;
    else if (r.status == AuditStatus::Skipped) ++skipped;
    else ++passed;
  }
  Json doc{{"bank", std::filesystem::path(bank_path).filename().string()},
           {"suite", suite},
           {"seed", seed},
           {"summary", {{"passed", passed}, {"failed", failed}, {"skipped", skipped}}},
           {"audits", list},
           {"eta_ret", diagnostics}};
  write_text_atomic(out, dump_json(doc));
  std::cout << passed << " passed, " << failed << " failed, " << skipped << " skipped\n";
  return failed > 0 ? 1 : 0;
}

int cmd_experiment(const std::string& id, std::uint64_t seed, int repeats, const std::string& out,
                   const std::string& config_path, const std::string& order) {
  Json base = config_path.empty() ? Json::object() : read_json_file(config_path);
  if (!id.empty()) base["id"] = id;
  if (!order.empty()) base["query_order"] = order;
  Json seeds = Json::array();
  int shk_perfect = 0, euclid_perfect = 0;
  for (int r = 0; r < std::max(repeats, 1); ++r) {
    Json j = base;
    j["seed"] = seed + std::uint64_t(r);
    const ExperimentConfig cfg = config_from_json(j);
    const std::string dir =
        repeats > 1 ? (std::filesystem::path(out) / ("seed_" + std::to_string(cfg.seed))).string() : out;
    const RunResult res = run_and_write(cfg, dir);
    const int n = int(res.outcomes.size());
    shk_perfect += res.shk_successes() == n;
    euclid_perfect += res.euclid_successes() == n;
    seeds.push_back(Json{{"seed", cfg.seed},
                         {"sinkhorn_shk_successes", res.shk_successes()},
                         {"euclidean_successes", res.euclid_successes()},
                         {"patterns", n}});
    std::cout << cfg.id << " seed " << cfg.seed << ": SinkhornSHK " << res.shk_successes() << "/" << n
              << ", Euclidean " << res.euclid_successes() << "/" << n << "\n";
  }
  if (repeats > 1)
    write_text_atomic((std::filesystem::path(out) / "summary.json").string(),
                      dump_json(Json{{"seeds", seeds},
                                     {"sinkhorn_shk_all_correct", shk_perfect},
                                     {"euclidean_all_correct", euclid_perfect}}));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense associative memory over discrete measures"};
  app.require_subcommand(1);

  SampleConfig scfg;
  long long count = 0;
  std::string sample_out = "bank.json";
  auto* sample = app.add_subcommand("sample", "Sample a pattern bank with separated means");
  sample->add_option("--dim", scfg.dim)->required();
  sample->add_option("--R", scfg.R)->required();
  sample->add_option("--sigma", scfg.sigma)->required();
  sample->add_option("--gamma", scfg.gamma)->required();
  sample->add_option("--p", scfg.p)->required();
  sample->add_option("--M", scfg.M)->required();
  sample->add_option("--a-min", scfg.a_min)->required();
  sample->add_option("--delta-min", scfg.delta_min)->required();
  sample->add_option("--eps", scfg.eps)->required();
  sample->add_option("--seed", scfg.seed);
  sample->add_option("--count", count, "number of patterns (default: capacity)");
  sample->add_option("--out", sample_out);

  RetrieveArgs rargs;
  auto* ret = app.add_subcommand("retrieve", "Run transport + replicator retrieval from a query");
  ret->add_option("--bank", rargs.bank)->required();
  ret->add_option("--query", rargs.query)->required();
  ret->add_option("--beta", rargs.beta, "default: bank value");
  ret->add_option("--eps", rargs.eps, "default: bank value");
  ret->add_option("--eta", rargs.eta);
  ret->add_option("--lambda", rargs.lambda, "default: bank value");
  ret->add_option("--max-iter", rargs.max_iter);
  ret->add_option("--sinkhorn-cap", rargs.sinkhorn_cap);
  ret->add_option("--stop-tol", rargs.stop_tol);
  ret->add_option("--snapshot-stride", rargs.stride, "write measure snapshots every k iterations");
  ret->add_flag("!--no-weight-step", rargs.weight_step, "disable the replicator step");
  ret->add_flag("--boundary-error", rargs.error_on_exit, "fail instead of clipping at the boundary");
  ret->add_option("--out", rargs.out)->required();

  std::string abank, suite = "all", aout = "report.json";
  std::uint64_t aseed = 0;
  double aeta = 0.1;
  auto* aud = app.add_subcommand("audit", "Check the numeric bounds on a bank");
  aud->add_option("--bank", abank)->required();
  aud->add_option("--suite", suite)
      ->check(CLI::IsMember({"bounds", "gradients", "separation", "fixed-point", "all"}));
  aud->add_option("--seed", aseed);
  aud->add_option("--eta", aeta, "step size for the fixed-point suite");
  aud->add_option("--out", aout);

  std::string eid, eout = "out", econfig, eorder;
  std::uint64_t eseed = 0;
  int repeats = 1;
  auto* exp = app.add_subcommand("experiment", "Reproduce a synthetic Gaussian experiment");
  exp->add_option("--id", eid)->check(CLI::IsMember({"exp1", "exp2", "custom"}));
  exp->add_option("--seed", eseed);
  exp->add_option("--repeats", repeats);
  exp->add_option("--config", econfig, "JSON overrides with ExperimentConfig field names");
  exp->add_option("--query-order", eorder)->check(CLI::IsMember({"aligned", "shuffled"}));
  exp->add_option("--out", eout);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sample) return cmd_sample(scfg, count, sample_out);
    if (*ret) return cmd_retrieve(rargs);
    if (*aud) return cmd_audit(abank, suite, aseed, aeta, aout);
    if (*exp) return cmd_experiment(eid, eseed, repeats, eout, econfig, eorder);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
