#include "helpers.hpp"
#include "otdam/audit.hpp"

#include <gtest/gtest.h>

using namespace otdam;
using testing_util::make;

namespace {

DomainSpec<double> square(double lo, double hi) {
  return DomainSpec<double>::box(VectorXd::Constant(2, lo), VectorXd::Constant(2, hi));
}

PatternBank<double> three_bank() {
  PatternBank<double> bank;
  bank.params = MeasureParams{2, 0.1, 0.2};
  bank.domain = square(-5, 5);
  bank.patterns.push_back(make({0.5, 0.5}, {{-3, -3}, {-2, -3}}));
  bank.patterns.push_back(make({0.4, 0.6}, {{3, 3}, {2, 3}}));
  bank.patterns.push_back(make({0.5, 0.5}, {{3, -3}, {3, -2}}));
  bank.beta = 50;
  bank.epsilon = 0.05;
  bank.lambda = 1;
  return bank;
}

}  // namespace

TEST(Audit, SelfOtBoundedByEntropy) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto mu = testing_util::random_measure(rng, 3, 2, 2.0);
    const auto rep = audit_self_ot(mu, 0.1);
    EXPECT_TRUE(rep.pass) << rep.note;
    EXPECT_GE(rep.slack, -rep.tolerance);
    EXPECT_EQ(rep.digest.size(), 16u);
  }
  // The pair example: self OT 0.0346... below eps log 2.
  const auto rep = audit_self_ot(make({0.5, 0.5}, {{0, 0}, {1, 0}}), 0.05);
  EXPECT_NEAR(rep.measured, testing_util::kPairSelf, 1e-10);
  EXPECT_NEAR(rep.bound, 0.05 * std::log(2.0), 1e-15);
}

TEST(Audit, MeanBoundIsLowerBound) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 30; ++t) {
    const auto mu = testing_util::random_measure(rng, 3, 2, 2.0);
    const auto nu = testing_util::random_measure(rng, 2, 2, 2.0);
    const auto rep = audit_mean_bound(mu, nu, 0.05);
    EXPECT_TRUE(rep.lower_bound);
    EXPECT_TRUE(rep.pass) << rep.measured << " vs " << rep.bound;
  }
}

TEST(Audit, SoftminLipschitz) {
  VectorXd z(3), zp(3);
  z << 0, 1, 2;
  zp << 0.5, 1, 2;
  const auto rep = audit_softmin_lipschitz(z, zp, 10);
  EXPECT_TRUE(rep.pass);
  EXPECT_DOUBLE_EQ(rep.bound, 0.5);
  EXPECT_THROW(audit_softmin_lipschitz(z, VectorXd::Zero(2), 1), StructuralError);
}

TEST(Audit, GibbsWeightAndEnergyGap) {
  VectorXd s(3);
  s << 0.1, 0.5, 0.9;
  const auto w = audit_gibbs_weight(s, 20);
  EXPECT_TRUE(w.pass);
  EXPECT_NEAR(w.bound, 1.0 / (1.0 + 2 * std::exp(-20 * 0.4)), 1e-15);
  const auto e = audit_energy_gap(s, 20);
  EXPECT_TRUE(e.pass);
  EXPECT_GE(e.measured, 0);
  // Ties: gap zero, both bounds degenerate but still hold.
  const VectorXd ties = VectorXd::Constant(4, 0.3);
  EXPECT_TRUE(audit_gibbs_weight(ties, 5).pass);
  const auto et = audit_energy_gap(ties, 5);
  EXPECT_TRUE(et.pass);
  EXPECT_NEAR(et.measured, std::log(4.0) / 5, 1e-14);
}

TEST(Audit, GradBound) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto xi = testing_util::random_measure(rng, 3, 2, 2.0);
    const auto pat = testing_util::random_measure(rng, 3, 2, 2.0);
    EXPECT_TRUE(audit_grad_bound(xi, pat, 1.0, square(-2, 2), 0.1).pass);
  }
}

TEST(Audit, MarginSeparationOnWellSeparatedBank) {
  const auto bank = three_bank();
  std::vector<MarginViolation> v;
  const auto rep = audit_margin_separation(bank, 0.5, 1.0, 4, 3, &v);
  EXPECT_TRUE(rep.pass) << rep.note;
  EXPECT_TRUE(v.empty());
  // An impossible margin is reported with the offending pairs.
  const auto bad = audit_margin_separation(bank, 0.5, 1e6, 2, 3, &v);
  EXPECT_FALSE(bad.pass);
  EXPECT_FALSE(v.empty());

  PatternBank<double> lone = bank;
  lone.patterns.erase(lone.patterns.begin() + 1, lone.patterns.end());
  EXPECT_EQ(audit_margin_separation(lone, 0.5, 1.0, 2, 0).status, AuditStatus::Skipped);
}

TEST(Audit, FixedPointAndMinimizerProximity) {
  const auto bank = three_bank();
  RetrievalConfig<double> cfg;
  cfg.beta = bank.beta;
  cfg.eta = 0.05;
  cfg.lambda = bank.lambda;
  cfg.max_iter = 60;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto fp = audit_fixed_point(bank, i, cfg);
    EXPECT_TRUE(fp.pass) << fp.measured << " > " << fp.bound;
    const auto mp = audit_minimizer_proximity(bank, i, cfg);
    EXPECT_TRUE(mp.pass) << mp.note;
  }
  EXPECT_EQ(audit_fixed_point(bank, 7, cfg).status, AuditStatus::Skipped);
}

TEST(Audit, FiniteDifferenceGradients) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 5; ++t) {
    const auto xi = testing_util::random_measure(rng, 3, 2, 1.5);
    const auto pat = testing_util::random_measure(rng, 2, 2, 1.5);
    GradientCheck chk;
    const auto rep = audit_fd_gradients(xi, pat, 0.1, 1e-5, &chk);
    EXPECT_TRUE(rep.pass) << rep.note;
    EXPECT_EQ(chk.directions.size(), 2u);
  }
  const auto xi = make({0.5, 0.5}, {{0, 0}, {1, 0}});
  EXPECT_EQ(audit_fd_gradients(xi, xi, 1e-4).status, AuditStatus::Skipped);
}

TEST(EtaRet, ConstantsAndInfeasibleInputs) {
  const auto pat = make({0.5, 0.5}, {{0, 0}, {2, 0}});
  const auto dom = square(-3, 3);
  const MeasureParams params{2, 0.1, 0.2};
  const auto c = eta_ret(pat, 0.3, 0.1, 1.0, dom, params, 0.05);
  EXPECT_DOUBLE_EQ(c.weight_margin, 0.4);
  EXPECT_DOUBLE_EQ(c.boundary, 1.0);
  EXPECT_DOUBLE_EQ(c.separation, 2.0);
  const double D = dom.diameter();
  const double reweight = 1.0 / (2 * D * D) * std::log(0.4 / 0.1);
  const double move = std::min(1.0 - 0.3, 2.0 - 0.6 - 0.2) / (2 * D);
  EXPECT_NEAR(c.eta_ret, std::min(reweight, move), 1e-15);
  EXPECT_NEAR(c.r_loc, std::min(0.1 * 0.09 / 2, 0.1 * 1.7 * 1.7 / 4) - 0.05 * std::log(2.0), 1e-15);

  try {
    eta_ret(pat, 1.0, 0.1, 1.0, dom, params, 0.05);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("delta <"), std::string::npos);
  }
  try {
    eta_ret(pat, 0.3, 0.4, 1.0, dom, params, 0.05);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tau <"), std::string::npos);
  }
}
