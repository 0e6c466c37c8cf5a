#include "helpers.hpp"

#include <gtest/gtest.h>

using namespace otdam;
using testing_util::make;

namespace {

DomainSpec<double> square(double lo, double hi) {
  return DomainSpec<double>::box(VectorXd::Constant(2, lo), VectorXd::Constant(2, hi));
}

}  // namespace

TEST(ValidateMeasure, WellInsideIsOk) {
  const auto mu = make({0.5, 0.5}, {{0, 0}, {1, 0}});
  EXPECT_TRUE(validate_measure(mu, MeasureParams{2, 0.1, 0.5}, square(-2, 2)).ok());
}

TEST(ValidateMeasure, WeightFloorViolationNamesAtom) {
  const auto mu = make({0.05, 0.95}, {{0, 0}, {1, 0}});
  const auto res = validate_measure(mu, MeasureParams{2, 0.1, 0.5}, square(-2, 2));
  ASSERT_EQ(res.violations.size(), 1u);
  EXPECT_EQ(res.violations[0].kind, ViolationKind::WeightFloor);
  EXPECT_EQ(res.violations[0].index, 0);
  EXPECT_EQ(res.violations[0].message, "weight below a_min at atom 0");
  EXPECT_NEAR(res.violations[0].margin, 0.05, 1e-15);
}

TEST(ValidateMeasure, SeparationViolation) {
  const auto mu = make({0.5, 0.5}, {{0, 0}, {0.3, 0}});
  const auto res = validate_measure(mu, MeasureParams{2, 0.1, 0.5}, square(-2, 2));
  ASSERT_EQ(res.violations.size(), 1u);
  EXPECT_EQ(res.violations[0].kind, ViolationKind::Separation);
  EXPECT_NE(res.violations[0].message.find("pairwise separation 0.3"), std::string::npos);
  EXPECT_NEAR(res.violations[0].margin, 0.2, 1e-15);
}

TEST(ValidateMeasure, OutsideDomainAndStructuralErrors) {
  const auto mu = make({0.5, 0.5}, {{0, 0}, {3, 0}});
  const auto res = validate_measure(mu, MeasureParams{2, 0.1, 0.5}, square(-2, 2));
  ASSERT_EQ(res.violations.size(), 1u);
  EXPECT_EQ(res.violations[0].kind, ViolationKind::OutsideDomain);
  EXPECT_EQ(res.violations[0].index, 1);

  const auto dom3 = DomainSpec<double>::box(VectorXd::Constant(3, -1), VectorXd::Constant(3, 1));
  EXPECT_THROW(validate_measure(mu, MeasureParams{2, 0.1, 0.5}, dom3), StructuralError);
  EXPECT_THROW(validate_measure(mu, MeasureParams{3, 0.1, 0.5}, square(-2, 2)), StructuralError);
}

TEST(ValidateMeasure, MonotoneInThresholds) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto mu = testing_util::random_measure(rng, 3, 2, 2.0);
    std::uniform_real_distribution<double> u(0.0, 0.3), s(0.0, 2.0);
    const MeasureParams loose{3, u(rng), s(rng)};
    const MeasureParams tighter{3, loose.a_min + u(rng), loose.delta_min + s(rng)};
    const auto dom = square(-2.5, 2.5);
    EXPECT_LE(validate_measure(mu, loose, dom).violations.size(),
              validate_measure(mu, tighter, dom).violations.size());
  }
}

TEST(Measure, ConstructionRenormalizesSmallDrift) {
  VectorXd a(2);
  a << 0.5, 0.5 + 5e-10;
  const Measure mu(a, MatrixXd::Zero(2, 2));
  EXPECT_NEAR(mu.weights().sum(), 1.0, 1e-15);
  a << 0.5, 0.5 + 1e-6;
  EXPECT_THROW(Measure(a, MatrixXd::Zero(2, 2)), NumericError);
  a << 1.0, 0.0;
  EXPECT_THROW(Measure(a, MatrixXd::Zero(2, 2)), NumericError);
  EXPECT_THROW(Measure(VectorXd::Constant(3, 1.0 / 3), MatrixXd::Zero(2, 2)), StructuralError);
}

TEST(GeometryReport, MeansAndBoundary) {
  EXPECT_TRUE(geometry_report(make({0.5, 0.5}, {{0, 0}, {2, 0}}), square(-5, 5))
                  .mean.isApprox((VectorXd(2) << 1, 0).finished()));
  EXPECT_TRUE(geometry_report(make({0.25, 0.75}, {{0, 0}, {4, 0}}), square(-5, 5))
                  .mean.isApprox((VectorXd(2) << 3, 0).finished()));
  // Per-face distances: (1,5) -> 1, (9,2) -> 1.
  const auto rep = geometry_report(make({0.5, 0.5}, {{1, 5}, {9, 2}}), square(0, 10));
  EXPECT_DOUBLE_EQ(rep.boundary_dist, 1.0);
  EXPECT_NEAR(rep.min_sep, std::sqrt(64.0 + 9.0), 1e-14);
  EXPECT_DOUBLE_EQ(rep.max_weight, 0.5);
}

TEST(GeometryReport, SingleAtomSeparationIsFlagged) {
  const auto rep = geometry_report(make({1.0}, {{0, 0}}), square(-1, 1));
  EXPECT_TRUE(rep.min_sep_undefined);
  EXPECT_TRUE(std::isinf(rep.min_sep));
}

TEST(GeometryReport, MeanInsideTriangle) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const auto mu = testing_util::random_measure(rng, 3, 2, 3.0);
    const auto mean = geometry_report(mu, square(-4, 4)).mean;
    // Barycentric coordinates of the mean in the triangle of supports.
    MatrixXd A(3, 3);
    A.topRows(2) = mu.supports();
    A.row(2).setOnes();
    VectorXd rhs(3);
    rhs << mean, 1.0;
    const VectorXd lam = A.fullPivLu().solve(rhs);
    EXPECT_GE(lam.minCoeff(), -1e-9);
    EXPECT_TRUE(lam.isApprox(mu.weights(), 1e-8));
  }
}

TEST(Domain, Diameter) {
  EXPECT_DOUBLE_EQ(domain_diameter(DomainSpec<double>::ball(VectorXd::Zero(3), 3.0)), 6.0);
  EXPECT_DOUBLE_EQ(domain_diameter(square(0, 1)), std::sqrt(2.0));
  const auto box = DomainSpec<double>::box((VectorXd(2) << 0, 0).finished(), (VectorXd(2) << 3, 4).finished());
  EXPECT_DOUBLE_EQ(domain_diameter(box), 5.0);
}

TEST(Domain, DiameterIsLargestCornerDistance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3), w(0.1, 4);
  for (int d = 1; d <= 3; ++d) {
    for (int t = 0; t < 20; ++t) {
      VectorXd lo(d), hi(d);
      for (int k = 0; k < d; ++k) {
        lo[k] = u(rng);
        hi[k] = lo[k] + w(rng);
      }
      const auto box = DomainSpec<double>::box(lo, hi);
      double best = 0;
      for (int p = 0; p < (1 << d); ++p)
        for (int q = 0; q < (1 << d); ++q) {
          VectorXd cp(d), cq(d);
          for (int k = 0; k < d; ++k) {
            cp[k] = (p >> k) & 1 ? hi[k] : lo[k];
            cq[k] = (q >> k) & 1 ? hi[k] : lo[k];
          }
          best = std::max(best, (cp - cq).norm());
        }
      EXPECT_NEAR(box.diameter(), best, 1e-12);
    }
  }
}

TEST(Domain, InvalidSpecsAreRejected) {
  EXPECT_THROW(square(1, 1), ConfigError);
  EXPECT_THROW(DomainSpec<double>::ball(VectorXd::Zero(2), 0.0), ConfigError);
  EXPECT_THROW(DomainSpec<double>::box(VectorXd::Zero(2), VectorXd::Ones(3)), StructuralError);
}

TEST(Domain, BallDistanceAndProjection) {
  const auto ball = DomainSpec<double>::ball(VectorXd::Zero(2), 2.0);
  EXPECT_DOUBLE_EQ(ball.boundary_distance((VectorXd(2) << 0.5, 0).finished()), 1.5);
  EXPECT_DOUBLE_EQ(ball.boundary_distance((VectorXd(2) << 0, 3).finished()), 1.0);
  EXPECT_TRUE(ball.project((VectorXd(2) << 0, 4).finished()).isApprox((VectorXd(2) << 0, 2).finished()));
  const auto box = square(0, 10);
  EXPECT_DOUBLE_EQ(box.boundary_distance((VectorXd(2) << 13, 14).finished()), 5.0);
}

TEST(MeasureParams, Invariants) {
  EXPECT_NO_THROW((MeasureParams{3, 0.1, 0.2}.validate()));
  EXPECT_THROW((MeasureParams{1, 0.1, 0.2}.validate()), ConfigError);
  EXPECT_THROW((MeasureParams{4, 0.25, 0.2}.validate()), ConfigError);
  EXPECT_THROW((MeasureParams{4, 0.1, 0.0}.validate()), ConfigError);
}
