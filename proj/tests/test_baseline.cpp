#include "helpers.hpp"
#include "otdam/baseline.hpp"

#include <gtest/gtest.h>

using namespace otdam;
using testing_util::make;

TEST(Vectorize, Layout) {
  const auto mu = make({0.25, 0.75}, {{1, 2}, {3, 4}});
  const VectorXd v = vectorize(mu);
  VectorXd expect(6);
  expect << 1, 2, 3, 4, std::log(0.25), std::log(0.75);
  EXPECT_EQ(v, expect);
}

TEST(Vectorize, RoundTripAndUniformBlock) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto mu = testing_util::random_measure(rng, 5, 3, 2.0);
    const auto back = devectorize<double>(vectorize(mu), 3, 5);
    EXPECT_EQ(back.supports(), mu.supports());
    EXPECT_LE((back.weights() - mu.weights()).cwiseAbs().maxCoeff(), 1e-15);
  }
  const auto uni = Measure::uniform(MatrixXd::Random(2, 4));
  EXPECT_TRUE(vectorize(uni).tail(4).isApprox(VectorXd::Constant(4, -std::log(4.0))));
  EXPECT_THROW(devectorize<double>(VectorXd::Zero(5), 2, 2), StructuralError);
  VectorXd bad = VectorXd::Zero(6);
  bad[0] = NAN;
  EXPECT_THROW(devectorize<double>(bad, 2, 2), NumericError);
}

TEST(Hopfield, Examples) {
  MatrixXd one(3, 1);
  one << 1, -2, 0.5;
  EXPECT_TRUE(hopfield_step<double>(VectorXd::Random(3), one, 10.0).isApprox(one.col(0)));

  // Equal inner products with both stored vectors: midpoint.
  MatrixXd two(2, 2);
  two << 1, -1, 0, 0;
  const VectorXd xi = (VectorXd(2) << 0, 1).finished();
  EXPECT_TRUE(hopfield_step<double>(xi, two, 5.0).isZero(1e-15));

  // Three patterns, large beta, xi closest to the first in inner product.
  MatrixXd three(2, 3);
  three << 1, 0, -1, 0, 1, 0;
  const VectorXd q = (VectorXd(2) << 0.9, 0.2).finished();
  const double beta = 40;
  const VectorXd logits = beta * (three.transpose() * q);
  VectorXd w = (logits.array() - logits.maxCoeff()).exp();
  w /= w.sum();
  EXPECT_LT(1 - w[0], 1e-9);
  EXPECT_LE((hopfield_step<double>(q, three, beta) - three.col(0)).norm(), 1e-6);
}

TEST(Hopfield, ConvexHullPermutationAndFixedPoint) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    MatrixXd X(4, 5);
    for (Eigen::Index k = 0; k < X.size(); ++k) X.data()[k] = g(rng);
    VectorXd xi(4);
    for (int k = 0; k < 4; ++k) xi[k] = g(rng);
    const VectorXd out = hopfield_step<double>(xi, X, 2.0);
    // Coefficients recovered independently are a probability vector.
    VectorXd c(5);
    double total = 0;
    for (int i = 0; i < 5; ++i) total += c[i] = std::exp(2.0 * X.col(i).dot(xi));
    c /= total;
    EXPECT_NEAR(c.sum(), 1.0, 1e-12);
    EXPECT_LE((X * c - out).cwiseAbs().maxCoeff(), 1e-12);
    // Relabeling the stored patterns does not change the output.
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 3, 0, 4, 1, 2;
    const MatrixXd Xp = X * perm;
    EXPECT_LE((hopfield_step<double>(xi, Xp, 2.0) - out).cwiseAbs().maxCoeff(), 1e-12);
  }
  MatrixXd X(3, 2);
  X << 4, -4, 0, 1, 1, 0;
  VectorXd xi = X.col(0);
  for (int k = 0; k < 50; ++k) xi = hopfield_step<double>(xi, X, 3.0);
  EXPECT_LE((hopfield_step<double>(xi, X, 3.0) - xi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RetrieveEuclidean, StoredPatternIsFixed) {
  std::vector<Measure> pats;
  pats.push_back(make({0.5, 0.5}, {{-3, -3}, {-2, -3}}));
  pats.push_back(make({0.5, 0.5}, {{3, 3}, {2, 3}}));
  pats.push_back(make({0.5, 0.5}, {{3, -3}, {2, -3}}));
  const auto tr = retrieve_euclidean(pats[1], pats, 50.0);
  EXPECT_TRUE(tr.converged);
  EXPECT_LE(tr.steps, 3);
  EXPECT_LE((tr.final_measure.supports() - pats[1].supports()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(tr.objective.size(), tr.states.size());
  EXPECT_NEAR(tr.objective[0], lse_objective<double>(vectorize(pats[1]), stack_vectors(pats), 50.0), 0);
}
