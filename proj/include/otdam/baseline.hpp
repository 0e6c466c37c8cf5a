#pragma once

// Euclidean comparison: flatten a measure to [x_11..x_Md, log a_1..log a_M] and run the
// softmax Hopfield update on the flattened vectors.

#include "otdam/measure.hpp"

#include <cmath>
#include <vector>

namespace otdam {

template <typename Scalar>
Vector<Scalar> vectorize(const DiscreteMeasure<Scalar>& mu) {
  const Eigen::Index d = mu.dim(), m = mu.size();
  Vector<Scalar> v((d + 1) * m);
  // Column-major supports already give atom-major order x_11..x_1d, x_21, ...
  v.head(d * m) = Eigen::Map<const Vector<Scalar>>(mu.supports().data(), d * m);
  v.tail(m) = mu.weights().array().log();
  return v;
}

template <typename Scalar>
DiscreteMeasure<Scalar> devectorize(const Vector<Scalar>& v, Eigen::Index d, Eigen::Index m) {
  if (d < 1 || m < 1 || v.size() != (d + 1) * m)
    throw StructuralError("vector length does not equal (d + 1) * M");
  if (!v.allFinite()) throw NumericError("vectorized measure has non-finite entries");
  Points<Scalar> x = Eigen::Map<const Matrix<Scalar>>(v.data(), d, m);
  const Vector<Scalar> logs = v.tail(m);
  Vector<Scalar> a = (logs.array() - logs.maxCoeff()).exp();
  a /= a.sum();
  return DiscreteMeasure<Scalar>(std::move(a), std::move(x));
}

/// Stored vectors as the columns of one matrix.
template <typename Scalar>
Matrix<Scalar> stack_vectors(const std::vector<DiscreteMeasure<Scalar>>& patterns) {
  if (patterns.empty()) throw StructuralError("no stored patterns");
  const Eigen::Index len = (patterns.front().dim() + 1) * patterns.front().size();
  Matrix<Scalar> out(len, static_cast<Eigen::Index>(patterns.size()));
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    const Vector<Scalar> v = vectorize(patterns[i]);
    if (v.size() != len) throw StructuralError("stored patterns differ in shape");
    out.col(static_cast<Eigen::Index>(i)) = v;
  }
  return out;
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
  const Vector<Scalar> e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

/// xi <- X softmax(beta X^T xi).
template <typename Scalar>
Vector<Scalar> hopfield_step(const Vector<Scalar>& xi, const Matrix<Scalar>& stored, Scalar beta) {
  if (stored.rows() != xi.size()) throw StructuralError("query and stored vectors differ in length");
  return stored * softmax<Scalar>(beta * (stored.transpose() * xi));
}

/// -(1/beta) log sum_i exp(beta <x_i, xi>).
template <typename Scalar>
Scalar lse_objective(const Vector<Scalar>& xi, const Matrix<Scalar>& stored, Scalar beta) {
  const Vector<Scalar> logits = beta * (stored.transpose() * xi);
  const Scalar peak = logits.maxCoeff();
  return -(peak + std::log((logits.array() - peak).exp().sum())) / beta;
}

template <typename Scalar>
struct EuclideanTrace {
  std::vector<Vector<Scalar>> states;  // states[0] is the vectorized query
  std::vector<Scalar> objective;       // lse_objective per state
  std::vector<Scalar> step_change;     // |xi_{k+1} - xi_k|_inf, one per step
  bool converged = false;
  int steps = 0;
  DiscreteMeasure<Scalar> final_measure;
};

template <typename Scalar>
EuclideanTrace<Scalar> retrieve_euclidean(const DiscreteMeasure<Scalar>& query,
                                          const std::vector<DiscreteMeasure<Scalar>>& patterns,
                                          Scalar beta, int max_iter = 200,
                                          Scalar stop_tol = Scalar(1e-9)) {
  const Matrix<Scalar> stored = stack_vectors(patterns);
  Vector<Scalar> xi = vectorize(query);
  if (xi.size() != stored.rows()) throw StructuralError("query and stored patterns differ in shape");
  std::vector<Vector<Scalar>> states{xi};
  std::vector<Scalar> objective{lse_objective(xi, stored, beta)};
  std::vector<Scalar> changes;
  bool converged = false;
  int steps = 0;
  for (int k = 0; k < max_iter; ++k) {
    Vector<Scalar> next = hopfield_step(xi, stored, beta);
    const Scalar change = (next - xi).cwiseAbs().maxCoeff();
    xi = std::move(next);
    ++steps;
    states.push_back(xi);
    objective.push_back(lse_objective(xi, stored, beta));
    changes.push_back(change);
    if (change < stop_tol) {
      converged = true;
      break;
    }
  }
  return {std::move(states), std::move(objective), std::move(changes), converged, steps,
          devectorize(xi, query.dim(), query.size())};
}

}  // namespace otdam
