#pragma once

#include "otdam/types.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace otdam {

enum class DomainKind { Box, Ball };

/// Open, bounded, convex region: an axis-aligned box or a Euclidean ball.
template <typename Scalar>
class DomainSpec {
 public:
  static DomainSpec box(Vector<Scalar> lower, Vector<Scalar> upper) {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw StructuralError("box bounds must be non-empty and of equal length");
    if (!lower.allFinite() || !upper.allFinite())
      throw NumericError("box bounds must be finite");
    if ((lower.array() >= upper.array()).any())
      throw ConfigError("box requires lower < upper on every axis");
    DomainSpec dom;
    dom.kind_ = DomainKind::Box;
    dom.lower_ = std::move(lower);
    dom.upper_ = std::move(upper);
    return dom;
  }

  static DomainSpec ball(Vector<Scalar> center, Scalar radius) {
    if (center.size() == 0) throw StructuralError("ball center must be non-empty");
    if (!center.allFinite() || !std::isfinite(radius))
      throw NumericError("ball parameters must be finite");
    if (!(radius > 0)) throw ConfigError("ball radius must be positive");
    DomainSpec dom;
    dom.kind_ = DomainKind::Ball;
    dom.center_ = std::move(center);
    dom.radius_ = radius;
    return dom;
  }

  DomainKind kind() const { return kind_; }
  Eigen::Index dim() const {
    return kind_ == DomainKind::Box ? lower_.size() : center_.size();
  }
  const Vector<Scalar>& lower() const { return lower_; }
  const Vector<Scalar>& upper() const { return upper_; }
  const Vector<Scalar>& center() const { return center_; }
  Scalar radius() const { return radius_; }

  /// Box: length of the main diagonal. Ball: 2R.
  Scalar diameter() const {
    if (kind_ == DomainKind::Box) return (upper_ - lower_).norm();
    return Scalar(2) * radius_;
  }

  /// Membership in the open set.
  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x) const {
    if (kind_ == DomainKind::Box)
      return (x.array() > lower_.array()).all() && (x.array() < upper_.array()).all();
    return (x - center_).norm() < radius_;
  }

  /// Euclidean distance from x to the boundary of the domain.
  template <typename Derived>
  Scalar boundary_distance(const Eigen::MatrixBase<Derived>& x) const {
    if (kind_ == DomainKind::Ball) return std::abs(radius_ - (x - center_).norm());
    if (contains(x) || on_closure(x)) {
      Scalar below = (x - lower_).minCoeff();
      Scalar above = (upper_ - x).minCoeff();
      return std::max(Scalar(0), std::min(below, above));
    }
    Vector<Scalar> excess = (lower_ - x).cwiseMax(x - upper_).cwiseMax(Scalar(0));
    return excess.norm();
  }

  /// Nearest point of the closed domain.
  template <typename Derived>
  Vector<Scalar> project(const Eigen::MatrixBase<Derived>& x) const {
    if (kind_ == DomainKind::Box) return x.cwiseMax(lower_).cwiseMin(upper_);
    Vector<Scalar> offset = x - center_;
    const Scalar r = offset.norm();
    if (r <= radius_) return x;
    return center_ + offset * (radius_ / r);
  }

 private:
  template <typename Derived>
  bool on_closure(const Eigen::MatrixBase<Derived>& x) const {
    return (x.array() >= lower_.array()).all() && (x.array() <= upper_.array()).all();
  }

  DomainKind kind_ = DomainKind::Box;
  Vector<Scalar> lower_, upper_, center_;
  Scalar radius_ = 0;
};

template <typename Scalar>
Scalar domain_diameter(const DomainSpec<Scalar>& dom) {
  return dom.diameter();
}

/// Atom count, weight floor and minimum atom spacing shared by queries and patterns.
struct MeasureParams {
  Eigen::Index atoms = 2;
  double a_min = 0.0;
  double delta_min = 0.0;

  void validate() const {
    if (atoms < 2) throw ConfigError("MeasureParams: M must be at least 2");
    if (!(a_min > 0)) throw ConfigError("MeasureParams: a_min must be positive");
    if (!(double(atoms) * a_min < 1.0)) throw ConfigError("MeasureParams: M * a_min must be < 1");
    if (!(delta_min > 0)) throw ConfigError("MeasureParams: delta_min must be positive");
  }
};

/// A probability measure with finitely many weighted atoms in R^d.
template <typename Scalar>
class DiscreteMeasure {
 public:
  /// Weights within 1e-9 of unit mass are renormalized; anything further off throws.
  DiscreteMeasure(Vector<Scalar> weights, Points<Scalar> supports)
      : weights_(std::move(weights)), supports_(std::move(supports)) {
    if (weights_.size() == 0) throw StructuralError("measure needs at least one atom");
    if (weights_.size() != supports_.cols())
      throw StructuralError("weight count does not match support count");
    if (supports_.rows() == 0) throw StructuralError("supports must have dimension >= 1");
    if (!weights_.allFinite() || !supports_.allFinite())
      throw NumericError("measure entries must be finite");
    if ((weights_.array() <= Scalar(0)).any())
      throw NumericError("measure weights must be strictly positive");
    const Scalar total = weights_.sum();
    if (std::abs(total - Scalar(1)) > Scalar(1e-9)) {
      std::ostringstream msg;
      msg << "measure weights sum to " << total << ", not 1";
      throw NumericError(msg.str());
    }
    weights_ /= total;
  }

  static DiscreteMeasure uniform(Points<Scalar> supports) {
    const auto m = supports.cols();
    return DiscreteMeasure(Vector<Scalar>::Constant(m, Scalar(1) / Scalar(m)),
                           std::move(supports));
  }

  const Vector<Scalar>& weights() const { return weights_; }
  const Points<Scalar>& supports() const { return supports_; }
  Eigen::Index size() const { return weights_.size(); }
  Eigen::Index dim() const { return supports_.rows(); }
  auto atom(Eigen::Index m) const { return supports_.col(m); }

  Vector<Scalar> mean() const { return supports_ * weights_; }

  template <typename NewScalar>
  DiscreteMeasure<NewScalar> cast() const {
    return DiscreteMeasure<NewScalar>(weights_.template cast<NewScalar>(),
                                      supports_.template cast<NewScalar>());
  }

 private:
  Vector<Scalar> weights_;
  Points<Scalar> supports_;
};

using Measure = DiscreteMeasure<double>;

/// Minimum pairwise Euclidean distance between columns; +inf for fewer than two.
template <typename Scalar>
Scalar min_separation(const Points<Scalar>& x) {
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index m = 0; m < x.cols(); ++m)
    for (Eigen::Index n = m + 1; n < x.cols(); ++n)
      best = std::min(best, (x.col(m) - x.col(n)).norm());
  return best;
}

template <typename Scalar>
struct GeometryReport {
  Vector<Scalar> mean;
  Scalar min_sep = 0;
  bool min_sep_undefined = false;  // M < 2
  Scalar boundary_dist = 0;
  Scalar max_weight = 0;
  Scalar min_weight = 0;
};

template <typename Scalar>
GeometryReport<Scalar> geometry_report(const DiscreteMeasure<Scalar>& mu,
                                       const DomainSpec<Scalar>& dom) {
  if (mu.dim() != dom.dim()) throw StructuralError("measure and domain dimensions differ");
  GeometryReport<Scalar> rep;
  rep.mean = mu.mean();
  rep.min_sep = min_separation(mu.supports());
  rep.min_sep_undefined = mu.size() < 2;
  rep.boundary_dist = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index m = 0; m < mu.size(); ++m)
    rep.boundary_dist = std::min(rep.boundary_dist, dom.boundary_distance(mu.atom(m)));
  rep.max_weight = mu.weights().maxCoeff();
  rep.min_weight = mu.weights().minCoeff();
  return rep;
}

enum class ViolationKind { WeightSum, WeightFloor, Separation, OutsideDomain };

struct Violation {
  ViolationKind kind;
  Eigen::Index index = 0;   // atom index (first atom of the pair for Separation)
  Eigen::Index other = -1;  // second atom for Separation
  double margin = 0;        // signed amount by which the constraint is missed
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Membership test for the constrained measure set: interior simplex weights above
/// a_min, atoms pairwise farther apart than delta_min, all atoms inside the domain.
template <typename Scalar>
ValidationResult validate_measure(const DiscreteMeasure<Scalar>& mu, const MeasureParams& params,
                                  const DomainSpec<Scalar>& dom) {
  if (mu.dim() != dom.dim()) throw StructuralError("measure and domain dimensions differ");
  if (mu.size() != params.atoms) {
    std::ostringstream msg;
    msg << "measure has " << mu.size() << " atoms, expected M = " << params.atoms;
    throw StructuralError(msg.str());
  }
  ValidationResult out;
  const auto& a = mu.weights();
  const double total = double(a.sum());
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "weights sum to " << total;
    out.violations.push_back({ViolationKind::WeightSum, 0, -1, total - 1.0, msg.str()});
  }
  for (Eigen::Index m = 0; m < a.size(); ++m) {
    if (!(double(a[m]) > params.a_min)) {
      std::ostringstream msg;
      msg << "weight below a_min at atom " << m;
      out.violations.push_back(
          {ViolationKind::WeightFloor, m, -1, params.a_min - double(a[m]), msg.str()});
    }
  }
  const auto& x = mu.supports();
  for (Eigen::Index m = 0; m < x.cols(); ++m) {
    for (Eigen::Index n = m + 1; n < x.cols(); ++n) {
      const double gap = double((x.col(m) - x.col(n)).norm());
      if (!(gap > params.delta_min)) {
        std::ostringstream msg;
        msg << "pairwise separation " << gap << " <= delta_min between atoms " << m << " and "
            << n;
        out.violations.push_back(
            {ViolationKind::Separation, m, n, params.delta_min - gap, msg.str()});
      }
    }
  }
  for (Eigen::Index m = 0; m < x.cols(); ++m) {
    if (!dom.contains(x.col(m))) {
      std::ostringstream msg;
      msg << "atom " << m << " outside the domain";
      out.violations.push_back({ViolationKind::OutsideDomain, m, -1,
                                double(dom.boundary_distance(x.col(m))), msg.str()});
    }
  }
  return out;
}

}  // namespace otdam
