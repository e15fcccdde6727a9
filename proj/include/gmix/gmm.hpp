#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "gmix/component.hpp"
#include "gmix/gaussian.hpp"

namespace gmix {

/// First two moments of a mixture.
struct MomentSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Immutable Gaussian mixture over R^d.
///
/// Construction enforces the model invariants: at least one component, a
/// common dimension, symmetric positive definite covariances and weights
/// summing to one. Covariances are symmetrized, zero-weight components are
/// dropped, and weights are renormalized when their sum is within
/// kWeightSumTolerance of one (larger deviations are rejected).
///
/// Values are immutable after construction and safe to share across threads.
class Gmm {
 public:
  static constexpr double kWeightSumTolerance = 1e-9;
  /// Relative Frobenius tolerance for covariance symmetry.
  static constexpr double kSymmetryTolerance = 1e-10;
  /// Diagonal jitter allowance, relative to the largest diagonal entry,
  /// granted before declaring a covariance not positive definite.
  static constexpr double kJitterBudget = 1e-12;

  /// Throws ValidationError listing every violated invariant.
  explicit Gmm(std::vector<GaussianComponent> components);

  Eigen::Index dim() const { return components_.front().dim(); }
  int componentCount() const { return static_cast<int>(components_.size()); }
  const std::vector<GaussianComponent>& components() const {
    return components_;
  }
  const GaussianComponent& component(int i) const { return components_[i]; }
  const GaussianEvaluator& evaluator(int i) const { return evaluators_[i]; }

  /// Mixture density at x. Throws ValidationError on dimension mismatch.
  double pdf(const Eigen::VectorXd& x) const;
  /// Log mixture density, computed with log-sum-exp; -inf when the density
  /// underflows to zero.
  double logPdf(const Eigen::VectorXd& x) const;
  /// pdf for every row of `points` (n x d).
  Eigen::VectorXd pdfBatch(const Eigen::MatrixXd& points) const;
  /// logPdf for every row of `points` (n x d).
  Eigen::VectorXd logPdfBatch(const Eigen::MatrixXd& points) const;

  /// Exact mixture mean and covariance (components accumulated left to
  /// right with compensated summation).
  MomentSummary moments() const;

 private:
  std::vector<GaussianComponent> components_;
  std::vector<GaussianEvaluator> evaluators_;
};

/// Diagnoses every invariant violation in a candidate component list.
/// An empty result means the list can construct a Gmm. Never throws.
std::vector<std::string> validate(
    const std::vector<GaussianComponent>& components);

/// Single-Gaussian approximation sharing the mixture's first two moments.
Gmm gaussianFallback(const Gmm& g);

/// Maps each component through x -> A x + b. A must have full row rank
/// k <= d, otherwise a ValidationError is thrown (the output covariances
/// would be degenerate).
Gmm affineTransform(const Gmm& g, const Eigen::MatrixXd& a,
                    const Eigen::VectorXd& b);

/// Number of free scalars needed to store a mixture:
/// K - 1 + K d + K d (d + 1) / 2.
long paramCount(int component_count, int dim);

}  // namespace gmix
