#pragma once

#include <optional>

#include <Eigen/Core>

namespace gmix {

/// Attempt a lower Cholesky factorization of a symmetric matrix.
/// Returns the lower factor, or nullopt when the matrix is not positive
/// definite.
std::optional<Eigen::MatrixXd> tryCholesky(const Eigen::MatrixXd& sym);

/// Cached factorized view of one Gaussian density. The covariance is
/// factorized once at construction; every evaluation reuses the triangular
/// factor.
class GaussianEvaluator {
 public:
  /// Throws NumericError when the covariance is not positive definite.
  GaussianEvaluator(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance);

  double logDensity(const Eigen::VectorXd& x) const;

  /// Log density for every row of `points` (n x d).
  Eigen::VectorXd logDensityBatch(const Eigen::MatrixXd& points) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  /// Lower-triangular factor L with L L^T = covariance.
  const Eigen::MatrixXd& choleskyFactor() const { return lower_; }
  double logNormalization() const { return log_norm_; }

  /// (max diag L / min diag L)^2, a cheap estimate of the covariance
  /// condition number.
  double conditionEstimate() const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd lower_;
  double log_norm_ = 0.0;  // -(d/2) log(2 pi) - sum log diag(L)
};

/// log N(x | mean, cov). Factorizes on every call; prefer GaussianEvaluator
/// in loops.
double logGaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                   const Eigen::MatrixXd& covariance);

}  // namespace gmix
