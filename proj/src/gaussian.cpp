#include "gmix/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include <Eigen/Cholesky>

#include "gmix/errors.hpp"

namespace gmix {

std::optional<Eigen::MatrixXd> tryCholesky(const Eigen::MatrixXd& sym) {
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    return std::nullopt;
  }
  Eigen::MatrixXd lower = llt.matrixL();
  // Eigen's LLT can report success on some singular inputs; a zero or
  // negative pivot still means "not positive definite" here.
  if ((lower.diagonal().array() <= 0.0).any()) {
    return std::nullopt;
  }
  return lower;
}

GaussianEvaluator::GaussianEvaluator(Eigen::VectorXd mean,
                                     const Eigen::MatrixXd& covariance)
    : mean_(std::move(mean)) {
  auto lower = tryCholesky(covariance);
  if (!lower) {
    throw NumericError("covariance factorization failed: not positive definite");
  }
  lower_ = std::move(*lower);
  const double d = static_cast<double>(mean_.size());
  log_norm_ = -0.5 * d * std::log(2.0 * std::numbers::pi) -
              lower_.diagonal().array().log().sum();
}

double GaussianEvaluator::logDensity(const Eigen::VectorXd& x) const {
  Eigen::VectorXd z = x - mean_;
  lower_.triangularView<Eigen::Lower>().solveInPlace(z);
  return log_norm_ - 0.5 * z.squaredNorm();
}

Eigen::VectorXd GaussianEvaluator::logDensityBatch(
    const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd z = (points.rowwise() - mean_.transpose()).transpose();
  lower_.triangularView<Eigen::Lower>().solveInPlace(z);
  return (-0.5 * z.colwise().squaredNorm().array() + log_norm_).transpose();
}

double GaussianEvaluator::conditionEstimate() const {
  const double lo = lower_.diagonal().minCoeff();
  const double hi = lower_.diagonal().maxCoeff();
  const double ratio = hi / lo;
  return ratio * ratio;
}

double logGaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                   const Eigen::MatrixXd& covariance) {
  return GaussianEvaluator(mean, covariance).logDensity(x);
}

}  // namespace gmix
