#pragma once

#include <Eigen/Core>

namespace gmix {

/// One weighted multivariate normal, the atomic building block of a mixture.
struct GaussianComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  Eigen::Index dim() const { return mean.size(); }
};

}  // namespace gmix
