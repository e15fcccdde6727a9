#pragma once

#include <vector>

#include <Eigen/Core>

namespace gmix {

/// Partition of the dimensions {0..d-1} into an X block (kept / inferred)
/// and a Y block (dropped / observed). Both blocks are ordered and the
/// output of marginalization/conditioning follows the block's order.
class BlockIndex {
 public:
  /// Throws ValidationError unless the two blocks are nonempty, disjoint
  /// and together cover {0..d-1}.
  BlockIndex(std::vector<int> x_dims, std::vector<int> y_dims);

  const std::vector<int>& xDims() const { return x_dims_; }
  const std::vector<int>& yDims() const { return y_dims_; }
  int dim() const { return static_cast<int>(x_dims_.size() + y_dims_.size()); }

  Eigen::VectorXd selectX(const Eigen::VectorXd& v) const;
  Eigen::VectorXd selectY(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd blockXX(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd blockXY(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd blockYX(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd blockYY(const Eigen::MatrixXd& m) const;

 private:
  std::vector<int> x_dims_;
  std::vector<int> y_dims_;
};

}  // namespace gmix
