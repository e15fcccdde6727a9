#pragma once

#include <Eigen/Core>

namespace gmix {

/// Kahan compensated scalar accumulator. Callers add terms in a fixed
/// left-to-right order so results are reproducible across runs.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }

  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Elementwise compensated accumulator for Eigen vectors/matrices of a
/// fixed shape.
template <typename Mat>
class KahanMatrixSum {
 public:
  KahanMatrixSum(Eigen::Index rows, Eigen::Index cols)
      : sum_(Mat::Zero(rows, cols)), comp_(Mat::Zero(rows, cols)) {}

  explicit KahanMatrixSum(Eigen::Index rows) : KahanMatrixSum(rows, 1) {}

  template <typename Derived>
  void add(const Eigen::MatrixBase<Derived>& x) {
    const Mat y = x - comp_;
    const Mat t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }

  const Mat& value() const { return sum_; }

 private:
  Mat sum_;
  Mat comp_;
};

using KahanVectorSum = KahanMatrixSum<Eigen::VectorXd>;
using KahanMatrixXdSum = KahanMatrixSum<Eigen::MatrixXd>;

}  // namespace gmix
