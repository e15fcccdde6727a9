#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gmix/algebra.hpp"
#include "gmix/block_index.hpp"
#include "gmix/fitting.hpp"
#include "gmix/gmm.hpp"
#include "gmix/sampling.hpp"

namespace gmix {

/// Scalar measurement curve y = f(x) + w over a finite range, with additive
/// zero-mean Gaussian noise of variance noiseVariance.
struct CurveSpec {
  std::function<double(double)> f;
  double lo = 0.0;
  double hi = 1.0;
  double noiseVariance = 0.0;
};

/// Acceptable region for quality control: a closed hyperrectangle or a
/// general membership predicate.
class QualityRegion {
 public:
  static QualityRegion hyperrectangle(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static QualityRegion predicate(int dim,
                                 std::function<bool(const Eigen::VectorXd&)> f);

  bool contains(const Eigen::VectorXd& x) const;
  bool isRectangle() const { return static_cast<bool>(lo_); }
  int dim() const { return dim_; }
  const Eigen::VectorXd& lo() const { return *lo_; }
  const Eigen::VectorXd& hi() const { return *hi_; }

 private:
  QualityRegion() = default;
  int dim_ = 0;
  std::optional<Eigen::VectorXd> lo_;
  std::optional<Eigen::VectorXd> hi_;
  std::function<bool(const Eigen::VectorXd&)> member_;
};

/// Joint mixture over stacked (measurand, observable) with the block split
/// and the diagnostics of the fit that produced it.
struct MeasurementModel {
  Gmm joint;
  BlockIndex blocks;  // X = measurand dims, Y = observable dims
  FitReport fit;
};

/// Simulates a measurement device: x uniform on the curve range, y = f(x)
/// plus Gaussian noise. Returns n (x, y) rows.
Dataset simulateDevice(const CurveSpec& curve, std::size_t n,
                       SeededStream& stream);

/// Fits the joint (x, y) mixture with a fixed component count.
MeasurementModel fitDevice(const Dataset& pairs, int k, const EmConfig& base);

/// Fits the joint mixture choosing the component count by BIC over the
/// candidates.
MeasurementModel fitDevice(const Dataset& pairs,
                           const std::vector<int>& k_candidates,
                           const EmConfig& base);

struct ConditionalStat {
  double x = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  /// Set when the grid point lies far outside the fitted support (the
  /// conditioning reweights underflow); mean/variance are then NaN.
  bool flagged = false;
};

/// E(Y | X = x) and V(Y | X = x) of the fitted joint, per grid point,
/// via exact mixture conditioning followed by moment matching.
std::vector<ConditionalStat> conditionalStats(const MeasurementModel& model,
                                              const std::vector<double>& x_grid);

/// Measurement result: the measurand posterior p(x | y*) as a mixture,
/// obtained by conditioning the joint on the observed y*.
Gmm posteriorFromObservation(const MeasurementModel& model,
                             const Eigen::VectorXd& y_star);

/// Product of two independent scalar mixtures, propagated by forward Monte
/// Carlo and an EM fit with k components (k <= 0 selects the K_X * K_Y
/// heuristic).
FitReport propagateProduct(const Gmm& gx, const Gmm& gy, std::size_t n_mc,
                           int k, const EmConfig& base, SeededStream& stream);

struct QcEstimate {
  double estimate = 0.0;
  double standardError = 0.0;
  /// Closed-form product of per-dimension normal CDF differences, filled
  /// for a single-component mixture with diagonal covariance on a
  /// hyperrectangle region (where the product form is exact).
  std::optional<double> crossCheck;
};

/// Monte Carlo estimate of P(X in Q) with its binomial standard error.
QcEstimate qcProbability(const Gmm& g, const QualityRegion& q,
                         std::size_t n_mc, SeededStream& stream);

}  // namespace gmix
