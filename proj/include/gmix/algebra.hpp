#pragma once

#include <vector>

#include <Eigen/Core>

#include "gmix/block_index.hpp"
#include "gmix/gmm.hpp"

namespace gmix {

/// Bayesian fusion output: the normalized posterior and the normalization
/// constant (the integral of the pointwise product of the two densities).
struct FusionResult {
  Gmm posterior;
  double evidence = 0.0;
};

/// Normalized mixing weights for pooling several sources.
class SourceWeights {
 public:
  /// Normalizes raw nonnegative shares (e.g. supplier percentages) to sum
  /// to one. Throws ValidationError when a share is negative or all are
  /// zero.
  static SourceWeights fromShares(const std::vector<double>& raw_shares);

  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }

 private:
  explicit SourceWeights(std::vector<double> weights)
      : weights_(std::move(weights)) {}
  std::vector<double> weights_;
};

enum class Block { X, Y };

/// Density of the sum of two independent mixture-distributed variables.
/// K_Z = K_X * K_Y; the output is ordered row-major over (i, j) with i
/// running over gx.
Gmm convolve(const Gmm& gx, const Gmm& gy);

/// Mirror of a mixture: means negated, weights and covariances unchanged.
Gmm negate(const Gmm& g);

/// Bayesian fusion of two independent information contributions about the
/// same quantity. Throws NumericError when the evidence underflows
/// (supports effectively disjoint).
FusionResult fuse(const Gmm& ga, const Gmm& gb);

/// Integral of pdf(ga, x) * pdf(gb, x) over R^d, in closed form.
double productIntegral(const Gmm& ga, const Gmm& gb);

/// Integral of N(x | m_u, S_u) N(x | m_v, S_v) over R^d: the pairwise
/// constant behind fusion, the product integral and the L2 distance.
/// Weights are ignored.
double gaussianProductIntegral(const GaussianComponent& u,
                               const GaussianComponent& v);

/// Convex pooling of sources: components are concatenated in source order
/// with weights scaled by the source shares.
Gmm mix(const std::vector<Gmm>& sources, const SourceWeights& shares);

/// Drops the other block's dimensions; weights are unchanged and the kept
/// mean/covariance sub-blocks carry over.
Gmm marginalize(const Gmm& g, const BlockIndex& blocks, Block keep);

/// Conditions on the Y block taking the observed value. Component moments
/// follow the Gaussian conditioning rule; weights are reweighted by the
/// marginal likelihood of the observation (computed in log space).
Gmm condition(const Gmm& g, const BlockIndex& blocks,
              const Eigen::VectorXd& observed);

/// L2 distance between two mixture densities, in closed form.
double l2Distance(const Gmm& ga, const Gmm& gb);

}  // namespace gmix
