#pragma once

#include "gmix/component.hpp"
#include "gmix/gmm.hpp"

namespace gmix {

struct ReductionReport {
  Gmm reduced;
  double l2BeforeRefine = 0.0;
  double l2Final = 0.0;
  int refineIterations = 0;
};

/// Moment-preserving merge of two weighted components: summed weight,
/// weighted mean, and weighted covariance plus the mean-spread term.
GaussianComponent momentMatchMerge(const GaussianComponent& c1,
                                   const GaussianComponent& c2);

/// Reduces a mixture to target_k components against the closed-form L2
/// distance to the original.
///
/// Stage 1 greedily merges the pair whose moment-matched merge increases
/// the L2 distance least (ties at the lowest pair index). Stage 2 refines
/// by block coordinate descent over softmax weight logits, means and
/// Cholesky covariance factors with central-difference gradients, stopping
/// on relative improvement below 1e-10 or after `budget` cycles.
///
/// target_k == K returns the input unchanged with zero distances.
ReductionReport reduce(const Gmm& g, int target_k, int budget = 200);

/// Max absolute central-difference gradient component of the L2 objective
/// at `reduced`, in the refinement parameterization. Used to check
/// stationarity after refinement.
double refineStationarity(const Gmm& original, const Gmm& reduced);

}  // namespace gmix
