#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gmix/gmm.hpp"

namespace gmix {

/// Observed sample points, one row per observation.
struct Dataset {
  Eigen::MatrixXd points;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

/// EM hyperparameters. Nonpositive tolerance/floor fields select the
/// data-driven defaults documented on each field.
struct EmConfig {
  int componentCount = 1;
  int maxIters = 500;
  /// Absolute log-likelihood change that counts as converged.
  /// Default (when <= 0): 1e-8 * N.
  double loglikTol = -1.0;
  /// Diagonal bump applied when a component covariance degenerates.
  /// Default (when <= 0): 1e-6 * mean per-dimension sample variance.
  double covarianceFloor = -1.0;
  /// Additional independent runs; the best final log-likelihood wins.
  int restarts = 4;
  std::uint64_t seed = 0;
};

struct FitReport {
  Gmm model;
  double finalLogLik = 0.0;
  std::vector<double> logLikTrace;
  int iterationsUsed = 0;
  double aic = 0.0;
  double bic = 0.0;
  long freeParams = 0;
  /// Components re-seeded at the lowest-density point after losing all
  /// responsibility mass.
  int componentRescues = 0;
};

/// Sum of log mixture densities over the dataset, each point evaluated in
/// log space. A point whose density underflows to zero yields -infinity.
double logLikelihood(const Gmm& g, const Dataset& data);

/// Expectation-Maximization fit with closed-form updates.
///
/// Initialization is deterministic given the config seed: the first mean is
/// a uniformly drawn data point, the rest follow farthest-point seeding;
/// initial covariances are the dataset covariance and initial weights are
/// uniform. Each restart runs from an independently split stream and the
/// run with the best final log-likelihood is reported.
FitReport emFit(const Dataset& data, const EmConfig& cfg);

struct ModelSelection {
  struct Entry {
    int k = 0;
    long freeParams = 0;
    std::optional<FitReport> report;  // nullopt when the fit failed
    std::string error;                // failure description when nullopt
  };
  std::vector<Entry> entries;
  /// Indices into entries; nullopt when every candidate failed.
  std::optional<std::size_t> bestAic;
  std::optional<std::size_t> bestBic;
};

/// Fits every candidate component count and scores AIC/BIC. Fit failures
/// are recorded per candidate, not propagated. Ties on a criterion choose
/// the smaller K.
ModelSelection selectModel(const Dataset& data,
                           const std::vector<int>& k_candidates,
                           const EmConfig& base);

}  // namespace gmix
