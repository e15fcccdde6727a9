#include "gmix/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gmix/errors.hpp"
#include "gmix/kahan.hpp"
#include "gmix/sampling.hpp"

namespace gmix {

namespace {

constexpr Eigen::Index kChunk = 16384;
constexpr double kEmptyComponentFraction = 1e-10;

struct DataMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // biased (divide by N)
};

DataMoments dataMoments(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  KahanVectorSum mean_sum(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    mean_sum.add(points.row(i).transpose());
  }
  const Eigen::VectorXd mean = mean_sum.value() / static_cast<double>(n);
  KahanMatrixXdSum scatter(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd c = points.row(i).transpose() - mean;
    scatter.add(c * c.transpose());
  }
  Eigen::MatrixXd cov = scatter.value() / static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose());
  return DataMoments{mean, cov};
}

Eigen::MatrixXd ensurePositiveDefinite(Eigen::MatrixXd cov, double floor) {
  double bump = std::max(floor, 1e-300);
  for (int attempt = 0; attempt < 60; ++attempt) {
    if (tryCholesky(cov)) {
      return cov;
    }
    cov.diagonal().array() += bump;
    bump *= 10.0;
  }
  throw NumericError("emFit: could not regularize a degenerate covariance");
}

// A covariance is healthy when its smallest eigenvalue clears the floor;
// otherwise the floor is added to the diagonal (escalating) until the
// matrix factorizes.
Eigen::MatrixXd applyFloorIfDegenerate(Eigen::MatrixXd cov, double floor) {
  Eigen::MatrixXd shifted = cov;
  shifted.diagonal().array() -= floor;
  if (tryCholesky(shifted)) {
    return cov;
  }
  cov.diagonal().array() += floor;
  return ensurePositiveDefinite(std::move(cov), floor);
}

struct EmParams {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
};

EmParams initialize(const Eigen::MatrixXd& points, int k,
                    const DataMoments& stats, double floor,
                    SeededStream& stream) {
  const Eigen::Index n = points.rows();
  EmParams params;
  params.weights.assign(k, 1.0 / k);
  params.covariances.assign(
      k, ensurePositiveDefinite(stats.covariance, floor));

  // Farthest-point seeding: a uniformly drawn first mean, then repeatedly
  // the data point farthest from every chosen mean (ties at the lowest
  // index).
  const Eigen::Index first = std::min<Eigen::Index>(
      n - 1, static_cast<Eigen::Index>(stream.nextUniform() *
                                       static_cast<double>(n)));
  params.means.push_back(points.row(first).transpose());
  Eigen::VectorXd min_dist =
      (points.rowwise() - points.row(first)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index best = 0;
    min_dist.maxCoeff(&best);
    params.means.push_back(points.row(best).transpose());
    const Eigen::VectorXd dist =
        (points.rowwise() - points.row(best)).rowwise().squaredNorm();
    min_dist = min_dist.cwiseMin(dist);
  }
  return params;
}

struct EStepResult {
  double loglik = 0.0;
  std::vector<double> nk;                  // responsibility mass per component
  std::vector<Eigen::VectorXd> sum_x;      // sum of r * x
  std::vector<Eigen::MatrixXd> sum_xx;     // sum of r * x x^T
  Eigen::VectorXd point_loglik;            // per-point log density
};

EStepResult eStep(const Eigen::MatrixXd& points, const EmParams& params) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  const int k = static_cast<int>(params.weights.size());

  std::vector<GaussianEvaluator> evaluators;
  evaluators.reserve(k);
  for (int j = 0; j < k; ++j) {
    evaluators.emplace_back(params.means[j], params.covariances[j]);
  }

  EStepResult result;
  result.point_loglik.resize(n);
  std::vector<KahanSum> nk(k);
  std::vector<KahanVectorSum> sum_x(k, KahanVectorSum(d));
  std::vector<KahanMatrixXdSum> sum_xx(k, KahanMatrixXdSum(d, d));
  KahanSum loglik;

  Eigen::MatrixXd logp;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index rows = std::min(kChunk, n - start);
    const auto chunk = points.middleRows(start, rows);
    logp.resize(rows, k);
    for (int j = 0; j < k; ++j) {
      logp.col(j) = evaluators[j].logDensityBatch(chunk).array() +
                    std::log(params.weights[j]);
    }
    const Eigen::VectorXd row_max = logp.rowwise().maxCoeff();
    const Eigen::VectorXd lse =
        row_max.array() +
        (logp.colwise() - row_max).array().exp().rowwise().sum().log();
    result.point_loglik.segment(start, rows) = lse;
    loglik.add(lse.sum());

    // Chunk-local plain sums, folded into the compensated global
    // accumulators in chunk order so the reduction stays deterministic.
    for (int j = 0; j < k; ++j) {
      const Eigen::ArrayXd r = (logp.col(j) - lse).array().exp();
      nk[j].add(r.sum());
      sum_x[j].add(chunk.transpose() * r.matrix());
      sum_xx[j].add(chunk.transpose() * (chunk.array().colwise() * r).matrix());
    }
  }

  result.loglik = loglik.value();
  result.nk.resize(k);
  result.sum_x.reserve(k);
  result.sum_xx.reserve(k);
  for (int j = 0; j < k; ++j) {
    result.nk[j] = nk[j].value();
    result.sum_x.push_back(sum_x[j].value());
    result.sum_xx.push_back(sum_xx[j].value());
  }
  return result;
}

double loglikOnly(const Eigen::MatrixXd& points, const EmParams& params) {
  const Eigen::Index n = points.rows();
  const int k = static_cast<int>(params.weights.size());
  std::vector<GaussianEvaluator> evaluators;
  evaluators.reserve(k);
  for (int j = 0; j < k; ++j) {
    evaluators.emplace_back(params.means[j], params.covariances[j]);
  }
  KahanSum loglik;
  Eigen::MatrixXd logp;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index rows = std::min(kChunk, n - start);
    const auto chunk = points.middleRows(start, rows);
    logp.resize(rows, k);
    for (int j = 0; j < k; ++j) {
      logp.col(j) = evaluators[j].logDensityBatch(chunk).array() +
                    std::log(params.weights[j]);
    }
    const Eigen::VectorXd row_max = logp.rowwise().maxCoeff();
    const Eigen::VectorXd lse =
        row_max.array() +
        (logp.colwise() - row_max).array().exp().rowwise().sum().log();
    loglik.add(lse.sum());
  }
  return loglik.value();
}

struct RunResult {
  EmParams params;
  std::vector<double> trace;
  int iterations = 0;
  int rescues = 0;
};

RunResult runEm(const Eigen::MatrixXd& points, int k,
                const DataMoments& stats, double floor, double tol,
                int max_iters, SeededStream stream) {
  const Eigen::Index n = points.rows();
  const double total = static_cast<double>(n);

  RunResult run;
  run.params = initialize(points, k, stats, floor, stream);

  bool converged = false;
  for (int iter = 1; iter <= max_iters; ++iter) {
    run.iterations = iter;
    EStepResult e = eStep(points, run.params);
    run.trace.push_back(e.loglik);
    if (run.trace.size() >= 2 &&
        std::abs(run.trace.end()[-1] - run.trace.end()[-2]) < tol) {
      converged = true;  // parameters already match the last trace entry
      break;
    }

    // M step
    std::vector<int> empty;
    KahanSum mass;
    for (int j = 0; j < k; ++j) {
      mass.add(e.nk[j]);
    }
    for (int j = 0; j < k; ++j) {
      if (e.nk[j] < kEmptyComponentFraction * total) {
        empty.push_back(j);
        continue;
      }
      run.params.weights[j] = e.nk[j] / mass.value();
      run.params.means[j] = e.sum_x[j] / e.nk[j];
      Eigen::MatrixXd cov =
          e.sum_xx[j] / e.nk[j] -
          run.params.means[j] * run.params.means[j].transpose();
      cov = 0.5 * (cov + cov.transpose());
      run.params.covariances[j] = applyFloorIfDegenerate(std::move(cov), floor);
    }

    if (!empty.empty()) {
      // Re-seed starved components at the points the current model explains
      // worst, one point per component in ascending density order.
      std::vector<Eigen::Index> order(n);
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) {
                         return e.point_loglik[a] < e.point_loglik[b];
                       });
      for (std::size_t r = 0; r < empty.size(); ++r) {
        const int j = empty[r];
        const Eigen::Index idx = order[std::min<std::size_t>(r, n - 1)];
        run.params.means[j] = points.row(idx).transpose();
        run.params.covariances[j] =
            ensurePositiveDefinite(stats.covariance, floor);
        run.params.weights[j] = 1.0 / k;
        ++run.rescues;
      }
      KahanSum wsum;
      for (double w : run.params.weights) {
        wsum.add(w);
      }
      for (double& w : run.params.weights) {
        w /= wsum.value();
      }
    }
  }

  if (!converged) {
    run.trace.push_back(loglikOnly(points, run.params));
  }
  return run;
}

}  // namespace

double logLikelihood(const Gmm& g, const Dataset& data) {
  if (data.size() < 1) {
    throw ValidationError("logLikelihood: dataset is empty");
  }
  if (data.dim() != g.dim()) {
    throw ValidationError("logLikelihood: dataset has dimension " +
                          std::to_string(data.dim()) + ", mixture has " +
                          std::to_string(g.dim()));
  }
  KahanSum sum;
  for (Eigen::Index start = 0; start < data.size(); start += kChunk) {
    const Eigen::Index rows = std::min(kChunk, data.size() - start);
    const Eigen::VectorXd lp =
        g.logPdfBatch(data.points.middleRows(start, rows));
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!std::isfinite(lp[i]) && lp[i] < 0.0) {
        return -std::numeric_limits<double>::infinity();
      }
      sum.add(lp[i]);
    }
  }
  return sum.value();
}

FitReport emFit(const Dataset& data, const EmConfig& cfg) {
  const Eigen::Index n = data.size();
  const Eigen::Index d = data.dim();
  const int k = cfg.componentCount;
  if (n < 1 || d < 1) {
    throw ValidationError("emFit: dataset is empty");
  }
  if (k < 1) {
    throw ValidationError("emFit: component count must be at least 1");
  }
  if (n < k) {
    throw ValidationError("emFit: " + std::to_string(n) +
                          " points cannot support " + std::to_string(k) +
                          " components");
  }
  if (cfg.maxIters < 1 || cfg.restarts < 0) {
    throw ValidationError("emFit: maxIters must be positive and restarts "
                          "nonnegative");
  }

  const DataMoments stats = dataMoments(data.points);
  const double floor =
      cfg.covarianceFloor > 0.0
          ? cfg.covarianceFloor
          : 1e-6 * std::max(stats.covariance.diagonal().mean(),
                            std::numeric_limits<double>::min());
  const double tol =
      cfg.loglikTol > 0.0 ? cfg.loglikTol : 1e-8 * static_cast<double>(n);

  const SeededStream root(cfg.seed);
  std::optional<RunResult> best;
  const int runs = cfg.restarts + 1;
  for (int r = 0; r < runs; ++r) {
    RunResult run = runEm(data.points, k, stats, floor, tol, cfg.maxIters,
                          root.split(static_cast<std::uint64_t>(r)));
    if (!best || run.trace.back() > best->trace.back()) {
      best = std::move(run);
    }
  }

  std::vector<GaussianComponent> components;
  components.reserve(k);
  for (int j = 0; j < k; ++j) {
    components.push_back(GaussianComponent{best->params.weights[j],
                                           best->params.means[j],
                                           best->params.covariances[j]});
  }
  FitReport report{Gmm(std::move(components)),
                   best->trace.back(),
                   best->trace,
                   best->iterations,
                   0.0,
                   0.0,
                   paramCount(k, static_cast<int>(d)),
                   best->rescues};
  report.aic = -2.0 * report.finalLogLik + 2.0 * report.freeParams;
  report.bic = -2.0 * report.finalLogLik +
               static_cast<double>(report.freeParams) *
                   std::log(static_cast<double>(n));
  return report;
}

ModelSelection selectModel(const Dataset& data,
                           const std::vector<int>& k_candidates,
                           const EmConfig& base) {
  if (k_candidates.empty()) {
    throw ValidationError("selectModel: no candidate component counts");
  }
  ModelSelection selection;
  selection.entries.reserve(k_candidates.size());
  for (int k : k_candidates) {
    ModelSelection::Entry entry;
    entry.k = k;
    try {
      EmConfig cfg = base;
      cfg.componentCount = k;
      FitReport report = emFit(data, cfg);
      entry.freeParams = report.freeParams;
      entry.report = std::move(report);
    } catch (const Error& e) {
      entry.error = e.what();
      entry.freeParams =
          k >= 1 && data.dim() >= 1
              ? paramCount(k, static_cast<int>(data.dim()))
              : 0;
    }
    selection.entries.push_back(std::move(entry));
  }

  auto better = [&](std::size_t lhs, std::size_t rhs, auto criterion) {
    const auto& a = selection.entries[lhs];
    const auto& b = selection.entries[rhs];
    const double va = criterion(*a.report);
    const double vb = criterion(*b.report);
    if (va != vb) {
      return va < vb;
    }
    return a.k < b.k;  // ties favor the simpler model
  };
  for (std::size_t i = 0; i < selection.entries.size(); ++i) {
    if (!selection.entries[i].report) {
      continue;
    }
    auto aic = [](const FitReport& r) { return r.aic; };
    auto bic = [](const FitReport& r) { return r.bic; };
    if (!selection.bestAic || better(i, *selection.bestAic, aic)) {
      selection.bestAic = i;
    }
    if (!selection.bestBic || better(i, *selection.bestBic, bic)) {
      selection.bestBic = i;
    }
  }
  return selection;
}

}  // namespace gmix
