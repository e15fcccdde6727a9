#include "gmix/measurement.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "gmix/errors.hpp"
#include "gmix/kahan.hpp"

namespace gmix {

namespace {

// Grid points whose measurand-marginal log density falls below this are
// reported as outside the fitted support.
constexpr double kSupportLogFloor = -300.0;

double normalCdf(double x, double mean, double variance) {
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

}  // namespace

QualityRegion QualityRegion::hyperrectangle(Eigen::VectorXd lo,
                                            Eigen::VectorXd hi) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw ValidationError("quality region: bounds must share a nonzero length");
  }
  if ((lo.array() > hi.array()).any()) {
    throw ValidationError("quality region: every interval needs lo <= hi");
  }
  QualityRegion q;
  q.dim_ = static_cast<int>(lo.size());
  q.lo_ = std::move(lo);
  q.hi_ = std::move(hi);
  return q;
}

QualityRegion QualityRegion::predicate(
    int dim, std::function<bool(const Eigen::VectorXd&)> f) {
  if (dim < 1 || !f) {
    throw ValidationError("quality region: predicate needs a positive "
                          "dimension and a callable");
  }
  QualityRegion q;
  q.dim_ = dim;
  q.member_ = std::move(f);
  return q;
}

bool QualityRegion::contains(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) {
    throw ValidationError("quality region: point has dimension " +
                          std::to_string(x.size()) + ", region has " +
                          std::to_string(dim_));
  }
  if (lo_) {
    return (x.array() >= lo_->array()).all() &&
           (x.array() <= hi_->array()).all();
  }
  return member_(x);
}

Dataset simulateDevice(const CurveSpec& curve, std::size_t n,
                       SeededStream& stream) {
  if (!curve.f) {
    throw ValidationError("simulateDevice: curve has no function");
  }
  if (!(curve.hi > curve.lo) || !std::isfinite(curve.lo) ||
      !std::isfinite(curve.hi)) {
    throw ValidationError("simulateDevice: range must be finite with lo < hi");
  }
  if (!(curve.noiseVariance > 0.0)) {
    throw ValidationError("simulateDevice: noise variance must be positive");
  }
  if (n < 1) {
    throw ValidationError("simulateDevice: need at least one point");
  }
  const double sigma = std::sqrt(curve.noiseVariance);
  Dataset data;
  data.points.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = curve.lo + stream.nextUniform() * (curve.hi - curve.lo);
    const auto [w, spare] = boxMuller(stream);
    (void)spare;
    data.points(static_cast<Eigen::Index>(i), 0) = x;
    data.points(static_cast<Eigen::Index>(i), 1) = curve.f(x) + sigma * w;
  }
  return data;
}

MeasurementModel fitDevice(const Dataset& pairs, int k, const EmConfig& base) {
  if (pairs.dim() != 2) {
    throw ValidationError("fitDevice: dataset must have (x, y) columns");
  }
  EmConfig cfg = base;
  cfg.componentCount = k;
  FitReport report = emFit(pairs, cfg);
  return MeasurementModel{report.model, BlockIndex({0}, {1}),
                          std::move(report)};
}

MeasurementModel fitDevice(const Dataset& pairs,
                           const std::vector<int>& k_candidates,
                           const EmConfig& base) {
  if (pairs.dim() != 2) {
    throw ValidationError("fitDevice: dataset must have (x, y) columns");
  }
  ModelSelection selection = selectModel(pairs, k_candidates, base);
  if (!selection.bestBic) {
    std::string detail;
    for (const auto& e : selection.entries) {
      detail += " [k=" + std::to_string(e.k) + ": " + e.error + "]";
    }
    throw NumericError("fitDevice: every candidate fit failed:" + detail);
  }
  FitReport report = *selection.entries[*selection.bestBic].report;
  return MeasurementModel{report.model, BlockIndex({0}, {1}),
                          std::move(report)};
}

std::vector<ConditionalStat> conditionalStats(
    const MeasurementModel& model, const std::vector<double>& x_grid) {
  // Condition on the measurand block, keep the observable block.
  const BlockIndex flipped(model.blocks.yDims(), model.blocks.xDims());
  const Gmm x_marginal = marginalize(model.joint, model.blocks, Block::X);

  std::vector<ConditionalStat> stats;
  stats.reserve(x_grid.size());
  for (double x : x_grid) {
    ConditionalStat s;
    s.x = x;
    Eigen::VectorXd point(1);
    point[0] = x;
    if (x_marginal.logPdf(point) < kSupportLogFloor) {
      s.flagged = true;
      s.mean = std::numeric_limits<double>::quiet_NaN();
      s.variance = std::numeric_limits<double>::quiet_NaN();
      stats.push_back(s);
      continue;
    }
    try {
      const Gmm conditional = condition(model.joint, flipped, point);
      const MomentSummary m = conditional.moments();
      s.mean = m.mean[0];
      s.variance = m.covariance(0, 0);
    } catch (const NumericError&) {
      s.flagged = true;
      s.mean = std::numeric_limits<double>::quiet_NaN();
      s.variance = std::numeric_limits<double>::quiet_NaN();
    }
    stats.push_back(s);
  }
  return stats;
}

Gmm posteriorFromObservation(const MeasurementModel& model,
                             const Eigen::VectorXd& y_star) {
  return condition(model.joint, model.blocks, y_star);
}

FitReport propagateProduct(const Gmm& gx, const Gmm& gy, std::size_t n_mc,
                           int k, const EmConfig& base, SeededStream& stream) {
  if (gx.dim() != 1 || gy.dim() != 1) {
    throw ValidationError("propagateProduct: both factors must be "
                          "one-dimensional");
  }
  if (n_mc < 1) {
    throw ValidationError("propagateProduct: need at least one sample");
  }
  const int components =
      k > 0 ? k : gx.componentCount() * gy.componentCount();

  const SampleBatch xs = sampleGmm(stream, gx, n_mc);
  const SampleBatch ys = sampleGmm(stream, gy, n_mc);
  Dataset z;
  z.points = (xs.points.col(0).array() * ys.points.col(0).array()).matrix();

  EmConfig cfg = base;
  cfg.componentCount = components;
  return emFit(z, cfg);
}

QcEstimate qcProbability(const Gmm& g, const QualityRegion& q,
                         std::size_t n_mc, SeededStream& stream) {
  if (q.dim() != g.dim()) {
    throw ValidationError("qcProbability: region has dimension " +
                          std::to_string(q.dim()) + ", mixture has " +
                          std::to_string(g.dim()));
  }
  if (n_mc < 1) {
    throw ValidationError("qcProbability: need at least one sample");
  }

  const SampleBatch batch = sampleGmm(stream, g, n_mc);
  std::size_t inside = 0;
  for (Eigen::Index i = 0; i < batch.points.rows(); ++i) {
    if (q.contains(batch.points.row(i).transpose())) {
      ++inside;
    }
  }
  QcEstimate out;
  out.estimate = static_cast<double>(inside) / static_cast<double>(n_mc);
  out.standardError = std::sqrt(out.estimate * (1.0 - out.estimate) /
                                static_cast<double>(n_mc));

  if (q.isRectangle() && g.componentCount() == 1) {
    const auto& c = g.component(0);
    const double max_diag = c.covariance.diagonal().cwiseAbs().maxCoeff();
    const double off_diag =
        (c.covariance -
         Eigen::MatrixXd(c.covariance.diagonal().asDiagonal()))
            .cwiseAbs()
            .maxCoeff();
    if (off_diag <= 1e-12 * max_diag) {
      double product = 1.0;
      for (Eigen::Index dim = 0; dim < g.dim(); ++dim) {
        product *= normalCdf(q.hi()[dim], c.mean[dim], c.covariance(dim, dim)) -
                   normalCdf(q.lo()[dim], c.mean[dim], c.covariance(dim, dim));
      }
      out.crossCheck = product;
    }
  }
  return out;
}

}  // namespace gmix
