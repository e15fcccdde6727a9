#include "gmix/algebra.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Cholesky>

#include "gmix/errors.hpp"
#include "gmix/kahan.hpp"

namespace gmix {

namespace {

constexpr double kConditionGuard = 1e12;
constexpr double kEvidenceFloor = 1e-300;

void requireSameDim(const Gmm& a, const Gmm& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw ValidationError(std::string(op) + ": operands have dimensions " +
                          std::to_string(a.dim()) + " and " +
                          std::to_string(b.dim()));
  }
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Factorized view of the pair sum S = Sigma_u + Sigma_v used by both fusion
// and the L2 distance. log c_uv is the log Gaussian density of m_u under
// N(m_v, S).
struct PairProduct {
  double log_c;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

double logPairConstant(const GaussianComponent& u, const GaussianComponent& v,
                       const char* op) {
  const Eigen::MatrixXd s = symmetrized(u.covariance + v.covariance);
  GaussianEvaluator sum_eval(v.mean, s);
  if (sum_eval.conditionEstimate() > kConditionGuard) {
    throw NumericError(std::string(op) +
                       ": covariance sum is too ill-conditioned");
  }
  return sum_eval.logDensity(u.mean);
}

PairProduct pairProduct(const GaussianComponent& u,
                        const GaussianComponent& v, const char* op) {
  const Eigen::MatrixXd s = symmetrized(u.covariance + v.covariance);
  GaussianEvaluator sum_eval(v.mean, s);
  if (sum_eval.conditionEstimate() > kConditionGuard) {
    throw NumericError(std::string(op) +
                       ": covariance sum is too ill-conditioned");
  }
  const double log_c = sum_eval.logDensity(u.mean);

  // (Su^-1 + Sv^-1)^-1 = Su - Su S^-1 Su and the matching mean, realized
  // through solves against S instead of explicit inverses.
  const auto& lower = sum_eval.choleskyFactor();
  auto solve = [&lower](const Eigen::MatrixXd& rhs) {
    Eigen::MatrixXd x = lower.triangularView<Eigen::Lower>().solve(rhs);
    lower.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    return x;
  };
  const Eigen::VectorXd w = solve(u.mean - v.mean);
  const Eigen::VectorXd mean = u.mean - u.covariance * w;
  const Eigen::MatrixXd t = solve(u.covariance);
  const Eigen::MatrixXd covariance =
      symmetrized(u.covariance - u.covariance * t);
  return PairProduct{log_c, mean, covariance};
}

}  // namespace

SourceWeights SourceWeights::fromShares(const std::vector<double>& raw) {
  if (raw.empty()) {
    throw ValidationError("source weights: no shares given");
  }
  KahanSum total;
  for (double r : raw) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw ValidationError("source weights: shares must be nonnegative");
    }
    total.add(r);
  }
  if (!(total.value() > 0.0)) {
    throw ValidationError("source weights: shares sum to zero");
  }
  std::vector<double> weights(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    weights[i] = raw[i] / total.value();
  }
  return SourceWeights(std::move(weights));
}

Gmm convolve(const Gmm& gx, const Gmm& gy) {
  requireSameDim(gx, gy, "convolve");
  std::vector<GaussianComponent> out;
  out.reserve(static_cast<std::size_t>(gx.componentCount()) *
              gy.componentCount());
  for (const auto& cx : gx.components()) {
    for (const auto& cy : gy.components()) {
      out.push_back(GaussianComponent{cx.weight * cy.weight, cx.mean + cy.mean,
                                      cx.covariance + cy.covariance});
    }
  }
  return Gmm(std::move(out));
}

Gmm negate(const Gmm& g) {
  return affineTransform(
      g, -Eigen::MatrixXd::Identity(g.dim(), g.dim()),
      Eigen::VectorXd::Zero(g.dim()));
}

FusionResult fuse(const Gmm& ga, const Gmm& gb) {
  requireSameDim(ga, gb, "fuse");
  struct Term {
    double log_weight;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
  };
  std::vector<Term> terms;
  terms.reserve(static_cast<std::size_t>(ga.componentCount()) *
                gb.componentCount());
  double max_log = -std::numeric_limits<double>::infinity();
  for (const auto& ca : ga.components()) {
    for (const auto& cb : gb.components()) {
      PairProduct p = pairProduct(ca, cb, "fuse");
      const double log_weight =
          p.log_c + std::log(ca.weight) + std::log(cb.weight);
      max_log = std::max(max_log, log_weight);
      terms.push_back(Term{log_weight, std::move(p.mean),
                           std::move(p.covariance)});
    }
  }

  if (!std::isfinite(max_log)) {
    throw NumericError(
        "fuse: evidence underflowed to zero; the operands have effectively "
        "disjoint support");
  }
  KahanSum scaled;
  for (const auto& t : terms) {
    scaled.add(std::exp(t.log_weight - max_log));
  }
  const double log_evidence = max_log + std::log(scaled.value());
  const double evidence = std::exp(log_evidence);
  if (!(evidence >= kEvidenceFloor)) {
    throw NumericError(
        "fuse: evidence " + std::to_string(evidence) +
        " is below the underflow floor; the operands have effectively "
        "disjoint support");
  }

  std::vector<GaussianComponent> out;
  out.reserve(terms.size());
  for (auto& t : terms) {
    out.push_back(GaussianComponent{std::exp(t.log_weight - log_evidence),
                                    std::move(t.mean), std::move(t.covariance)});
  }
  return FusionResult{Gmm(std::move(out)), evidence};
}

double gaussianProductIntegral(const GaussianComponent& u,
                               const GaussianComponent& v) {
  if (u.dim() == 1 && v.dim() == 1) {
    const double s = u.covariance(0, 0) + v.covariance(0, 0);
    const double delta = u.mean[0] - v.mean[0];
    return std::exp(-0.5 * delta * delta / s) /
           std::sqrt(2.0 * std::numbers::pi * s);
  }
  return std::exp(logPairConstant(u, v, "gaussianProductIntegral"));
}

double productIntegral(const Gmm& ga, const Gmm& gb) {
  requireSameDim(ga, gb, "productIntegral");
  KahanSum sum;
  for (const auto& cu : ga.components()) {
    for (const auto& cv : gb.components()) {
      sum.add(cu.weight * cv.weight * gaussianProductIntegral(cu, cv));
    }
  }
  return sum.value();
}

Gmm mix(const std::vector<Gmm>& sources, const SourceWeights& shares) {
  if (sources.empty()) {
    throw ValidationError("mix: no sources given");
  }
  if (shares.size() != sources.size()) {
    throw ValidationError("mix: " + std::to_string(sources.size()) +
                          " sources but " + std::to_string(shares.size()) +
                          " shares");
  }
  const Eigen::Index d = sources.front().dim();
  std::vector<GaussianComponent> out;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    if (sources[j].dim() != d) {
      throw ValidationError("mix: source " + std::to_string(j) +
                            " has dimension " +
                            std::to_string(sources[j].dim()) +
                            ", expected " + std::to_string(d));
    }
    const double w = shares.weights()[j];
    for (const auto& c : sources[j].components()) {
      out.push_back(GaussianComponent{w * c.weight, c.mean, c.covariance});
    }
  }
  return Gmm(std::move(out));
}

Gmm marginalize(const Gmm& g, const BlockIndex& blocks, Block keep) {
  if (blocks.dim() != g.dim()) {
    throw ValidationError("marginalize: block index covers " +
                          std::to_string(blocks.dim()) +
                          " dimensions, mixture has " +
                          std::to_string(g.dim()));
  }
  std::vector<GaussianComponent> out;
  out.reserve(g.componentCount());
  for (const auto& c : g.components()) {
    if (keep == Block::X) {
      out.push_back(GaussianComponent{c.weight, blocks.selectX(c.mean),
                                      blocks.blockXX(c.covariance)});
    } else {
      out.push_back(GaussianComponent{c.weight, blocks.selectY(c.mean),
                                      blocks.blockYY(c.covariance)});
    }
  }
  return Gmm(std::move(out));
}

Gmm condition(const Gmm& g, const BlockIndex& blocks,
              const Eigen::VectorXd& observed) {
  if (blocks.dim() != g.dim()) {
    throw ValidationError("condition: block index covers " +
                          std::to_string(blocks.dim()) +
                          " dimensions, mixture has " +
                          std::to_string(g.dim()));
  }
  if (observed.size() != static_cast<Eigen::Index>(blocks.yDims().size())) {
    throw ValidationError("condition: observed vector has length " +
                          std::to_string(observed.size()) +
                          ", Y block has " +
                          std::to_string(blocks.yDims().size()));
  }

  const int k = g.componentCount();
  std::vector<GaussianComponent> out(k);
  std::vector<double> log_weights(k);
  double max_log = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) {
    const auto& c = g.component(i);
    const Eigen::VectorXd mean_y = blocks.selectY(c.mean);
    const Eigen::MatrixXd cov_yy = symmetrized(blocks.blockYY(c.covariance));
    auto lower_opt = tryCholesky(cov_yy);
    if (!lower_opt) {
      throw NumericError("condition: Y-block covariance of component " +
                         std::to_string(i) + " is singular");
    }
    GaussianEvaluator y_eval(mean_y, cov_yy);
    if (y_eval.conditionEstimate() > kConditionGuard) {
      throw NumericError("condition: Y-block covariance of component " +
                         std::to_string(i) + " is too ill-conditioned");
    }

    // Gaussian conditioning rule, realized as solves against Sigma_YY.
    const auto& lower = y_eval.choleskyFactor();
    auto solve = [&lower](const Eigen::MatrixXd& rhs) {
      Eigen::MatrixXd x = lower.triangularView<Eigen::Lower>().solve(rhs);
      lower.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
      return x;
    };
    const Eigen::MatrixXd cov_yx = blocks.blockYX(c.covariance);
    const Eigen::MatrixXd w = solve(cov_yx);  // Sigma_YY^-1 Sigma_YX
    const Eigen::VectorXd residual = observed - mean_y;
    out[i].mean = blocks.selectX(c.mean) + w.transpose() * residual;
    out[i].covariance =
        symmetrized(blocks.blockXX(c.covariance) - w.transpose() * cov_yx);
    log_weights[i] = std::log(c.weight) + y_eval.logDensity(observed);
    max_log = std::max(max_log, log_weights[i]);
  }

  if (!std::isfinite(max_log)) {
    throw NumericError(
        "condition: observed value lies outside the support of every "
        "component");
  }
  KahanSum total;
  for (int i = 0; i < k; ++i) {
    total.add(std::exp(log_weights[i] - max_log));
  }
  for (int i = 0; i < k; ++i) {
    out[i].weight = std::exp(log_weights[i] - max_log) / total.value();
  }
  return Gmm(std::move(out));
}

double l2Distance(const Gmm& ga, const Gmm& gb) {
  requireSameDim(ga, gb, "l2Distance");
  const double i_aa = productIntegral(ga, ga);
  const double i_ab = productIntegral(ga, gb);
  const double i_bb = productIntegral(gb, gb);
  double radicand = i_aa - 2.0 * i_ab + i_bb;
  if (radicand < 0.0) {
    if (radicand < -1e-12) {
      throw NumericError("l2Distance: negative squared distance " +
                         std::to_string(radicand));
    }
    radicand = 0.0;
  }
  return std::sqrt(radicand);
}

}  // namespace gmix
