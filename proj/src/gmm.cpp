#include "gmix/gmm.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include <Eigen/SVD>

#include "gmix/errors.hpp"
#include "gmix/kahan.hpp"

namespace gmix {

namespace {

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Positive definiteness check with the jitter allowance: the factorization
// may be retried once with kJitterBudget * max diagonal added to the
// diagonal before the matrix is rejected.
std::optional<Eigen::MatrixXd> choleskyWithJitter(const Eigen::MatrixXd& sym) {
  if (auto lower = tryCholesky(sym)) {
    return lower;
  }
  const double scale = sym.diagonal().cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    return std::nullopt;
  }
  Eigen::MatrixXd jittered = sym;
  jittered.diagonal().array() += Gmm::kJitterBudget * scale;
  return tryCholesky(jittered);
}

std::string formatNumber(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::string> validate(
    const std::vector<GaussianComponent>& components) {
  std::vector<std::string> violations;
  if (components.empty()) {
    violations.push_back("mixture must have at least one component");
    return violations;
  }

  const Eigen::Index dim = components.front().dim();
  KahanSum weight_sum;
  bool shapes_ok = true;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    const std::string tag = "component " + std::to_string(i) + ": ";
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) {
      violations.push_back(tag + "weight " + formatNumber(c.weight) +
                           " is negative or not finite");
    }
    weight_sum.add(c.weight);
    if (c.mean.size() == 0) {
      violations.push_back(tag + "mean is empty");
      shapes_ok = false;
      continue;
    }
    if (c.mean.size() != dim) {
      violations.push_back(tag + "dimension " + std::to_string(c.mean.size()) +
                           " differs from dimension " + std::to_string(dim) +
                           " of component 0");
      shapes_ok = false;
      continue;
    }
    if (c.covariance.rows() != dim || c.covariance.cols() != dim) {
      violations.push_back(tag + "covariance is " +
                           std::to_string(c.covariance.rows()) + "x" +
                           std::to_string(c.covariance.cols()) +
                           ", expected " + std::to_string(dim) + "x" +
                           std::to_string(dim));
      shapes_ok = false;
      continue;
    }
    if (!c.mean.allFinite() || !c.covariance.allFinite()) {
      violations.push_back(tag + "mean or covariance has non-finite entries");
      shapes_ok = false;
      continue;
    }
    const double frobenius = c.covariance.norm();
    const double asymmetry = (c.covariance - c.covariance.transpose()).norm();
    if (frobenius > 0.0 && asymmetry > Gmm::kSymmetryTolerance * frobenius) {
      violations.push_back(tag + "covariance is not symmetric (relative "
                           "asymmetry " +
                           formatNumber(asymmetry / frobenius) + ")");
      continue;
    }
    if (!choleskyWithJitter(symmetrized(c.covariance))) {
      violations.push_back(tag + "covariance is not positive definite");
    }
  }

  if (shapes_ok) {
    const double sum = weight_sum.value();
    if (!(std::abs(sum - 1.0) <= Gmm::kWeightSumTolerance)) {
      violations.push_back("weights sum to " + formatNumber(sum));
    }
  }
  return violations;
}

Gmm::Gmm(std::vector<GaussianComponent> components) {
  auto violations = validate(components);
  if (!violations.empty()) {
    std::string message = "invalid mixture: ";
    for (std::size_t i = 0; i < violations.size(); ++i) {
      if (i > 0) {
        message += "; ";
      }
      message += violations[i];
    }
    throw ValidationError(message);
  }

  components_.reserve(components.size());
  KahanSum weight_sum;
  for (auto& c : components) {
    if (c.weight == 0.0) {
      continue;  // zero-weight components carry no mass; drop them
    }
    weight_sum.add(c.weight);
    components_.push_back(GaussianComponent{
        c.weight, std::move(c.mean), symmetrized(c.covariance)});
  }
  if (components_.empty()) {
    throw ValidationError("invalid mixture: all components have zero weight");
  }

  // Renormalize, but skip when the sum already sits within floating-point
  // accumulation noise of one; that makes normalization idempotent, so a
  // serialized mixture parses back bit-identically.
  const double sum = weight_sum.value();
  const double machine_tol = 16.0 * static_cast<double>(components_.size()) *
                             std::numeric_limits<double>::epsilon();
  if (std::abs(sum - 1.0) > machine_tol) {
    for (auto& c : components_) {
      c.weight /= sum;
    }
  }

  evaluators_.reserve(components_.size());
  for (const auto& c : components_) {
    if (tryCholesky(c.covariance)) {
      evaluators_.emplace_back(c.mean, c.covariance);
    } else {
      // validate() accepted this matrix via the jitter allowance; evaluate
      // it with the same jitter applied.
      Eigen::MatrixXd jittered = c.covariance;
      jittered.diagonal().array() +=
          kJitterBudget * c.covariance.diagonal().cwiseAbs().maxCoeff();
      evaluators_.emplace_back(c.mean, jittered);
    }
  }
}

double Gmm::pdf(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) {
    throw ValidationError("pdf: point has dimension " +
                          std::to_string(x.size()) + ", mixture has " +
                          std::to_string(dim()));
  }
  KahanSum sum;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    sum.add(components_[i].weight * std::exp(evaluators_[i].logDensity(x)));
  }
  return sum.value();
}

double Gmm::logPdf(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) {
    throw ValidationError("logPdf: point has dimension " +
                          std::to_string(x.size()) + ", mixture has " +
                          std::to_string(dim()));
  }
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(components_.size());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    terms[i] = std::log(components_[i].weight) +
               evaluators_[i].logDensity(x);
    max_term = std::max(max_term, terms[i]);
  }
  if (!std::isfinite(max_term)) {
    return -std::numeric_limits<double>::infinity();
  }
  KahanSum sum;
  for (double t : terms) {
    sum.add(std::exp(t - max_term));
  }
  return max_term + std::log(sum.value());
}

Eigen::VectorXd Gmm::pdfBatch(const Eigen::MatrixXd& points) const {
  if (points.cols() != dim()) {
    throw ValidationError("pdfBatch: points have dimension " +
                          std::to_string(points.cols()) + ", mixture has " +
                          std::to_string(dim()));
  }
  const Eigen::Index n = points.rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd comp = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const Eigen::VectorXd term =
        components_[i].weight *
        evaluators_[i].logDensityBatch(points).array().exp().matrix();
    const Eigen::VectorXd y = term - comp;
    const Eigen::VectorXd t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

Eigen::VectorXd Gmm::logPdfBatch(const Eigen::MatrixXd& points) const {
  if (points.cols() != dim()) {
    throw ValidationError("logPdfBatch: points have dimension " +
                          std::to_string(points.cols()) + ", mixture has " +
                          std::to_string(dim()));
  }
  const Eigen::Index n = points.rows();
  const int k = componentCount();
  Eigen::MatrixXd terms(n, k);
  for (int i = 0; i < k; ++i) {
    terms.col(i) = evaluators_[i].logDensityBatch(points).array() +
                   std::log(components_[i].weight);
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double m = terms.row(r).maxCoeff();
    if (!std::isfinite(m)) {
      out[r] = -std::numeric_limits<double>::infinity();
      continue;
    }
    KahanSum s;
    for (int i = 0; i < k; ++i) {
      s.add(std::exp(terms(r, i) - m));
    }
    out[r] = m + std::log(s.value());
  }
  return out;
}

MomentSummary Gmm::moments() const {
  const Eigen::Index d = dim();
  KahanVectorSum mean_sum(d);
  KahanMatrixXdSum second_moment(d, d);
  for (const auto& c : components_) {
    mean_sum.add(c.weight * c.mean);
    second_moment.add(c.weight *
                      (c.covariance + c.mean * c.mean.transpose()));
  }
  const Eigen::VectorXd mean = mean_sum.value();
  Eigen::MatrixXd cov = second_moment.value() - mean * mean.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return MomentSummary{mean, cov};
}

Gmm gaussianFallback(const Gmm& g) {
  const MomentSummary m = g.moments();
  return Gmm({GaussianComponent{1.0, m.mean, m.covariance}});
}

Gmm affineTransform(const Gmm& g, const Eigen::MatrixXd& a,
                    const Eigen::VectorXd& b) {
  const Eigen::Index d = g.dim();
  const Eigen::Index k = a.rows();
  if (a.cols() != d) {
    throw ValidationError("affine: matrix has " + std::to_string(a.cols()) +
                          " columns, mixture has dimension " +
                          std::to_string(d));
  }
  if (b.size() != k) {
    throw ValidationError("affine: offset has length " +
                          std::to_string(b.size()) + ", matrix has " +
                          std::to_string(k) + " rows");
  }
  if (k < 1 || k > d) {
    throw ValidationError("affine: matrix must have between 1 and " +
                          std::to_string(d) + " rows");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const double tol = std::numeric_limits<double>::epsilon() *
                     static_cast<double>(std::max(a.rows(), a.cols())) *
                     svd.singularValues().maxCoeff();
  if (svd.singularValues().minCoeff() <= tol) {
    throw ValidationError(
        "affine: matrix is rank deficient; output covariance would be "
        "degenerate");
  }

  std::vector<GaussianComponent> out;
  out.reserve(g.componentCount());
  for (const auto& c : g.components()) {
    out.push_back(GaussianComponent{c.weight, a * c.mean + b,
                                    a * c.covariance * a.transpose()});
  }
  return Gmm(std::move(out));
}

long paramCount(int component_count, int dim) {
  if (component_count < 1 || dim < 1) {
    throw ValidationError("paramCount: K and d must be positive");
  }
  const long k = component_count;
  const long d = dim;
  return k - 1 + k * d + k * d * (d + 1) / 2;
}

}  // namespace gmix
