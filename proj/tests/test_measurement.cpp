#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmix/errors.hpp"
#include "gmix/measurement.hpp"
#include "support/oracles.hpp"
#include "support/random_gmm.hpp"

using gmix::CurveSpec;
using gmix::Dataset;
using gmix::EmConfig;
using gmix::GaussianComponent;
using gmix::Gmm;
using gmix::QualityRegion;
using gmix::SeededStream;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

Eigen::MatrixXd mat1(double x) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = x;
  return m;
}

CurveSpec quadraticCurve(double noise_var) {
  return CurveSpec{[](double x) { return x - 0.2 * x * x; }, 0.0, 1.0,
                   noise_var};
}

EmConfig quickEm(std::uint64_t seed) {
  EmConfig cfg;
  cfg.seed = seed;
  cfg.restarts = 1;
  cfg.maxIters = 300;
  return cfg;
}

}  // namespace

TEST_CASE("near-noiseless simulation sticks to the curve") {
  SeededStream stream(101);
  const auto data = gmix::simulateDevice(quadraticCurve(1e-12), 500, stream);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double x = data.points(i, 0);
    const double y = data.points(i, 1);
    CHECK(std::abs(y - (x - 0.2 * x * x)) < 1e-5);
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("simulated measurands are uniform over the range") {
  SeededStream stream(102);
  const auto data = gmix::simulateDevice(quadraticCurve(0.0025), 1000, stream);
  const double ks = oracle::ksStatistic(
      oracle::column(data.points, 0),
      [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(ks < 0.06);
}

TEST_CASE("residual variance matches the configured noise") {
  SeededStream stream(103);
  const double noise_var = 0.0025;
  const auto data = gmix::simulateDevice(quadraticCurve(noise_var), 1000, stream);
  std::vector<double> residuals(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double x = data.points(i, 0);
    residuals[static_cast<std::size_t>(i)] =
        data.points(i, 1) - (x - 0.2 * x * x);
  }
  const auto stats = oracle::sampleStats(residuals);
  CHECK(stats.variance > 0.9 * noise_var);
  CHECK(stats.variance < 1.1 * noise_var);
}

TEST_CASE("a single-component device fit is linear regression") {
  SeededStream stream(104);
  CurveSpec linear{[](double x) { return 2.0 * x + 1.0; }, 0.0, 1.0, 0.01};
  const auto data = gmix::simulateDevice(linear, 2000, stream);
  const auto model = gmix::fitDevice(data, 1, quickEm(5));

  // Least squares from the biased sample moments.
  const auto xs = oracle::column(data.points, 0);
  const auto ys = oracle::column(data.points, 1);
  const auto sx = oracle::sampleStats(xs);
  const auto sy = oracle::sampleStats(ys);
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - sx.mean) * (ys[i] - sy.mean);
  }
  sxy /= static_cast<double>(xs.size());
  const double slope = sxy / sx.variance;
  const double intercept = sy.mean - slope * sx.mean;

  const std::vector<double> grid{0.1, 0.3, 0.5, 0.7, 0.9};
  for (const auto& s : gmix::conditionalStats(model, grid)) {
    CHECK(!s.flagged);
    CHECK(s.mean ==
          doctest::Approx(slope * s.x + intercept).epsilon(1e-8));
  }
}

TEST_CASE("single-component conditional stats follow the exact formulas") {
  Eigen::VectorXd mean(2);
  mean << 0.4, 0.7;
  Eigen::MatrixXd cov(2, 2);
  cov << 0.09, 0.04, 0.04, 0.05;
  const Gmm joint({GaussianComponent{1.0, mean, cov}});
  const gmix::MeasurementModel model{joint, gmix::BlockIndex({0}, {1}),
                                     gmix::FitReport{joint}};
  for (double x : {0.1, 0.4, 0.8}) {
    const auto stats = gmix::conditionalStats(model, {x});
    const double expected_mean = 0.7 + 0.04 / 0.09 * (x - 0.4);
    const double expected_var = 0.05 - 0.04 * 0.04 / 0.09;
    CHECK(stats[0].mean == doctest::Approx(expected_mean).epsilon(1e-12));
    CHECK(stats[0].variance == doctest::Approx(expected_var).epsilon(1e-12));
  }
}

TEST_CASE("grid points far outside the support are flagged") {
  Eigen::VectorXd mean(2);
  mean << 0.5, 0.5;
  Eigen::MatrixXd cov = 0.01 * Eigen::MatrixXd::Identity(2, 2);
  const Gmm joint({GaussianComponent{1.0, mean, cov}});
  const gmix::MeasurementModel model{joint, gmix::BlockIndex({0}, {1}),
                                     gmix::FitReport{joint}};
  const auto stats = gmix::conditionalStats(model, {0.5, 500.0});
  CHECK(!stats[0].flagged);
  CHECK(stats[1].flagged);
  CHECK(std::isnan(stats[1].mean));
}

TEST_CASE("posterior of a linear K=1 device is the Kalman update") {
  Eigen::VectorXd mean(2);
  mean << 1.0, 1.2;
  Eigen::MatrixXd cov(2, 2);
  cov << 0.25, 0.2, 0.2, 0.41;  // y = x + w with Var(w) = 0.16... roughly
  const Gmm joint({GaussianComponent{1.0, mean, cov}});
  const gmix::MeasurementModel model{joint, gmix::BlockIndex({0}, {1}),
                                     gmix::FitReport{joint}};
  const double y_star = 1.6;
  const Gmm posterior = gmix::posteriorFromObservation(model, vec1(y_star));
  REQUIRE(posterior.componentCount() == 1);
  const double gain = 0.2 / 0.41;
  CHECK(posterior.component(0).mean[0] ==
        doctest::Approx(1.0 + gain * (y_star - 1.2)).epsilon(1e-12));
  CHECK(posterior.component(0).covariance(0, 0) ==
        doctest::Approx(0.25 - 0.2 * gain).epsilon(1e-12));
  // The posterior spread never depends on the observed value itself.
  const Gmm other = gmix::posteriorFromObservation(model, vec1(-3.0));
  CHECK(other.component(0).covariance(0, 0) ==
        posterior.component(0).covariance(0, 0));
}

TEST_CASE("posterior density equals the quadrature Bayes slice") {
  gmix::SeededStream gen(105);
  const Gmm joint = testgen::randomGmm(gen, 2, 3);
  const gmix::MeasurementModel model{joint, gmix::BlockIndex({0}, {1}),
                                     gmix::FitReport{joint}};
  const double y_star = joint.moments().mean[1];
  const Gmm posterior = gmix::posteriorFromObservation(model, vec1(y_star));

  const auto rx = oracle::gmmRange(joint, 12.0, 0);
  const double normalizer = oracle::trapezoid(
      [&](double x) {
        Eigen::VectorXd p(2);
        p << x, y_star;
        return joint.pdf(p);
      },
      rx.lo, rx.hi, 40001);
  const auto rp = oracle::gmmRange(posterior, 6.0);
  for (int i = 0; i < 200; ++i) {
    const double x = rp.lo + (rp.hi - rp.lo) * i / 199.0;
    Eigen::VectorXd p(2);
    p << x, y_star;
    CHECK(posterior.pdf(vec1(x)) ==
          doctest::Approx(joint.pdf(p) / normalizer).epsilon(1e-6));
  }
}

TEST_CASE("product of near-point masses concentrates at the product") {
  const Gmm gx({GaussianComponent{1.0, vec1(2.0), mat1(1e-10)}});
  const Gmm gy({GaussianComponent{1.0, vec1(3.0), mat1(1e-10)}});
  SeededStream stream(106);
  EmConfig cfg = quickEm(3);
  cfg.restarts = 0;
  const auto report = gmix::propagateProduct(gx, gy, 20000, 1, cfg, stream);
  CHECK(std::abs(report.model.moments().mean[0] - 6.0) < 1e-3);
}

TEST_CASE("product fit moments match the Monte Carlo moments") {
  gmix::SeededStream gen(107);
  const Gmm gx = testgen::randomGmm(gen, 1, 2);
  const Gmm gy = testgen::randomGmm(gen, 1, 2);
  SeededStream stream(108);
  EmConfig cfg = quickEm(4);
  cfg.restarts = 0;
  cfg.maxIters = 150;
  const std::size_t n = 100000;
  const auto report = gmix::propagateProduct(gx, gy, n, 0, cfg, stream);
  CHECK(report.model.componentCount() ==
        gx.componentCount() * gy.componentCount());

  SeededStream verify(109);
  const auto xs = gmix::sampleGmm(verify, gx, n);
  const auto ys = gmix::sampleGmm(verify, gy, n);
  std::vector<double> zs(n);
  for (std::size_t i = 0; i < n; ++i) {
    zs[i] = xs.points(static_cast<Eigen::Index>(i), 0) *
            ys.points(static_cast<Eigen::Index>(i), 0);
  }
  const auto stats = oracle::sampleStats(zs);
  const auto m = report.model.moments();
  CHECK(std::abs(m.mean[0] - stats.mean) < 4.0 * stats.meanStdError);
  CHECK(std::abs(m.covariance(0, 0) - stats.variance) <
        4.0 * stats.varStdError);
}

TEST_CASE("the whole space has probability one") {
  gmix::SeededStream gen(110);
  const Gmm g = testgen::randomGmm(gen, 2, 3);
  SeededStream stream(111);
  const auto region = QualityRegion::predicate(
      2, [](const Eigen::VectorXd&) { return true; });
  const auto estimate = gmix::qcProbability(g, region, 10000, stream);
  CHECK(estimate.estimate == 1.0);
  CHECK(estimate.standardError == 0.0);
}

TEST_CASE("the 95% interval of the standard normal") {
  const Gmm g({GaussianComponent{1.0, vec1(0.0), mat1(1.0)}});
  SeededStream stream(112);
  const auto region =
      QualityRegion::hyperrectangle(vec1(-1.959964), vec1(1.959964));
  const std::size_t n = 100000;
  const auto estimate = gmix::qcProbability(g, region, n, stream);
  CHECK(std::abs(estimate.estimate - 0.95) < 3.0 * estimate.standardError);
  REQUIRE(estimate.crossCheck.has_value());
  CHECK(*estimate.crossCheck == doctest::Approx(0.95).epsilon(1e-6));
}

TEST_CASE("a rectangle far outside the support scores zero") {
  const Gmm g({GaussianComponent{1.0, vec1(0.0), mat1(1.0)}});
  SeededStream stream(113);
  const auto region = QualityRegion::hyperrectangle(vec1(20.0), vec1(21.0));
  const auto estimate = gmix::qcProbability(g, region, 100000, stream);
  CHECK(estimate.estimate == 0.0);
  CHECK(estimate.standardError == 0.0);
}

TEST_CASE("probability is monotone under region inclusion") {
  gmix::SeededStream gen(114);
  for (int rep = 0; rep < 10; ++rep) {
    const Gmm g = testgen::randomGmm(gen, 1, 3);
    const double center = g.moments().mean[0];
    const double inner_width = 0.5 + gen.nextUniform();
    const double outer_width = inner_width + gen.nextUniform();
    SeededStream s1(200 + rep);
    SeededStream s2(300 + rep);
    const auto inner = gmix::qcProbability(
        g,
        QualityRegion::hyperrectangle(vec1(center - inner_width),
                                      vec1(center + inner_width)),
        20000, s1);
    const auto outer = gmix::qcProbability(
        g,
        QualityRegion::hyperrectangle(vec1(center - outer_width),
                                      vec1(center + outer_width)),
        20000, s2);
    CHECK(inner.estimate <=
          outer.estimate + 3.0 * (inner.standardError + outer.standardError));
  }
}

TEST_CASE("reference-setting fit: conditional variance band and posterior") {
  SeededStream stream(115);
  const auto data = gmix::simulateDevice(quadraticCurve(0.0025), 1000, stream);
  EmConfig cfg = quickEm(41);
  cfg.restarts = 2;
  const auto model = gmix::fitDevice(data, 10, cfg);
  CHECK(model.joint.componentCount() == 10);

  // V(Y|X) within [0.5, 2] x noise variance on the central 80% of the range.
  std::vector<double> grid;
  for (int i = 0; i <= 80; ++i) {
    grid.push_back(0.1 + 0.8 * i / 80.0);
  }
  for (const auto& s : gmix::conditionalStats(model, grid)) {
    CHECK(!s.flagged);
    CHECK(s.variance > 0.5 * 0.0025);
    CHECK(s.variance < 2.0 * 0.0025);
  }

  const Gmm posterior = gmix::posteriorFromObservation(model, vec1(0.5));
  CHECK(posterior.dim() == 1);
  CHECK(posterior.componentCount() == 10);
  double weight_sum = 0.0;
  for (const auto& c : posterior.components()) {
    weight_sum += c.weight;
  }
  CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gmix::validate(posterior.components()).empty());
}

TEST_CASE("curve fit quality improves with more data") {
  const std::vector<std::size_t> sizes{250, 1000, 4000};
  std::vector<double> mean_rms(sizes.size(), 0.0);
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    for (std::size_t si = 0; si < sizes.size(); ++si) {
      SeededStream stream(500 + seed);
      const auto data =
          gmix::simulateDevice(quadraticCurve(0.0025), sizes[si], stream);
      EmConfig cfg = quickEm(40 + seed);
      cfg.maxIters = 200;
      const auto model = gmix::fitDevice(data, 6, cfg);
      std::vector<double> grid;
      for (int i = 0; i < 101; ++i) {
        grid.push_back(0.05 + 0.9 * i / 100.0);
      }
      double sq = 0.0;
      for (const auto& s : gmix::conditionalStats(model, grid)) {
        const double err = s.mean - (s.x - 0.2 * s.x * s.x);
        sq += err * err;
      }
      mean_rms[si] += std::sqrt(sq / grid.size());
    }
  }
  CHECK(mean_rms[0] / seeds > mean_rms[2] / seeds);
}
