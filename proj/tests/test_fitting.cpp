#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmix/errors.hpp"
#include "gmix/fitting.hpp"
#include "gmix/sampling.hpp"
#include "support/oracles.hpp"
#include "support/random_gmm.hpp"

using gmix::Dataset;
using gmix::EmConfig;
using gmix::GaussianComponent;
using gmix::Gmm;

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

Dataset columnDataset(const std::vector<double>& xs) {
  Dataset d;
  d.points.resize(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d.points(static_cast<Eigen::Index>(i), 0) = xs[i];
  }
  return d;
}

void checkMonotoneTrace(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1] - 1e-8);
  }
}

}  // namespace

TEST_CASE("log-likelihood of a single point at the mode") {
  const Gmm g({GaussianComponent{1.0, vec1(0.0), mat1(1.0)}});
  const double ll = gmix::logLikelihood(g, columnDataset({0.0}));
  CHECK(ll == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("duplicating the dataset doubles the log-likelihood") {
  gmix::SeededStream gen(61);
  const Gmm g = testgen::randomGmm(gen, 1, 3);
  const std::vector<double> xs{0.1, -0.7, 1.3, 2.2, -2.9};
  std::vector<double> doubled;
  for (double x : xs) {
    doubled.push_back(x);
    doubled.push_back(x);
  }
  const double once = gmix::logLikelihood(g, columnDataset(xs));
  const double twice = gmix::logLikelihood(g, columnDataset(doubled));
  CHECK(twice == doctest::Approx(2.0 * once).epsilon(1e-12));
}

TEST_CASE("log-likelihood matches the naive product oracle") {
  gmix::SeededStream gen(62);
  const Gmm g = testgen::randomGmm(gen, 1, 4);
  std::vector<double> xs;
  for (int i = 0; i < 10; ++i) {
    xs.push_back(-2.0 + 0.4 * i);
  }
  double product = 1.0;
  for (double x : xs) {
    product *= g.pdf(vec1(x));
  }
  CHECK(gmix::logLikelihood(g, columnDataset(xs)) ==
        doctest::Approx(std::log(product)).epsilon(1e-10));
}

TEST_CASE("a point with vanishing density yields the -inf sentinel") {
  const Gmm g({GaussianComponent{1.0, vec1(0.0), mat1(1.0)}});
  const double ll = gmix::logLikelihood(g, columnDataset({1e160}));
  CHECK(std::isinf(ll));
  CHECK(ll < 0.0);
}

TEST_CASE("k=1 EM reproduces the sample moments exactly") {
  gmix::SeededStream stream(63);
  const std::size_t n = 10000;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = gmix::sampleGaussian(stream, vec1(5.0), mat1(2.0))[0];
  }
  const Dataset data = columnDataset(xs);

  EmConfig cfg;
  cfg.componentCount = 1;
  cfg.seed = 7;
  const auto report = gmix::emFit(data, cfg);

  const auto stats = oracle::sampleStats(xs);
  CHECK(std::abs(report.model.component(0).mean[0] - 5.0) < 0.05);
  CHECK(std::abs(report.model.component(0).covariance(0, 0) - 2.0) < 0.1);
  CHECK(std::abs(report.model.component(0).mean[0] - stats.mean) < 1e-10);
  CHECK(std::abs(report.model.component(0).covariance(0, 0) -
                 stats.variance) < 1e-10);
  checkMonotoneTrace(report.logLikTrace);
}

TEST_CASE("two well-separated clusters are recovered") {
  gmix::SeededStream stream(64);
  const Gmm truth({GaussianComponent{0.5, vec1(-3.0), mat1(1.0)},
                   GaussianComponent{0.5, vec1(3.0), mat1(1.0)}});
  const auto batch = gmix::sampleGmm(stream, truth, 10000);
  const Dataset data{batch.points};

  EmConfig cfg;
  cfg.componentCount = 2;
  cfg.seed = 11;
  cfg.restarts = 2;
  const auto report = gmix::emFit(data, cfg);
  checkMonotoneTrace(report.logLikTrace);

  std::vector<std::pair<double, double>> fitted;  // (mean, weight)
  for (const auto& c : report.model.components()) {
    fitted.emplace_back(c.mean[0], c.weight);
  }
  std::sort(fitted.begin(), fitted.end());
  CHECK(std::abs(fitted[0].first - (-3.0)) < 0.1);
  CHECK(std::abs(fitted[1].first - 3.0) < 0.1);
  CHECK(std::abs(fitted[0].second - 0.5) < 0.03);
  CHECK(std::abs(fitted[1].second - 0.5) < 0.03);
}

TEST_CASE("EM is deterministic under identical configs") {
  gmix::SeededStream stream(65);
  const Gmm truth({GaussianComponent{0.6, vec1(-1.0), mat1(1.0)},
                   GaussianComponent{0.4, vec1(2.0), mat1(0.5)}});
  const auto batch = gmix::sampleGmm(stream, truth, 3000);
  const Dataset data{batch.points};

  EmConfig cfg;
  cfg.componentCount = 2;
  cfg.seed = 3;
  cfg.restarts = 1;
  const auto r1 = gmix::emFit(data, cfg);
  const auto r2 = gmix::emFit(data, cfg);
  CHECK(r1.finalLogLik == r2.finalLogLik);
  CHECK(r1.logLikTrace == r2.logLikTrace);
  for (int i = 0; i < r1.model.componentCount(); ++i) {
    CHECK(r1.model.component(i).weight == r2.model.component(i).weight);
    CHECK(r1.model.component(i).mean == r2.model.component(i).mean);
    CHECK(r1.model.component(i).covariance ==
          r2.model.component(i).covariance);
  }
}

TEST_CASE("fitted models pass validation") {
  gmix::SeededStream gen(66);
  const Gmm truth = testgen::randomGmm(gen, 2, 3);
  gmix::SeededStream stream(67);
  const auto batch = gmix::sampleGmm(stream, truth, 2000);
  EmConfig cfg;
  cfg.componentCount = 3;
  cfg.seed = 5;
  cfg.restarts = 1;
  const auto report = gmix::emFit(Dataset{batch.points}, cfg);
  CHECK(gmix::validate(report.model.components()).empty());
  checkMonotoneTrace(report.logLikTrace);
}

TEST_CASE("EM rejects impossible configurations") {
  const Dataset data = columnDataset({1.0, 2.0});
  EmConfig cfg;
  cfg.componentCount = 3;
  CHECK_THROWS_AS(gmix::emFit(data, cfg), gmix::ValidationError);
}

TEST_CASE("model selection over a single candidate is trivial") {
  gmix::SeededStream stream(68);
  const auto batch = gmix::sampleGmm(
      stream, Gmm({GaussianComponent{1.0, vec1(0.0), mat1(1.0)}}), 500);
  EmConfig cfg;
  cfg.seed = 2;
  cfg.restarts = 0;
  const auto selection = gmix::selectModel(Dataset{batch.points}, {2}, cfg);
  REQUIRE(selection.bestAic.has_value());
  REQUIRE(selection.bestBic.has_value());
  CHECK(selection.entries[*selection.bestAic].k == 2);
  CHECK(selection.entries[*selection.bestBic].k == 2);
}

TEST_CASE("AIC and BIC differ by the p (log N - 2) penalty gap") {
  gmix::SeededStream stream(69);
  const auto batch = gmix::sampleGmm(
      stream, Gmm({GaussianComponent{1.0, vec1(1.0), mat1(2.0)}}), 2000);
  EmConfig cfg;
  cfg.seed = 4;
  cfg.restarts = 0;
  const auto selection =
      gmix::selectModel(Dataset{batch.points}, {1, 2, 3}, cfg);
  const double log_n = std::log(2000.0);
  for (const auto& entry : selection.entries) {
    REQUIRE(entry.report.has_value());
    const double gap = entry.report->bic - entry.report->aic;
    CHECK(gap == doctest::Approx(entry.freeParams * (log_n - 2.0))
                     .epsilon(1e-9));
  }
}

TEST_CASE("failing candidates are recorded, not fatal") {
  const Dataset data = columnDataset({1.0, 2.0, 3.0});
  EmConfig cfg;
  cfg.seed = 1;
  cfg.restarts = 0;
  const auto selection = gmix::selectModel(data, {1, 50}, cfg);
  REQUIRE(selection.entries.size() == 2);
  CHECK(selection.entries[0].report.has_value());
  CHECK(!selection.entries[1].report.has_value());
  CHECK(!selection.entries[1].error.empty());
  REQUIRE(selection.bestBic.has_value());
  CHECK(selection.entries[*selection.bestBic].k == 1);
}

TEST_CASE("empty-component rescue keeps the fit usable") {
  // Two tight clusters plus a far-away component start: k=3 on data that
  // really has two modes exercises the rescue path on some restart.
  gmix::SeededStream stream(70);
  const Gmm truth({GaussianComponent{0.5, vec1(-5.0), mat1(0.2)},
                   GaussianComponent{0.5, vec1(5.0), mat1(0.2)}});
  const auto batch = gmix::sampleGmm(stream, truth, 400);
  EmConfig cfg;
  cfg.componentCount = 3;
  cfg.seed = 9;
  cfg.restarts = 2;
  const auto report = gmix::emFit(Dataset{batch.points}, cfg);
  CHECK(gmix::validate(report.model.components()).empty());
  CHECK(report.componentRescues >= 0);
}
