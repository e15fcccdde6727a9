#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmix/algebra.hpp"
#include "gmix/errors.hpp"
#include "gmix/gmm.hpp"
#include "support/oracles.hpp"
#include "support/random_gmm.hpp"

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

Gmm standardNormal1d() {
  return Gmm({GaussianComponent{1.0, vec1(0.0), mat1(1.0)}});
}

}  // namespace

TEST_CASE("validate accepts the unit Gaussian") {
  CHECK(gmix::validate({GaussianComponent{1.0, vec1(0.0), mat1(1.0)}})
            .empty());
}

TEST_CASE("validate reports a bad weight sum") {
  const auto violations = gmix::validate(
      {GaussianComponent{0.6, vec1(0.0), mat1(1.0)},
       GaussianComponent{0.5, vec1(1.0), mat1(1.0)}});
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].find("weights sum to 1.1") != std::string::npos);
}

TEST_CASE("validate rejects an indefinite covariance") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  const auto violations = gmix::validate(
      {GaussianComponent{1.0, Eigen::VectorXd::Zero(2), cov}});
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].find("not positive definite") != std::string::npos);
}

TEST_CASE("validate flags negative weights and dimension mismatches") {
  const auto violations = gmix::validate(
      {GaussianComponent{-0.5, vec1(0.0), mat1(1.0)},
       GaussianComponent{1.5, Eigen::VectorXd::Zero(2),
                         Eigen::MatrixXd::Identity(2, 2)}});
  CHECK(violations.size() >= 2);
}

TEST_CASE("construction rejects invalid mixtures with every violation") {
  CHECK_THROWS_AS(Gmm({GaussianComponent{0.6, vec1(0.0), mat1(1.0)},
                       GaussianComponent{0.5, vec1(1.0), mat1(1.0)}}),
                  gmix::ValidationError);
}

TEST_CASE("zero-weight components are dropped on construction") {
  const Gmm g({GaussianComponent{1.0, vec1(0.0), mat1(1.0)},
               GaussianComponent{0.0, vec1(9.0), mat1(1.0)}});
  CHECK(g.componentCount() == 1);
  CHECK(g.pdf(vec1(0.0)) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
}

TEST_CASE("weights within tolerance are renormalized, beyond rejected") {
  const Gmm g({GaussianComponent{0.5 + 4e-10, vec1(0.0), mat1(1.0)},
               GaussianComponent{0.5, vec1(1.0), mat1(1.0)}});
  double sum = 0.0;
  for (const auto& c : g.components()) {
    sum += c.weight;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(Gmm({GaussianComponent{0.5, vec1(0.0), mat1(1.0)},
                       GaussianComponent{0.5 + 1e-8, vec1(1.0), mat1(1.0)}}),
                  gmix::ValidationError);
}

TEST_CASE("covariances are symmetrized on construction") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.5 + 1e-12, 0.5, 2.0;
  const Gmm g({GaussianComponent{1.0, Eigen::VectorXd::Zero(2), cov}});
  const auto& stored = g.component(0).covariance;
  CHECK(stored(0, 1) == stored(1, 0));
}

TEST_CASE("pdf at the standard normal peak") {
  CHECK(standardNormal1d().pdf(vec1(0.0)) ==
        doctest::Approx(0.3989422804014327).epsilon(1e-12));
}

TEST_CASE("pdf equals the weighted per-component sum") {
  gmix::SeededStream stream(11);
  const Gmm g = testgen::randomGmm(stream, 2, 4);
  Eigen::VectorXd x(2);
  x << 0.3, -0.7;
  double expected = 0.0;
  for (const auto& c : g.components()) {
    expected +=
        c.weight * std::exp(gmix::logGaussian(x, c.mean, c.covariance));
  }
  CHECK(g.pdf(x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("pdf rejects dimension mismatches") {
  CHECK_THROWS_AS(standardNormal1d().pdf(Eigen::VectorXd::Zero(2)),
                  gmix::ValidationError);
}

TEST_CASE("1-D pdf integrates to one") {
  gmix::SeededStream stream(12);
  const Gmm g = testgen::randomGmm(stream, 1, 5);
  const auto range = oracle::gmmRange(g, 12.0);
  const double mass = oracle::trapezoid(
      [&](double x) { return g.pdf(vec1(x)); }, range.lo, range.hi, 20001);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("moments of a single component are its parameters") {
  const Gmm g({GaussianComponent{1.0, vec1(2.0), mat1(4.0)}});
  const auto m = g.moments();
  CHECK(m.mean[0] == 2.0);
  CHECK(m.covariance(0, 0) == 4.0);
}

TEST_CASE("moments of the symmetric two-component mixture") {
  const Gmm g({GaussianComponent{0.5, vec1(-1.0), mat1(1.0)},
               GaussianComponent{0.5, vec1(1.0), mat1(1.0)}});
  const auto m = g.moments();
  CHECK(m.mean[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(m.covariance(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("moments match Monte Carlo estimates") {
  gmix::SeededStream stream(13);
  const Gmm g = testgen::randomGmm(stream, 1, 3);
  gmix::SeededStream sampler(99);
  const auto batch = gmix::sampleGmm(sampler, g, 1000000);
  const auto stats = oracle::sampleStats(oracle::column(batch.points, 0));
  const auto m = g.moments();
  CHECK(std::abs(stats.mean - m.mean[0]) < 5.0 * stats.meanStdError);
  CHECK(std::abs(stats.variance - m.covariance(0, 0)) <
        5.0 * stats.varStdError);
}

TEST_CASE("gaussian fallback carries the mixture moments verbatim") {
  gmix::SeededStream stream(14);
  const Gmm g = testgen::randomGmm(stream, 2, 4);
  const Gmm fb = gmix::gaussianFallback(g);
  const auto m = g.moments();
  REQUIRE(fb.componentCount() == 1);
  CHECK(fb.component(0).weight == 1.0);
  CHECK(fb.component(0).mean == m.mean);
  CHECK(fb.component(0).covariance == m.covariance);
}

TEST_CASE("gaussian fallback fixed point and idempotence") {
  const Gmm g({GaussianComponent{1.0, vec1(3.0), mat1(2.0)}});
  const Gmm fb = gmix::gaussianFallback(g);
  CHECK(fb.component(0).mean[0] == 3.0);
  CHECK(fb.component(0).covariance(0, 0) == 2.0);

  const Gmm two({GaussianComponent{0.5, vec1(-1.0), mat1(1.0)},
                 GaussianComponent{0.5, vec1(1.0), mat1(1.0)}});
  const Gmm fb1 = gmix::gaussianFallback(two);
  CHECK(fb1.component(0).mean[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(fb1.component(0).covariance(0, 0) ==
        doctest::Approx(2.0).epsilon(1e-15));
  const Gmm fb2 = gmix::gaussianFallback(fb1);
  CHECK(fb2.component(0).mean == fb1.component(0).mean);
  CHECK(fb2.component(0).covariance == fb1.component(0).covariance);
}

TEST_CASE("affine identity leaves the mixture unchanged") {
  gmix::SeededStream stream(15);
  const Gmm g = testgen::randomGmm(stream, 2, 3);
  const Gmm out = gmix::affineTransform(
      g, Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2));
  for (int i = 0; i < g.componentCount(); ++i) {
    CHECK(out.component(i).weight == g.component(i).weight);
    CHECK(out.component(i).mean == g.component(i).mean);
    CHECK(out.component(i).covariance == g.component(i).covariance);
  }
}

TEST_CASE("negation flips means and keeps covariances") {
  gmix::SeededStream stream(16);
  const Gmm g = testgen::randomGmm(stream, 2, 3);
  const Gmm out = gmix::negate(g);
  for (int i = 0; i < g.componentCount(); ++i) {
    CHECK(out.component(i).mean == (-g.component(i).mean).eval());
    CHECK(out.component(i).covariance == g.component(i).covariance);
  }
}

TEST_CASE("1-D affine scales mean and variance") {
  const Gmm g({GaussianComponent{1.0, vec1(1.0), mat1(1.0)}});
  const Gmm out = gmix::affineTransform(g, mat1(2.0), vec1(3.0));
  CHECK(out.component(0).mean[0] == 5.0);
  CHECK(out.component(0).covariance(0, 0) == 4.0);
}

TEST_CASE("rank-deficient affine maps are rejected") {
  gmix::SeededStream stream(17);
  const Gmm g = testgen::randomGmm(stream, 2, 2);
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(gmix::affineTransform(g, a, Eigen::VectorXd::Zero(2)),
                  gmix::ValidationError);
}

TEST_CASE("moments commute with affine maps") {
  gmix::SeededStream stream(18);
  for (int rep = 0; rep < 10; ++rep) {
    const Gmm g = testgen::randomGmm(stream, 2, 4);
    Eigen::MatrixXd a(2, 2);
    a << 1.0 + stream.nextUniform(), stream.nextUniform(),
        -stream.nextUniform(), 1.0 + stream.nextUniform();
    Eigen::VectorXd b(2);
    b << stream.nextUniform(), -stream.nextUniform();
    const auto direct = gmix::affineTransform(g, a, b).moments();
    const auto m = g.moments();
    const Eigen::VectorXd mean = a * m.mean + b;
    const Eigen::MatrixXd cov = a * m.covariance * a.transpose();
    CHECK((direct.mean - mean).norm() <= 1e-12 * (1.0 + mean.norm()));
    CHECK((direct.covariance - cov).norm() <= 1e-12 * (1.0 + cov.norm()));
  }
}

TEST_CASE("parameter counts") {
  CHECK(gmix::paramCount(4, 2) == 23);
  CHECK(gmix::paramCount(2, 2) == 11);
  CHECK(gmix::paramCount(1, 1) == 2);
  CHECK_THROWS_AS(gmix::paramCount(0, 1), gmix::ValidationError);
}

TEST_CASE("parameter count matches the free scalars of a stored mixture") {
  for (int k = 1; k <= 5; ++k) {
    for (int d = 1; d <= 3; ++d) {
      const long weights = k - 1;
      const long means = static_cast<long>(k) * d;
      const long upper_tri = static_cast<long>(k) * d * (d + 1) / 2;
      CHECK(gmix::paramCount(k, d) == weights + means + upper_tri);
    }
  }
}
