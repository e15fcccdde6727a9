#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "gmix/document.hpp"
#include "gmix/errors.hpp"
#include "gmix/gmm.hpp"
#include "support/random_gmm.hpp"

using gmix::GmmDocument;

namespace {

std::string canonicalText(const gmix::Gmm& g) {
  return gmix::serializeDocument(gmix::toDocument(g));
}

}  // namespace

TEST_CASE("serialize-parse-serialize is byte-identical on canonical text") {
  gmix::SeededStream stream(121);
  for (int rep = 0; rep < 30; ++rep) {
    const gmix::Gmm g = testgen::randomGmm(stream, 1 + rep % 3, 4);
    const std::string text = canonicalText(g);
    const GmmDocument parsed = gmix::parseDocument(text);
    CHECK(gmix::serializeDocument(parsed) == text);
    // ... and through the validated mixture as well
    CHECK(canonicalText(gmix::toGmm(parsed)) == text);
  }
}

TEST_CASE("metadata survives the round trip in canonical order") {
  gmix::SeededStream stream(122);
  const gmix::Gmm g = testgen::randomGmm(stream, 1, 2);
  GmmDocument doc = gmix::toDocument(g, "shaft diameter", "mm",
                                     "supplier A batch 7");
  const std::string text = gmix::serializeDocument(doc);
  const GmmDocument parsed = gmix::parseDocument(text);
  CHECK(parsed.name == "shaft diameter");
  CHECK(parsed.unit == "mm");
  CHECK(parsed.note == "supplier A batch 7");
  CHECK(gmix::serializeDocument(parsed) == text);
}

TEST_CASE("metadata with line breaks is rejected at serialization") {
  gmix::SeededStream stream(123);
  const gmix::Gmm g = testgen::randomGmm(stream, 1, 2);
  GmmDocument doc = gmix::toDocument(g, "two\nlines");
  CHECK_THROWS_AS(gmix::serializeDocument(doc), gmix::ValidationError);
}

TEST_CASE("the unit Gaussian document has two free parameters") {
  const std::string text =
      "gmm/1\ndim 1\ncomponents 1\ncomponent 0\nweight 1\nmean 0\ncov 1\n"
      "end\n";
  const GmmDocument doc = gmix::parseDocument(text);
  CHECK(gmix::paramCount(static_cast<int>(doc.components.size()), doc.dim) ==
        2);
}

TEST_CASE("unknown format versions are rejected distinctly") {
  try {
    gmix::parseDocument("gmm/2\ndim 1\n");
    FAIL("expected a parse error");
  } catch (const gmix::ParseError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("a corrupted weight line names the line and field") {
  const std::string text =
      "gmm/1\ndim 1\ncomponents 1\ncomponent 0\nweight oops\nmean 0\ncov 1\n"
      "end\n";
  try {
    gmix::parseDocument(text);
    FAIL("expected a parse error");
  } catch (const gmix::ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("line 5") != std::string::npos);
    CHECK(what.find("weight") != std::string::npos);
  }
}

TEST_CASE("truncated documents are rejected") {
  CHECK_THROWS_AS(
      gmix::parseDocument("gmm/1\ndim 1\ncomponents 1\ncomponent 0\n"),
      gmix::ParseError);
  CHECK_THROWS_AS(gmix::parseDocument(""), gmix::ParseError);
  CHECK_THROWS_AS(
      gmix::parseDocument(
          "gmm/1\ndim 1\ncomponents 1\ncomponent 0\nweight 1\nmean 0\n"
          "cov 1\n"),
      gmix::ParseError);
}

TEST_CASE("wrong value counts are parse errors") {
  CHECK_THROWS_AS(
      gmix::parseDocument(
          "gmm/1\ndim 2\ncomponents 1\ncomponent 0\nweight 1\nmean 0\n"
          "cov 1 0 0 1\nend\n"),
      gmix::ParseError);
}

TEST_CASE("semantic violations surface as validation errors") {
  // Weights fine structurally, but the covariance is not positive definite.
  const std::string text =
      "gmm/1\ndim 2\ncomponents 1\ncomponent 0\nweight 1\nmean 0 0\n"
      "cov 1 2 2 1\nend\n";
  const GmmDocument doc = gmix::parseDocument(text);
  CHECK_THROWS_AS(gmix::toGmm(doc), gmix::ValidationError);
}

TEST_CASE("file round trip and io failures") {
  gmix::SeededStream stream(124);
  const gmix::Gmm g = testgen::randomGmm(stream, 2, 3);
  const std::string path = "/tmp/gmix_test_document.gmm";
  gmix::saveGmm(g, path);
  const gmix::Gmm loaded = gmix::loadGmm(path);
  REQUIRE(loaded.componentCount() == g.componentCount());
  for (int i = 0; i < g.componentCount(); ++i) {
    CHECK(loaded.component(i).weight == g.component(i).weight);
    CHECK(loaded.component(i).mean == g.component(i).mean);
    CHECK(loaded.component(i).covariance == g.component(i).covariance);
  }
  CHECK_THROWS_AS(gmix::loadGmm("/nonexistent/dir/missing.gmm"),
                  gmix::IoError);
}

TEST_CASE("17 significant digits round-trip doubles exactly") {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-300, 7.123456789012345e17,
                   -0.0001234567890123456}) {
    CHECK(std::stod(gmix::formatFloat(v)) == v);
  }
}
