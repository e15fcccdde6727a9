#pragma once

#include <string>
#include <vector>

#include "gmix/gmm.hpp"

namespace gmix {

/// Persistent form of a mixture: the gmm/1 text format.
///
/// Canonical layout, LF line endings, floats printed with 17 significant
/// digits (lossless double round trip):
///
///   gmm/1
///   name <single line, optional>
///   unit <single line, optional>
///   note <single line, optional>
///   dim <d>
///   components <K>
///   component <index>
///   weight <w>
///   mean <d values>
///   cov <d*d values, row-major>
///   ...
///   end
struct GmmDocument {
  static constexpr const char* kFormatVersion = "gmm/1";

  std::string formatVersion = kFormatVersion;
  int dim = 0;
  struct Component {
    double weight = 0.0;
    std::vector<double> mean;
    std::vector<double> covarianceRowMajor;
  };
  std::vector<Component> components;
  std::string name;  // optional metadata; empty means absent
  std::string unit;
  std::string note;
};

/// Canonical text form. Throws ValidationError when metadata contains line
/// breaks (the format is line-oriented).
std::string serializeDocument(const GmmDocument& doc);

/// Parses document text. Throws ParseError naming the offending line and
/// field; an unsupported version is its own distinct error.
GmmDocument parseDocument(const std::string& text);

GmmDocument toDocument(const Gmm& g, std::string name = {},
                       std::string unit = {}, std::string note = {});

/// Builds the validated mixture; throws ValidationError on semantic
/// violations (weights, definiteness, ...).
Gmm toGmm(const GmmDocument& doc);

/// File convenience wrappers; filesystem problems raise IoError.
Gmm loadGmm(const std::string& path);
GmmDocument loadDocument(const std::string& path);
void saveDocument(const GmmDocument& doc, const std::string& path);
void saveGmm(const Gmm& g, const std::string& path);

/// Shortest decimal form with up to 17 significant digits; round-trips
/// every finite double exactly.
std::string formatFloat(double value);

}  // namespace gmix
