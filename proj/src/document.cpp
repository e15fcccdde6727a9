#include "gmix/document.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <utility>

#include "gmix/errors.hpp"

namespace gmix {

std::string formatFloat(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

void requireSingleLine(const std::string& value, const char* field) {
  if (value.find('\n') != std::string::npos ||
      value.find('\r') != std::string::npos) {
    throw ValidationError(std::string("document: metadata field '") + field +
                          "' must be a single line");
  }
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : text_(text) {}

  /// Next line without its terminator; false at end of input.
  bool next(std::string& line) {
    if (pos_ >= text_.size()) {
      return false;
    }
    const auto eol = text_.find('\n', pos_);
    if (eol == std::string::npos) {
      line = text_.substr(pos_);
      pos_ = text_.size();
    } else {
      line = text_.substr(pos_, eol - pos_);
      pos_ = eol + 1;
    }
    ++line_number_;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    return true;
  }

  int lineNumber() const { return line_number_; }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
  int line_number_ = 0;
};

[[noreturn]] void fail(int line, const std::string& message) {
  throw ParseError("document line " + std::to_string(line) + ": " + message);
}

double parseFloat(const std::string& token, int line, const char* field) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE) {
    fail(line, std::string("invalid ") + field + " value '" + token + "'");
  }
  return value;
}

long parseInt(const std::string& token, int line, const char* field) {
  errno = 0;
  char* end = nullptr;
  const long value = std::strtol(token.c_str(), &end, 10);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE) {
    fail(line, std::string("invalid ") + field + " value '" + token + "'");
  }
  return value;
}

std::vector<std::string> splitFields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (in >> field) {
    fields.push_back(field);
  }
  return fields;
}

std::vector<double> parseFloats(const std::vector<std::string>& fields,
                                std::size_t expected, int line,
                                const char* field_name) {
  if (fields.size() - 1 != expected) {
    fail(line, std::string(field_name) + " has " +
                   std::to_string(fields.size() - 1) + " values, expected " +
                   std::to_string(expected));
  }
  std::vector<double> values;
  values.reserve(expected);
  for (std::size_t i = 1; i < fields.size(); ++i) {
    values.push_back(parseFloat(fields[i], line, field_name));
  }
  return values;
}

}  // namespace

std::string serializeDocument(const GmmDocument& doc) {
  requireSingleLine(doc.name, "name");
  requireSingleLine(doc.unit, "unit");
  requireSingleLine(doc.note, "note");

  std::string out;
  out += doc.formatVersion;
  out += '\n';
  if (!doc.name.empty()) {
    out += "name " + doc.name + '\n';
  }
  if (!doc.unit.empty()) {
    out += "unit " + doc.unit + '\n';
  }
  if (!doc.note.empty()) {
    out += "note " + doc.note + '\n';
  }
  out += "dim " + std::to_string(doc.dim) + '\n';
  out += "components " + std::to_string(doc.components.size()) + '\n';
  for (std::size_t i = 0; i < doc.components.size(); ++i) {
    const auto& c = doc.components[i];
    out += "component " + std::to_string(i) + '\n';
    out += "weight " + formatFloat(c.weight) + '\n';
    out += "mean";
    for (double v : c.mean) {
      out += ' ';
      out += formatFloat(v);
    }
    out += '\n';
    out += "cov";
    for (double v : c.covarianceRowMajor) {
      out += ' ';
      out += formatFloat(v);
    }
    out += '\n';
  }
  out += "end\n";
  return out;
}

GmmDocument parseDocument(const std::string& text) {
  LineReader reader(text);
  std::string line;

  if (!reader.next(line)) {
    throw ParseError("document line 1: empty document");
  }
  GmmDocument doc;
  if (line != GmmDocument::kFormatVersion) {
    throw ParseError("document line 1: unsupported format version '" + line +
                     "', expected '" + GmmDocument::kFormatVersion + "'");
  }
  doc.formatVersion = line;

  // Optional metadata in canonical order, then dim.
  bool have_line = reader.next(line);
  auto metadata = [&](const char* key, std::string& slot) {
    const std::string prefix = std::string(key) + ' ';
    if (have_line && line.rfind(prefix, 0) == 0) {
      slot = line.substr(prefix.size());
      have_line = reader.next(line);
    }
  };
  metadata("name", doc.name);
  metadata("unit", doc.unit);
  metadata("note", doc.note);

  if (!have_line) {
    fail(reader.lineNumber() + 1, "missing dim line");
  }
  {
    auto fields = splitFields(line);
    if (fields.size() != 2 || fields[0] != "dim") {
      fail(reader.lineNumber(), "expected 'dim <d>', got '" + line + "'");
    }
    const long d = parseInt(fields[1], reader.lineNumber(), "dim");
    if (d < 1) {
      fail(reader.lineNumber(), "dim must be at least 1");
    }
    doc.dim = static_cast<int>(d);
  }

  if (!reader.next(line)) {
    fail(reader.lineNumber() + 1, "missing components line");
  }
  long count = 0;
  {
    auto fields = splitFields(line);
    if (fields.size() != 2 || fields[0] != "components") {
      fail(reader.lineNumber(),
           "expected 'components <K>', got '" + line + "'");
    }
    count = parseInt(fields[1], reader.lineNumber(), "components");
    if (count < 1) {
      fail(reader.lineNumber(), "component count must be at least 1");
    }
  }

  const std::size_t d = static_cast<std::size_t>(doc.dim);
  doc.components.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    if (!reader.next(line)) {
      fail(reader.lineNumber() + 1,
           "missing component " + std::to_string(i));
    }
    {
      auto fields = splitFields(line);
      if (fields.size() != 2 || fields[0] != "component" ||
          parseInt(fields[1], reader.lineNumber(), "component index") != i) {
        fail(reader.lineNumber(), "expected 'component " + std::to_string(i) +
                                      "', got '" + line + "'");
      }
    }
    GmmDocument::Component component;
    if (!reader.next(line)) {
      fail(reader.lineNumber() + 1, "missing weight line");
    }
    {
      auto fields = splitFields(line);
      if (fields.size() != 2 || fields[0] != "weight") {
        fail(reader.lineNumber(), "expected 'weight <w>', got '" + line + "'");
      }
      component.weight = parseFloat(fields[1], reader.lineNumber(), "weight");
    }
    if (!reader.next(line)) {
      fail(reader.lineNumber() + 1, "missing mean line");
    }
    {
      auto fields = splitFields(line);
      if (fields.empty() || fields[0] != "mean") {
        fail(reader.lineNumber(), "expected 'mean <values>', got '" + line +
                                      "'");
      }
      component.mean = parseFloats(fields, d, reader.lineNumber(), "mean");
    }
    if (!reader.next(line)) {
      fail(reader.lineNumber() + 1, "missing cov line");
    }
    {
      auto fields = splitFields(line);
      if (fields.empty() || fields[0] != "cov") {
        fail(reader.lineNumber(), "expected 'cov <values>', got '" + line +
                                      "'");
      }
      component.covarianceRowMajor =
          parseFloats(fields, d * d, reader.lineNumber(), "cov");
    }
    doc.components.push_back(std::move(component));
  }

  if (!reader.next(line)) {
    fail(reader.lineNumber() + 1, "missing 'end' terminator");
  }
  if (line != "end") {
    fail(reader.lineNumber(), "expected 'end', got '" + line + "'");
  }
  while (reader.next(line)) {
    if (!line.empty()) {
      fail(reader.lineNumber(), "unexpected content after 'end'");
    }
  }
  return doc;
}

GmmDocument toDocument(const Gmm& g, std::string name, std::string unit,
                       std::string note) {
  GmmDocument doc;
  doc.dim = static_cast<int>(g.dim());
  doc.name = std::move(name);
  doc.unit = std::move(unit);
  doc.note = std::move(note);
  doc.components.reserve(g.componentCount());
  for (const auto& c : g.components()) {
    GmmDocument::Component out;
    out.weight = c.weight;
    out.mean.assign(c.mean.data(), c.mean.data() + c.mean.size());
    out.covarianceRowMajor.reserve(c.covariance.size());
    for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) {
      for (Eigen::Index col = 0; col < c.covariance.cols(); ++col) {
        out.covarianceRowMajor.push_back(c.covariance(r, col));
      }
    }
    doc.components.push_back(std::move(out));
  }
  return doc;
}

Gmm toGmm(const GmmDocument& doc) {
  std::vector<GaussianComponent> components;
  components.reserve(doc.components.size());
  const Eigen::Index d = doc.dim;
  for (const auto& c : doc.components) {
    GaussianComponent component;
    component.weight = c.weight;
    component.mean =
        Eigen::Map<const Eigen::VectorXd>(c.mean.data(), d);
    component.covariance.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index col = 0; col < d; ++col) {
        component.covariance(r, col) =
            c.covarianceRowMajor[static_cast<std::size_t>(r * d + col)];
      }
    }
    components.push_back(std::move(component));
  }
  return Gmm(std::move(components));
}

GmmDocument loadDocument(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "' for reading");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw IoError("read failure on '" + path + "'");
  }
  return parseDocument(buffer.str());
}

Gmm loadGmm(const std::string& path) { return toGmm(loadDocument(path)); }

void saveDocument(const GmmDocument& doc, const std::string& path) {
  const std::string text = serializeDocument(doc);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw IoError("write failure on '" + path + "'");
  }
}

void saveGmm(const Gmm& g, const std::string& path) {
  saveDocument(toDocument(g), path);
}

}  // namespace gmix
