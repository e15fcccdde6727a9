// gmix: Gaussian mixtures as the native data type for uncertain quantities.
// Subcommands wrap the library operations one to one; the CLI adds no
// numeric transformation of its own.
//
// Exit codes: 0 success, 2 validation, 3 parse/format, 4 numeric failure,
// 5 I/O.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmix/algebra.hpp"
#include "gmix/document.hpp"
#include "gmix/errors.hpp"
#include "gmix/expression.hpp"
#include "gmix/fitting.hpp"
#include "gmix/gmm.hpp"
#include "gmix/manifest.hpp"
#include "gmix/measurement.hpp"
#include "gmix/reduction.hpp"
#include "gmix/sampling.hpp"

namespace {

using gmix::formatFloat;

std::vector<double> parseDoubleList(const std::string& text,
                                    const char* what) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) {
        throw std::invalid_argument(token);
      }
    } catch (const std::exception&) {
      throw gmix::ParseError(std::string(what) + ": invalid number '" +
                             token + "'");
    }
  }
  if (values.empty()) {
    throw gmix::ParseError(std::string(what) + ": empty list");
  }
  return values;
}

std::vector<int> parseIntList(const std::string& text, const char* what) {
  std::vector<int> values;
  for (double v : parseDoubleList(text, what)) {
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) {
      throw gmix::ParseError(std::string(what) + ": expected integer, got " +
                             formatFloat(v));
    }
    values.push_back(i);
  }
  return values;
}

Eigen::MatrixXd parseMatrix(const std::string& text, const char* what) {
  std::vector<std::vector<double>> rows;
  std::stringstream in(text);
  std::string row;
  while (std::getline(in, row, ';')) {
    rows.push_back(parseDoubleList(row, what));
  }
  if (rows.empty()) {
    throw gmix::ParseError(std::string(what) + ": empty matrix");
  }
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) {
      throw gmix::ParseError(std::string(what) + ": ragged rows");
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  return m;
}

Eigen::VectorXd toVector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(
      v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd readMatrixCsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw gmix::IoError("cannot open '" + path + "' for reading");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    if (line_number == 1 &&
        line.find_first_not_of("0123456789+-.eE, \t") != std::string::npos) {
      continue;  // header row
    }
    std::vector<double> row;
    std::stringstream fields(line);
    std::string token;
    while (std::getline(fields, token, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(token, &used));
        if (used != token.size()) {
          throw std::invalid_argument(token);
        }
      } catch (const std::exception&) {
        throw gmix::ParseError(path + " line " + std::to_string(line_number) +
                               ": invalid number '" + token + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw gmix::ParseError(path + " line " + std::to_string(line_number) +
                             ": expected " +
                             std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw gmix::ParseError(path + ": no data rows");
  }
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  return m;
}

void writeTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw gmix::IoError("cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw gmix::IoError("write failure on '" + path + "'");
  }
}

/// Timer plus bookkeeping for the replay manifest of stochastic commands.
class ManifestScope {
 public:
  ManifestScope(std::vector<std::string> command, std::uint64_t seed)
      : start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.seed = seed;
  }

  void addInput(const std::string& path) {
    manifest_.inputs.push_back({path, gmix::toHex(gmix::fnv1a64File(path))});
  }

  void addOutput(const std::string& path) { manifest_.outputs.push_back(path); }

  void write() {
    manifest_.wallTimeSeconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_)
            .count();
    const std::string path =
        manifest_.outputs.empty()
            ? "gmix.manifest.json"
            : manifest_.outputs.front() + ".manifest.json";
    gmix::writeManifest(manifest_, path);
  }

 private:
  gmix::RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

std::string csvRow(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) {
      row += ',';
    }
    row += fields[i];
  }
  row += '\n';
  return row;
}

std::string datasetCsv(const Eigen::MatrixXd& points,
                       const std::vector<std::string>& header,
                       const std::vector<int>* labels = nullptr) {
  std::string out = csvRow(header);
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    std::vector<std::string> fields;
    fields.reserve(points.cols() + (labels ? 1 : 0));
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      fields.push_back(formatFloat(points(r, c)));
    }
    if (labels) {
      fields.push_back(std::to_string((*labels)[static_cast<std::size_t>(r)]));
    }
    out += csvRow(fields);
  }
  return out;
}

std::string fitSummaryCsv(const gmix::FitReport& report) {
  std::string out = csvRow({"quantity", "value"});
  out += csvRow({"loglik", formatFloat(report.finalLogLik)});
  out += csvRow({"aic", formatFloat(report.aic)});
  out += csvRow({"bic", formatFloat(report.bic)});
  out += csvRow({"free_params", std::to_string(report.freeParams)});
  out += csvRow({"iterations", std::to_string(report.iterationsUsed)});
  out += csvRow({"rescues", std::to_string(report.componentRescues)});
  return out;
}

gmix::EmConfig emConfigFromOptions(int k, int max_iters, int restarts,
                                   double tol, double floor,
                                   std::uint64_t seed) {
  gmix::EmConfig cfg;
  cfg.componentCount = k;
  cfg.maxIters = max_iters;
  cfg.restarts = restarts;
  cfg.loglikTol = tol;
  cfg.covarianceFloor = floor;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Gaussian mixtures as a native data type: closed-form uncertainty "
      "algebra, sampling, EM fitting, and measurement-system workflows"};
  app.require_subcommand(1);
  const std::vector<std::string> argv_copy(argv, argv + argc);

  // ---- moments ----------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "moments", "Print the mixture mean and covariance as CSV");
    cmd->add_option("input", *input, "Input .gmm document")->required();
    cmd->callback([input] {
      const gmix::Gmm g = gmix::loadGmm(*input);
      const gmix::MomentSummary m = g.moments();
      std::string out = csvRow({"quantity", "values"});
      std::vector<std::string> mean_fields{"mean"};
      for (Eigen::Index i = 0; i < m.mean.size(); ++i) {
        mean_fields.push_back(formatFloat(m.mean[i]));
      }
      out += csvRow(mean_fields);
      std::vector<std::string> cov_fields{"covariance"};
      for (Eigen::Index r = 0; r < m.covariance.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.covariance.cols(); ++c) {
          cov_fields.push_back(formatFloat(m.covariance(r, c)));
        }
      }
      out += csvRow(cov_fields);
      std::cout << out;
    });
  }

  // ---- fallback ---------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "fallback", "Moment-matched single-Gaussian approximation");
    cmd->add_option("input", *input, "Input .gmm document")->required();
    cmd->add_option("-o,--output", *output, "Output .gmm document")
        ->required();
    cmd->callback([input, output] {
      gmix::saveGmm(gmix::gaussianFallback(gmix::loadGmm(*input)), *output);
    });
  }

  // ---- affine -----------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto matrix = std::make_shared<std::string>();
    auto offset = std::make_shared<std::string>();
    auto* cmd =
        app.add_subcommand("affine", "Apply x -> A x + b to the mixture");
    cmd->add_option("input", *input, "Input .gmm document")->required();
    cmd->add_option("--matrix", *matrix,
                    "Matrix A, rows separated by ';', entries by ','")
        ->required();
    cmd->add_option("--offset", *offset, "Offset b, entries separated by ','");
    cmd->add_option("-o,--output", *output, "Output .gmm document")
        ->required();
    cmd->callback([input, output, matrix, offset] {
      const gmix::Gmm g = gmix::loadGmm(*input);
      const Eigen::MatrixXd a = parseMatrix(*matrix, "--matrix");
      const Eigen::VectorXd b =
          offset->empty() ? Eigen::VectorXd::Zero(a.rows()).eval()
                          : toVector(parseDoubleList(*offset, "--offset"));
      gmix::saveGmm(gmix::affineTransform(g, a, b), *output);
    });
  }

  // ---- convolve ---------------------------------------------------------
  {
    auto lhs = std::make_shared<std::string>();
    auto rhs = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "convolve", "Density of the sum of two independent quantities");
    cmd->add_option("lhs", *lhs, "First .gmm document")->required();
    cmd->add_option("rhs", *rhs, "Second .gmm document")->required();
    cmd->add_option("-o,--output", *output, "Output .gmm document")
        ->required();
    cmd->callback([lhs, rhs, output] {
      gmix::saveGmm(gmix::convolve(gmix::loadGmm(*lhs), gmix::loadGmm(*rhs)),
                    *output);
    });
  }

  // ---- negate -----------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand("negate", "Density of -X (means negated)");
    cmd->add_option("input", *input, "Input .gmm document")->required();
    cmd->add_option("-o,--output", *output, "Output .gmm document")
        ->required();
    cmd->callback([input, output] {
      gmix::saveGmm(gmix::negate(gmix::loadGmm(*input)), *output);
    });
  }

  // ---- fuse -------------------------------------------------------------
  {
    auto lhs = std::make_shared<std::string>();
    auto rhs = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "fuse", "Bayesian fusion of two independent information sources");
    cmd->add_option("lhs", *lhs, "First .gmm document")->required();
    cmd->add_option("rhs", *rhs, "Second .gmm document")->required();
    cmd->add_option("-o,--output", *output, "Posterior .gmm document")
        ->required();
    cmd->callback([lhs, rhs, output] {
      const gmix::FusionResult result =
          gmix::fuse(gmix::loadGmm(*lhs), gmix::loadGmm(*rhs));
      gmix::saveGmm(result.posterior, *output);
      std::cout << csvRow({"quantity", "value"})
                << csvRow({"evidence", formatFloat(result.evidence)});
    });
  }

  // ---- mix --------------------------------------------------------------
  {
    auto inputs = std::make_shared<std::vector<std::string>>();
    auto shares = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "mix", "Pool several sources as a convex combination");
    cmd->add_option("inputs", *inputs, "Source .gmm documents")
        ->required()
        ->expected(-1);
    cmd->add_option("--shares", *shares,
                    "Raw nonnegative shares (e.g. 60,40), normalized to "
                    "weights")
        ->required();
    cmd->add_option("-o,--output", *output, "Output .gmm document")
        ->required();
    cmd->callback([inputs, shares, output] {
      std::vector<gmix::Gmm> sources;
      sources.reserve(inputs->size());
      for (const auto& path : *inputs) {
        sources.push_back(gmix::loadGmm(path));
      }
      const auto weights = gmix::SourceWeights::fromShares(
          parseDoubleList(*shares, "--shares"));
      gmix::saveGmm(gmix::mix(sources, weights), *output);
    });
  }

  // ---- marginalize ------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto keep = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "marginalize", "Keep the listed dimensions, drop the rest");
    cmd->add_option("input", *input, "Input .gmm document")->required();
    cmd->add_option("--keep", *keep, "Dimensions to keep, e.g. 0,2")
        ->required();
    cmd->add_option("-o,--output", *output, "Output .gmm document")
        ->required();
    cmd->callback([input, output, keep] {
      const gmix::Gmm g = gmix::loadGmm(*input);
      const std::vector<int> kept = parseIntList(*keep, "--keep");
      std::vector<int> dropped;
      for (int d = 0; d < g.dim(); ++d) {
        if (std::find(kept.begin(), kept.end(), d) == kept.end()) {
          dropped.push_back(d);
        }
      }
      gmix::saveGmm(gmix::marginalize(g, gmix::BlockIndex(kept, dropped),
                                      gmix::Block::X),
                    *output);
    });
  }

  // ---- condition --------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto observe_dims = std::make_shared<std::string>();
    auto values = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "condition", "Condition on observed values of the listed dimensions");
    cmd->add_option("input", *input, "Input .gmm document")->required();
    cmd->add_option("--observe-dims", *observe_dims,
                    "Observed dimensions, e.g. 1")
        ->required();
    cmd->add_option("--values", *values, "Observed values, e.g. 0.5")
        ->required();
    cmd->add_option("-o,--output", *output, "Output .gmm document")
        ->required();
    cmd->callback([input, output, observe_dims, values] {
      const gmix::Gmm g = gmix::loadGmm(*input);
      const std::vector<int> observed =
          parseIntList(*observe_dims, "--observe-dims");
      std::vector<int> kept;
      for (int d = 0; d < g.dim(); ++d) {
        if (std::find(observed.begin(), observed.end(), d) == observed.end()) {
          kept.push_back(d);
        }
      }
      gmix::saveGmm(
          gmix::condition(g, gmix::BlockIndex(kept, observed),
                          toVector(parseDoubleList(*values, "--values"))),
          *output);
    });
  }

  // ---- l2 ---------------------------------------------------------------
  {
    auto lhs = std::make_shared<std::string>();
    auto rhs = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "l2", "Closed-form L2 distance between two mixtures");
    cmd->add_option("lhs", *lhs, "First .gmm document")->required();
    cmd->add_option("rhs", *rhs, "Second .gmm document")->required();
    cmd->callback([lhs, rhs] {
      const double distance =
          gmix::l2Distance(gmix::loadGmm(*lhs), gmix::loadGmm(*rhs));
      std::cout << csvRow({"quantity", "value"})
                << csvRow({"l2_distance", formatFloat(distance)});
    });
  }

  // ---- reduce -----------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto target = std::make_shared<int>(1);
    auto budget = std::make_shared<int>(200);
    auto* cmd = app.add_subcommand(
        "reduce", "Reduce the component count against the L2 distance");
    cmd->add_option("input", *input, "Input .gmm document")->required();
    cmd->add_option("--k", *target, "Target component count")->required();
    cmd->add_option("--budget", *budget, "Refinement cycle budget");
    cmd->add_option("-o,--output", *output, "Output .gmm document")
        ->required();
    cmd->callback([input, output, target, budget] {
      const gmix::ReductionReport report =
          gmix::reduce(gmix::loadGmm(*input), *target, *budget);
      gmix::saveGmm(report.reduced, *output);
      std::cout << csvRow({"quantity", "value"})
                << csvRow(
                       {"l2_before_refine", formatFloat(report.l2BeforeRefine)})
                << csvRow({"l2_final", formatFloat(report.l2Final)})
                << csvRow({"refine_iterations",
                           std::to_string(report.refineIterations)});
    });
  }

  // ---- pdf --------------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto grid = std::make_shared<std::vector<double>>();
    auto grid_n = std::make_shared<int>(512);
    auto* cmd =
        app.add_subcommand("pdf", "Emit a 1-D density curve as CSV (x,pdf)");
    cmd->add_option("input", *input, "Input .gmm document (1-D)")->required();
    cmd->add_option("--grid", *grid, "Grid bounds: lo hi")->expected(2);
    cmd->add_option("--grid-n", *grid_n, "Number of grid points");
    cmd->add_option("-o,--output", *output, "Output CSV")->required();
    cmd->callback([input, output, grid, grid_n] {
      const gmix::Gmm g = gmix::loadGmm(*input);
      if (g.dim() != 1) {
        throw gmix::ValidationError("pdf: only 1-D mixtures have a curve");
      }
      if (*grid_n < 2) {
        throw gmix::ValidationError("pdf: grid needs at least 2 points");
      }
      double lo;
      double hi;
      if (grid->size() == 2) {
        lo = (*grid)[0];
        hi = (*grid)[1];
      } else {
        lo = std::numeric_limits<double>::infinity();
        hi = -std::numeric_limits<double>::infinity();
        for (const auto& c : g.components()) {
          const double s = std::sqrt(c.covariance(0, 0));
          lo = std::min(lo, c.mean[0] - 8.0 * s);
          hi = std::max(hi, c.mean[0] + 8.0 * s);
        }
      }
      std::string out = csvRow({"x", "pdf"});
      Eigen::VectorXd point(1);
      for (int i = 0; i < *grid_n; ++i) {
        const double x = lo + (hi - lo) * i / (*grid_n - 1);
        point[0] = x;
        out += csvRow({formatFloat(x), formatFloat(g.pdf(point))});
      }
      writeTextFile(*output, out);
    });
  }

  // ---- sample -----------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto n = std::make_shared<std::uint64_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto hist = std::make_shared<int>(0);
    auto hist_out = std::make_shared<std::string>();
    auto with_labels = std::make_shared<bool>(false);
    auto* cmd = app.add_subcommand("sample", "Draw seeded samples as CSV");
    cmd->add_option("input", *input, "Input .gmm document")->required();
    cmd->add_option("--n", *n, "Number of draws")->required();
    cmd->add_option("--seed", *seed, "Stream seed")->required();
    cmd->add_option("--hist", *hist,
                    "Also emit a histogram with this many bins (1-D only)");
    cmd->add_option("--hist-out", *hist_out,
                    "Histogram CSV path (default <output>.hist.csv)");
    cmd->add_flag("--with-labels", *with_labels,
                  "Append the chosen component index per row");
    cmd->add_option("-o,--output", *output, "Samples CSV")->required();
    cmd->callback([input, output, n, seed, hist, hist_out, with_labels,
                   argv_copy] {
      ManifestScope manifest(argv_copy, *seed);
      manifest.addInput(*input);
      const gmix::Gmm g = gmix::loadGmm(*input);
      gmix::SeededStream stream(*seed);
      const gmix::SampleBatch batch = gmix::sampleGmm(stream, g, *n);

      std::vector<std::string> header;
      for (Eigen::Index c = 0; c < batch.points.cols(); ++c) {
        header.push_back("x" + std::to_string(c));
      }
      if (*with_labels) {
        header.push_back("label");
      }
      writeTextFile(*output, datasetCsv(batch.points, header,
                                        *with_labels ? &batch.labels
                                                     : nullptr));
      manifest.addOutput(*output);

      if (*hist > 0) {
        if (g.dim() != 1) {
          throw gmix::ValidationError("sample: --hist needs a 1-D mixture");
        }
        const double lo = batch.points.col(0).minCoeff();
        const double hi = batch.points.col(0).maxCoeff();
        const double width = (hi - lo) / *hist;
        std::vector<std::uint64_t> counts(*hist, 0);
        for (Eigen::Index i = 0; i < batch.points.rows(); ++i) {
          const int bin = std::min<int>(
              *hist - 1, static_cast<int>((batch.points(i, 0) - lo) / width));
          ++counts[std::max(bin, 0)];
        }
        std::string out = csvRow({"bin_lo", "bin_hi", "count", "density"});
        for (int b = 0; b < *hist; ++b) {
          const double blo = lo + b * width;
          out += csvRow({formatFloat(blo), formatFloat(blo + width),
                         std::to_string(counts[b]),
                         formatFloat(static_cast<double>(counts[b]) /
                                     (static_cast<double>(*n) * width))});
        }
        const std::string hist_path =
            hist_out->empty() ? *output + ".hist.csv" : *hist_out;
        writeTextFile(hist_path, out);
        manifest.addOutput(hist_path);
      }
      manifest.write();
    });
  }

  // ---- fit --------------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto k = std::make_shared<int>(1);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto max_iters = std::make_shared<int>(500);
    auto restarts = std::make_shared<int>(4);
    auto tol = std::make_shared<double>(-1.0);
    auto floor = std::make_shared<double>(-1.0);
    auto trace_out = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand("fit", "EM fit of a mixture to CSV data");
    cmd->add_option("input", *input, "Data CSV (one point per row)")
        ->required();
    cmd->add_option("--k", *k, "Component count")->required();
    cmd->add_option("--seed", *seed, "Initialization seed")->required();
    cmd->add_option("--max-iters", *max_iters, "Iteration cap");
    cmd->add_option("--restarts", *restarts, "Additional restarts");
    cmd->add_option("--tol", *tol, "Log-likelihood tolerance");
    cmd->add_option("--floor", *floor, "Covariance degeneracy floor");
    cmd->add_option("--trace-out", *trace_out,
                    "Optional CSV of the log-likelihood trace");
    cmd->add_option("-o,--output", *output, "Fitted .gmm document")
        ->required();
    cmd->callback([input, output, k, seed, max_iters, restarts, tol, floor,
                   trace_out, argv_copy] {
      ManifestScope manifest(argv_copy, *seed);
      manifest.addInput(*input);
      gmix::Dataset data{readMatrixCsv(*input)};
      const gmix::FitReport report = gmix::emFit(
          data,
          emConfigFromOptions(*k, *max_iters, *restarts, *tol, *floor, *seed));
      gmix::saveGmm(report.model, *output);
      manifest.addOutput(*output);
      if (!trace_out->empty()) {
        std::string out = csvRow({"iteration", "loglik"});
        for (std::size_t i = 0; i < report.logLikTrace.size(); ++i) {
          out +=
              csvRow({std::to_string(i), formatFloat(report.logLikTrace[i])});
        }
        writeTextFile(*trace_out, out);
        manifest.addOutput(*trace_out);
      }
      manifest.write();
      std::cout << fitSummaryCsv(report);
    });
  }

  // ---- select-k ---------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto candidates = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto max_iters = std::make_shared<int>(500);
    auto restarts = std::make_shared<int>(4);
    auto table_out = std::make_shared<std::string>();
    auto model_out = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "select-k", "Score candidate component counts by AIC and BIC");
    cmd->add_option("input", *input, "Data CSV")->required();
    cmd->add_option("--candidates", *candidates,
                    "Candidate counts, e.g. 1,2,3")
        ->required();
    cmd->add_option("--seed", *seed, "Initialization seed")->required();
    cmd->add_option("--max-iters", *max_iters, "Iteration cap");
    cmd->add_option("--restarts", *restarts, "Additional restarts");
    cmd->add_option("--table-out", *table_out, "Per-candidate table CSV");
    cmd->add_option("--model-out", *model_out,
                    "Write the BIC-best model here");
    cmd->callback([input, candidates, seed, max_iters, restarts, table_out,
                   model_out, argv_copy] {
      ManifestScope manifest(argv_copy, *seed);
      manifest.addInput(*input);
      gmix::Dataset data{readMatrixCsv(*input)};
      gmix::EmConfig base =
          emConfigFromOptions(1, *max_iters, *restarts, -1.0, -1.0, *seed);
      const gmix::ModelSelection selection = gmix::selectModel(
          data, parseIntList(*candidates, "--candidates"), base);

      std::string table =
          csvRow({"k", "loglik", "free_params", "aic", "bic", "error"});
      for (const auto& entry : selection.entries) {
        if (entry.report) {
          table += csvRow({std::to_string(entry.k),
                           formatFloat(entry.report->finalLogLik),
                           std::to_string(entry.freeParams),
                           formatFloat(entry.report->aic),
                           formatFloat(entry.report->bic), ""});
        } else {
          table += csvRow({std::to_string(entry.k), "",
                           std::to_string(entry.freeParams), "", "",
                           entry.error});
        }
      }
      std::cout << table;
      std::cout << csvRow(
          {"chosen_aic",
           selection.bestAic
               ? std::to_string(selection.entries[*selection.bestAic].k)
               : ""});
      std::cout << csvRow(
          {"chosen_bic",
           selection.bestBic
               ? std::to_string(selection.entries[*selection.bestBic].k)
               : ""});
      if (!table_out->empty()) {
        writeTextFile(*table_out, table);
        manifest.addOutput(*table_out);
      }
      if (!model_out->empty()) {
        if (!selection.bestBic) {
          throw gmix::NumericError("select-k: every candidate fit failed");
        }
        gmix::saveGmm(selection.entries[*selection.bestBic].report->model,
                      *model_out);
        manifest.addOutput(*model_out);
      }
      manifest.write();
    });
  }

  // ---- device-sim -------------------------------------------------------
  {
    auto curve = std::make_shared<std::string>();
    auto range = std::make_shared<std::vector<double>>();
    auto noise_var = std::make_shared<double>(0.0);
    auto n = std::make_shared<std::uint64_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto output = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "device-sim", "Simulate a measurement device y = f(x) + noise");
    cmd->add_option("--curve", *curve, "Curve expression, e.g. x-0.2*x^2")
        ->required();
    cmd->add_option("--range", *range, "Measurand range: lo hi")
        ->required()
        ->expected(2);
    cmd->add_option("--noise-var", *noise_var, "Noise variance")->required();
    cmd->add_option("--n", *n, "Number of simulated points")->required();
    cmd->add_option("--seed", *seed, "Stream seed")->required();
    cmd->add_option("-o,--output", *output, "Dataset CSV (x,y)")->required();
    cmd->callback([curve, range, noise_var, n, seed, output, argv_copy] {
      ManifestScope manifest(argv_copy, *seed);
      gmix::CurveSpec curve_spec{gmix::parseCurveExpression(*curve), (*range)[0],
                           (*range)[1], *noise_var};
      gmix::SeededStream stream(*seed);
      const gmix::Dataset data = gmix::simulateDevice(curve_spec, *n, stream);
      writeTextFile(*output, datasetCsv(data.points, {"x", "y"}));
      manifest.addOutput(*output);
      manifest.write();
    });
  }

  // ---- device-fit -------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto k = std::make_shared<int>(0);
    auto candidates = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto max_iters = std::make_shared<int>(500);
    auto restarts = std::make_shared<int>(4);
    auto stats_out = std::make_shared<std::string>();
    auto stats_grid = std::make_shared<std::vector<double>>();
    auto* cmd = app.add_subcommand(
        "device-fit", "Fit the joint (x,y) measurement-device mixture");
    cmd->add_option("input", *input, "Device dataset CSV (x,y)")->required();
    cmd->add_option("--k", *k, "Component count");
    cmd->add_option("--candidates", *candidates,
                    "Candidate counts scored by BIC, e.g. 5,10,15");
    cmd->add_option("--seed", *seed, "Initialization seed")->required();
    cmd->add_option("--max-iters", *max_iters, "Iteration cap");
    cmd->add_option("--restarts", *restarts, "Additional restarts");
    cmd->add_option("--stats-out", *stats_out,
                    "Conditional stats CSV (x,mean,variance,flagged)");
    cmd->add_option("--stats-grid", *stats_grid, "Stats grid: lo hi count")
        ->expected(3);
    cmd->add_option("-o,--output", *output, "Joint .gmm document")
        ->required();
    cmd->callback([input, output, k, candidates, seed, max_iters, restarts,
                   stats_out, stats_grid, argv_copy] {
      if ((*k <= 0) == candidates->empty()) {
        throw gmix::ValidationError(
            "device-fit: give exactly one of --k or --candidates");
      }
      ManifestScope manifest(argv_copy, *seed);
      manifest.addInput(*input);
      gmix::Dataset data{readMatrixCsv(*input)};
      gmix::EmConfig base =
          emConfigFromOptions(1, *max_iters, *restarts, -1.0, -1.0, *seed);
      const gmix::MeasurementModel model =
          *k > 0 ? gmix::fitDevice(data, *k, base)
                 : gmix::fitDevice(
                       data, parseIntList(*candidates, "--candidates"), base);
      gmix::saveGmm(model.joint, *output);
      manifest.addOutput(*output);

      if (!stats_out->empty()) {
        if (stats_grid->size() != 3) {
          throw gmix::ValidationError(
              "device-fit: --stats-out needs --stats-grid lo hi count");
        }
        const int count = static_cast<int>((*stats_grid)[2]);
        if (count < 2) {
          throw gmix::ValidationError(
              "device-fit: stats grid needs at least 2 points");
        }
        std::vector<double> grid(count);
        for (int i = 0; i < count; ++i) {
          grid[i] = (*stats_grid)[0] +
                    ((*stats_grid)[1] - (*stats_grid)[0]) * i / (count - 1);
        }
        std::string out = csvRow({"x", "mean", "variance", "flagged"});
        for (const auto& s : gmix::conditionalStats(model, grid)) {
          out += csvRow({formatFloat(s.x), formatFloat(s.mean),
                         formatFloat(s.variance), s.flagged ? "1" : "0"});
        }
        writeTextFile(*stats_out, out);
        manifest.addOutput(*stats_out);
      }
      manifest.write();
      std::cout << fitSummaryCsv(model.fit);
    });
  }

  // ---- posterior --------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto observe = std::make_shared<std::string>();
    auto observable_dims = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "posterior", "Measurand posterior from an observed device reading y*");
    cmd->add_option("input", *input, "Joint .gmm document")->required();
    cmd->add_option("--observe", *observe, "Observed values y*")->required();
    cmd->add_option("--observable-dims", *observable_dims,
                    "Observable dimensions (default: the last dimension)");
    cmd->add_option("-o,--output", *output, "Posterior .gmm document")
        ->required();
    cmd->callback([input, output, observe, observable_dims] {
      const gmix::Gmm joint = gmix::loadGmm(*input);
      std::vector<int> y_dims;
      if (!observable_dims->empty()) {
        y_dims = parseIntList(*observable_dims, "--observable-dims");
      } else {
        y_dims = {static_cast<int>(joint.dim()) - 1};
      }
      std::vector<int> x_dims;
      for (int d = 0; d < joint.dim(); ++d) {
        if (std::find(y_dims.begin(), y_dims.end(), d) == y_dims.end()) {
          x_dims.push_back(d);
        }
      }
      gmix::saveGmm(
          gmix::condition(joint, gmix::BlockIndex(x_dims, y_dims),
                          toVector(parseDoubleList(*observe, "--observe"))),
          *output);
    });
  }

  // ---- product ----------------------------------------------------------
  {
    auto lhs = std::make_shared<std::string>();
    auto rhs = std::make_shared<std::string>();
    auto output = std::make_shared<std::string>();
    auto n_mc = std::make_shared<std::uint64_t>(0);
    auto k = std::make_shared<int>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto max_iters = std::make_shared<int>(100);
    auto restarts = std::make_shared<int>(0);
    auto* cmd = app.add_subcommand(
        "product", "Propagate Z = X * Y by Monte Carlo sampling plus an EM "
                   "fit");
    cmd->add_option("lhs", *lhs, "First 1-D .gmm document")->required();
    cmd->add_option("rhs", *rhs, "Second 1-D .gmm document")->required();
    cmd->add_option("--n-mc", *n_mc, "Monte Carlo sample count")->required();
    cmd->add_option("--k", *k,
                    "Components to fit (default K_X * K_Y heuristic)");
    cmd->add_option("--seed", *seed, "Stream seed")->required();
    cmd->add_option("--max-iters", *max_iters, "EM iteration cap");
    cmd->add_option("--restarts", *restarts, "EM restarts");
    cmd->add_option("-o,--output", *output, "Fitted .gmm document")
        ->required();
    cmd->callback([lhs, rhs, output, n_mc, k, seed, max_iters, restarts,
                   argv_copy] {
      ManifestScope manifest(argv_copy, *seed);
      manifest.addInput(*lhs);
      manifest.addInput(*rhs);
      gmix::SeededStream stream(*seed);
      gmix::EmConfig base =
          emConfigFromOptions(1, *max_iters, *restarts, -1.0, -1.0, *seed);
      const gmix::FitReport report = gmix::propagateProduct(
          gmix::loadGmm(*lhs), gmix::loadGmm(*rhs), *n_mc, *k, base, stream);
      gmix::saveGmm(report.model, *output);
      manifest.addOutput(*output);
      manifest.write();
      std::cout << fitSummaryCsv(report);
    });
  }

  // ---- qc ---------------------------------------------------------------
  {
    auto input = std::make_shared<std::string>();
    auto rect = std::make_shared<std::string>();
    auto n_mc = std::make_shared<std::uint64_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto output = std::make_shared<std::string>();
    auto* cmd = app.add_subcommand(
        "qc", "Probability of the quantity falling in a tolerance region");
    cmd->add_option("input", *input, "Input .gmm document")->required();
    cmd->add_option("--rect", *rect,
                    "Hyperrectangle: per-dim lo,hi pairs separated by ';'")
        ->required();
    cmd->add_option("--n", *n_mc, "Monte Carlo sample count")->required();
    cmd->add_option("--seed", *seed, "Stream seed")->required();
    cmd->add_option("-o,--output", *output, "Result CSV (also printed)");
    cmd->callback([input, rect, n_mc, seed, output, argv_copy] {
      ManifestScope manifest(argv_copy, *seed);
      manifest.addInput(*input);
      const gmix::Gmm g = gmix::loadGmm(*input);
      const Eigen::MatrixXd bounds = parseMatrix(*rect, "--rect");
      if (bounds.cols() != 2) {
        throw gmix::ParseError("--rect: each dimension needs 'lo,hi'");
      }
      const auto region =
          gmix::QualityRegion::hyperrectangle(bounds.col(0), bounds.col(1));
      gmix::SeededStream stream(*seed);
      const gmix::QcEstimate estimate =
          gmix::qcProbability(g, region, *n_mc, stream);
      std::string out = csvRow({"quantity", "value"});
      out += csvRow({"estimate", formatFloat(estimate.estimate)});
      out += csvRow({"standard_error", formatFloat(estimate.standardError)});
      if (estimate.crossCheck) {
        out += csvRow({"cross_check", formatFloat(*estimate.crossCheck)});
      }
      std::cout << out;
      if (!output->empty()) {
        writeTextFile(*output, out);
        manifest.addOutput(*output);
      }
      manifest.write();
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const gmix::ValidationError& e) {
    std::cerr << "gmix: error [validation] " << e.what() << '\n';
    return 2;
  } catch (const gmix::ParseError& e) {
    std::cerr << "gmix: error [parse] " << e.what() << '\n';
    return 3;
  } catch (const gmix::NumericError& e) {
    std::cerr << "gmix: error [numeric] " << e.what() << '\n';
    return 4;
  } catch (const gmix::IoError& e) {
    std::cerr << "gmix: error [io] " << e.what() << '\n';
    return 5;
  }
  return 0;
}
