#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gmix/gmm.hpp"

namespace gmix {

/// Deterministic uniform stream: xoshiro256++ seeded through splitmix64.
/// The same seed produces the same bit-exact sequence on every platform.
/// Uniform doubles are (next() >> 11) * 2^-53, i.e. the 2^53 grid on [0, 1).
///
/// A stream is single-owner; parallel consumers must use split(), which
/// derives an independent stream by reseeding splitmix64 with
/// seed + (index + 1) * 0x9E3779B97F4A7C15 (the 64-bit golden ratio).
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed);

  std::uint64_t nextU64();
  /// Uniform double in [0, 1).
  double nextUniform();
  /// Independent stream number `stream_index` derived from this stream's
  /// seed. Does not advance this stream.
  SeededStream split(std::uint64_t stream_index) const;

  std::uint64_t seed() const { return seed_; }
  /// Count of uniform draws consumed so far.
  std::uint64_t position() const { return position_; }

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
  std::uint64_t position_ = 0;
};

/// Box-Muller transform of two uniforms: R = sqrt(-2 log u), Theta = 2 pi v,
/// output (R cos Theta, R sin Theta). u = 0 is remapped to the smallest
/// positive normal double so the log stays finite.
std::pair<double, double> boxMullerTransform(double u, double v);

/// Draws one pair of independent standard normals, consuming exactly two
/// uniforms.
std::pair<double, double> boxMuller(SeededStream& stream);

/// One draw of N(mean, covariance): m + L z with L the lower Cholesky
/// factor and z standard normal via Box-Muller. Odd dimensions discard the
/// spare normal of the last pair, so the draw consumes 2*ceil(d/2)
/// uniforms. Throws NumericError when the factorization fails.
Eigen::VectorXd sampleGaussian(SeededStream& stream,
                               const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& covariance);

struct SampleBatch {
  Eigen::MatrixXd points;   // n x d, one draw per row
  std::vector<int> labels;  // chosen component index per draw
};

/// Composition sampling: per draw, one uniform picks the component by
/// cumulative-weight inversion, then the component Gaussian is sampled.
SampleBatch sampleGmm(SeededStream& stream, const Gmm& g, std::size_t n);

/// Cumulative-weight inversion: smallest i with u < cumulative[i]. A u that
/// lands exactly on a cumulative edge selects the higher-index component;
/// u at or beyond the final edge clamps to the last component.
int categoricalIndex(const std::vector<double>& cumulative, double u);

}  // namespace gmix
