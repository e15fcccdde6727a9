#include "gmix/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gmix/errors.hpp"
#include "gmix/kahan.hpp"

namespace gmix {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += kGoldenGamma);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

SeededStream::SeededStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : state_) {
    word = splitmix64(sm);
  }
}

std::uint64_t SeededStream::nextU64() {
  // xoshiro256++ (Blackman & Vigna)
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double SeededStream::nextUniform() {
  ++position_;
  return static_cast<double>(nextU64() >> 11) * 0x1.0p-53;
}

SeededStream SeededStream::split(std::uint64_t stream_index) const {
  return SeededStream(seed_ + (stream_index + 1) * kGoldenGamma);
}

std::pair<double, double> boxMullerTransform(double u, double v) {
  if (u <= 0.0) {
    u = std::numeric_limits<double>::min();
  }
  const double r = std::sqrt(-2.0 * std::log(u));
  const double theta = 2.0 * std::numbers::pi * v;
  return {r * std::cos(theta), r * std::sin(theta)};
}

std::pair<double, double> boxMuller(SeededStream& stream) {
  const double u = stream.nextUniform();
  const double v = stream.nextUniform();
  return boxMullerTransform(u, v);
}

namespace {

Eigen::VectorXd standardNormals(SeededStream& stream, Eigen::Index d) {
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; i += 2) {
    const auto [a, b] = boxMuller(stream);
    z[i] = a;
    if (i + 1 < d) {
      z[i + 1] = b;
    }
    // The spare normal of an odd dimension's last pair is discarded, so the
    // uniform count per draw depends only on d.
  }
  return z;
}

}  // namespace

Eigen::VectorXd sampleGaussian(SeededStream& stream,
                               const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& covariance) {
  auto lower = tryCholesky(0.5 * (covariance + covariance.transpose()));
  if (!lower) {
    throw NumericError(
        "sampleGaussian: covariance factorization failed: not positive "
        "definite");
  }
  return mean + *lower * standardNormals(stream, mean.size());
}

int categoricalIndex(const std::vector<double>& cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) {
    return static_cast<int>(cumulative.size()) - 1;
  }
  return static_cast<int>(it - cumulative.begin());
}

SampleBatch sampleGmm(SeededStream& stream, const Gmm& g, std::size_t n) {
  if (n < 1) {
    throw ValidationError("sampleGmm: sample count must be at least 1");
  }
  const Eigen::Index d = g.dim();
  const int k = g.componentCount();

  std::vector<double> cumulative(k);
  KahanSum acc;
  for (int i = 0; i < k; ++i) {
    acc.add(g.component(i).weight);
    cumulative[i] = acc.value();
  }

  SampleBatch batch;
  batch.points.resize(static_cast<Eigen::Index>(n), d);
  batch.labels.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const int label = categoricalIndex(cumulative, stream.nextUniform());
    batch.labels[s] = label;
    const auto& c = g.component(label);
    const Eigen::VectorXd z = standardNormals(stream, d);
    batch.points.row(static_cast<Eigen::Index>(s)) =
        (c.mean + g.evaluator(label).choleskyFactor() * z).transpose();
  }
  return batch;
}

}  // namespace gmix
