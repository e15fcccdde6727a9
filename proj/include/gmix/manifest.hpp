#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gmix {

/// Replay record written next to the primary output of every stochastic
/// command: rerunning the recorded command with the recorded seed against
/// inputs with matching hashes reproduces the outputs bit-exactly.
struct RunManifest {
  std::vector<std::string> command;
  std::uint64_t seed = 0;
  struct InputHash {
    std::string path;
    std::string fnv1a64;  // hex digest of the file bytes
  };
  std::vector<InputHash> inputs;
  std::vector<std::string> outputs;
  double wallTimeSeconds = 0.0;
};

/// FNV-1a 64-bit digest of a file's bytes. Throws IoError.
std::uint64_t fnv1a64File(const std::string& path);

std::string toHex(std::uint64_t value);

/// Writes the manifest as JSON. Throws IoError.
void writeManifest(const RunManifest& manifest, const std::string& path);

}  // namespace gmix
