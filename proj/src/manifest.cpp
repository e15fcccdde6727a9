#include "gmix/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "gmix/errors.hpp"

namespace gmix {

std::uint64_t fnv1a64File(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "' for hashing");
  }
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 0x100000001B3ULL;
    }
  }
  if (in.bad()) {
    throw IoError("read failure on '" + path + "'");
  }
  return hash;
}

std::string toHex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

void writeManifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["inputs"] = nlohmann::json::array();
  for (const auto& input : manifest.inputs) {
    j["inputs"].push_back({{"path", input.path}, {"fnv1a64", input.fnv1a64}});
  }
  j["outputs"] = manifest.outputs;
  j["wall_time_seconds"] = manifest.wallTimeSeconds;

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw IoError("write failure on '" + path + "'");
  }
}

}  // namespace gmix
