#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sgdd::tool {

std::string sha256_file_hex(const std::string& path);

// Provenance record written next to every command's outputs: tool version,
// seed, and SHA-256 of each input and produced artifact, so results can be
// verified byte-for-byte later. Timing lives here (and only here); the
// scientific outputs stay deterministic.
struct Manifest {
  std::string command;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256
  double wall_clock_s = 0.0;
};

void write_manifest(const Manifest& m, const std::string& path);

}  // namespace sgdd::tool
