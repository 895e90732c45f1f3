#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace claimlab {

// Reproducibility record written alongside every artifact output
// (<artifact>.manifest.json): subcommand, resolved config, input/output
// paths with content hashes, seed and tool version.
struct RunManifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // (path, content hash)
  std::vector<std::string> outputs;
  std::string config_json;  // resolved config as a JSON object, "{}" if none

  void add_input(const std::string& path);  // hashes the file
  void write_for(const std::string& artifact_path) const;
};

const char* tool_version();

}  // namespace claimlab
