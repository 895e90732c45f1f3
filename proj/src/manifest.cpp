#include "claimlab/manifest.hpp"

#include <chrono>

#include <json.hpp>

#include "claimlab/io.hpp"

namespace claimlab {

#ifndef CLAIMLAB_VERSION
#define CLAIMLAB_VERSION "0.0.0"
#endif

const char* tool_version() { return CLAIMLAB_VERSION; }

void RunManifest::add_input(const std::string& path) {
  inputs.emplace_back(path, io::hex64(io::hash_file(path)));
}

void RunManifest::write_for(const std::string& artifact_path) const {
  nlohmann::json in = nlohmann::json::array();
  for (const auto& [path, hash] : inputs) {
    in.push_back({{"path", path}, {"hash", hash}});
  }
  nlohmann::json config = nlohmann::json::parse(config_json, nullptr, false);
  if (config.is_discarded()) config = nlohmann::json::object();
  const auto now = std::chrono::system_clock::now();
  nlohmann::json obj = {
      {"subcommand", subcommand},
      {"version", tool_version()},
      {"seed", seed},
      {"jobs", jobs},
      {"inputs", in},
      {"outputs", outputs},
      {"config", config},
      {"created_utc",
       std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()},
  };
  io::atomic_write(artifact_path + ".manifest.json", obj.dump(2) + "\n");
}

}  // namespace claimlab
