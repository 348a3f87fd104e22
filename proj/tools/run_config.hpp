#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace qdcli {

inline constexpr const char* kSchema = "v1";
inline constexpr const char* kVersion = QDLAB_VERSION;

const std::vector<std::string>& command_names();
std::string command_description(const std::string& command);

/// Every parameter a command accepts, with its default value.
nlohmann::json command_defaults(const std::string& command);

struct RunConfig {
  std::string command;
  nlohmann::json params;  ///< defaults overlaid with the config file
  std::uint64_t seed = 1;
  std::string out = "out";
  bool svg = false;
  int threads = 1;

  /// FNV-1a of the canonical form of (schema, command, params, seed). Output location,
  /// plotting and thread count do not enter.
  std::string hash() const;
};

/// Command-line values; they win over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<bool> svg;
  std::optional<int> threads;
};

/// Validates `file` against the schema of `command`: unknown keys and type mismatches throw
/// qdlab::ConfigError.
RunConfig make_config(const std::string& command, const nlohmann::json& file, const Overrides& o = {});
RunConfig load_config(const std::string& command, const std::optional<std::string>& path, const Overrides& o = {});

std::string fnv1a_hex(const std::string& bytes);

}  // namespace qdcli
