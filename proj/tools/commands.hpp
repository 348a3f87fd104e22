#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "run_config.hpp"

namespace qdcli {

struct Check {
  std::string name;
  double value = 0.0;
  std::string op;  ///< "<=" or ">="
  double limit = 0.0;

  bool pass() const;
};

/// Everything a command produces before it is written out.
struct CommandResult {
  std::string command;
  std::string tag;  ///< the estimate or identity under test
  std::string csv;  ///< header and rows, without the metadata line
  std::vector<std::pair<std::string, std::string>> extra_csv;  ///< file suffix, body
  nlohmann::json results = nlohmann::json::object();
  std::vector<Check> checks;
  std::optional<std::string> svg;

  bool pass() const;
};

std::string command_tag(const std::string& command);

/// Runs one command (not verify-all) without touching the file system.
CommandResult run_command(const RunConfig& cfg);

/// The reduced configuration that verify-all uses for `command`.
nlohmann::json verify_preset(const std::string& command);

/// Runs, writes <out>/<command>.{csv,json[,svg]} and prints the summary. Returns the exit code:
/// 0 all checks pass, 1 a check failed or a computation broke down, 2 configuration or domain error.
int execute(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace qdcli
