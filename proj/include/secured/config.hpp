#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "secured/sim.hpp"

namespace secured {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what);
  int line;
};

/// A run description loaded from a `key = value` file whose first
/// non-comment line is `secured-config 1`.
struct RunConfig {
  SystemConfig system;
  std::array<std::optional<std::string>, 2> apps;  // assembly sources, per core
  std::string trace_path;                          // empty: no trace file
};

RunConfig parse_run_config(std::string_view text, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);
std::string format_run_config(const RunConfig& cfg);

}  // namespace secured
