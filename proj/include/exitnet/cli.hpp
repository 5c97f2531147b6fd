#pragma once

#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace exitnet::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kUsageError = 2;

// Environment variable naming the default output root.
inline constexpr const char* kOutEnv = "EXITNET_OUT";

// Bad flags, bad config values or missing required inputs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key -> value view of every setting a command understands.
using Settings = std::map<std::string, std::string>;

// Built-in defaults for every key.
const Settings& default_settings();

// Parses a flat key = value file (INI/TOML style; [sections] are accepted and
// ignored, list values are joined with commas).
Settings read_config_file(const std::string& path);

// key = "value" lines, sorted by key; read_config_file(write) round-trips.
std::string format_settings(const Settings& s, const std::string& command);

// Runs one command line. argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace exitnet::cli
