#pragma once

#include "vizbridge/json_util.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace vizbridge {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ServerConfig {
    std::string backend = "mock";  // "mock" or "paraview"
    std::string pvserver_url;      // host:port, required iff backend == paraview
    std::filesystem::path screenshot_dir = "./screenshots";
    std::filesystem::path log_path;  // empty: log to stderr
    std::string mock_dataset;        // optional field-spec JSON path to preload
};

/// Values taken from CLI flags; unset fields fall through to environment
/// variables (VIZBRIDGE_*), then the config file, then defaults.
struct ConfigOverrides {
    std::optional<std::string> backend;
    std::optional<std::string> pvserver_url;
    std::optional<std::string> screenshot_dir;
    std::optional<std::string> log_path;
    std::optional<std::string> mock_dataset;
    std::optional<std::string> config_file;
};

/// Merges flag > environment > config file > default and validates the
/// result. Throws ConfigError on contradictions (exit code 2 territory).
ServerConfig resolve_config(const ConfigOverrides& flags);

/// Splits "host:port"; throws ConfigError on malformed input.
std::pair<std::string, int> parse_host_port(const std::string& url);

} // namespace vizbridge
