#include "vizbridge/config.hpp"

#include <cstdlib>
#include <fstream>

namespace vizbridge {

namespace {

std::optional<std::string> env_value(const char* name)
{
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0')
        return std::nullopt;
    return std::string(v);
}

/// flag > env > file > fallback
std::string pick(const std::optional<std::string>& flag, const char* env_name,
                 const json& file, const char* file_key, const std::string& fallback)
{
    if (flag)
        return *flag;
    if (auto e = env_value(env_name))
        return *e;
    if (file.is_object() && file.contains(file_key) && file[file_key].is_string())
        return file[file_key].get<std::string>();
    return fallback;
}

} // namespace

std::pair<std::string, int> parse_host_port(const std::string& url)
{
    const auto colon = url.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= url.size())
        throw ConfigError("pvserver url must be host:port, got '" + url + "'");
    const std::string host = url.substr(0, colon);
    int port = 0;
    for (char c : url.substr(colon + 1)) {
        if (c < '0' || c > '9')
            throw ConfigError("pvserver url must be host:port, got '" + url + "'");
        port = port * 10 + (c - '0');
    }
    if (port <= 0 || port > 65535)
        throw ConfigError("pvserver port out of range in '" + url + "'");
    return {host, port};
}

ServerConfig resolve_config(const ConfigOverrides& flags)
{
    json file = json::object();
    std::optional<std::string> config_path = flags.config_file;
    if (!config_path)
        config_path = env_value("VIZBRIDGE_CONFIG");
    if (config_path) {
        std::ifstream in(*config_path);
        if (!in)
            throw ConfigError("cannot open config file " + *config_path);
        try {
            in >> file;
        } catch (const json::exception& e) {
            throw ConfigError("config file " + *config_path + " is not valid JSON: " + e.what());
        }
        if (!file.is_object())
            throw ConfigError("config file " + *config_path + " must hold a JSON object");
    }

    ServerConfig config;
    config.backend = pick(flags.backend, "VIZBRIDGE_BACKEND", file, "backend", "mock");
    config.pvserver_url =
        pick(flags.pvserver_url, "VIZBRIDGE_PVSERVER_URL", file, "pvserver_url", "");
    config.screenshot_dir = pick(flags.screenshot_dir, "VIZBRIDGE_SCREENSHOT_DIR", file,
                                 "screenshot_dir", "./screenshots");
    config.log_path = pick(flags.log_path, "VIZBRIDGE_LOG", file, "log_path", "");
    config.mock_dataset =
        pick(flags.mock_dataset, "VIZBRIDGE_MOCK_DATASET", file, "mock_dataset", "");

    if (config.backend != "mock" && config.backend != "paraview")
        throw ConfigError("backend must be 'mock' or 'paraview', got '" + config.backend + "'");
    if (config.backend == "paraview") {
        if (config.pvserver_url.empty())
            throw ConfigError("backend 'paraview' requires --pvserver-url host:port");
        parse_host_port(config.pvserver_url);  // validate shape now
    }
    return config;
}

} // namespace vizbridge
