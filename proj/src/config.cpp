#include "microlti/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

extern char** environ;

namespace microlti {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::int64_t to_int(std::string_view key, std::string_view value)
{
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("'" + std::string(key) + "' must be an integer, got '" +
                          std::string(value) + "'");
    return out;
}

void set_key(ServiceConfig& cfg, const std::string& key, const std::string& value)
{
    static constexpr std::string_view token_prefix = "authoring_token.";
    if (key == "listen") {
        cfg.listen = value;
    } else if (key == "storage_path") {
        cfg.storage_path = value;
    } else if (key == "timestamp_window") {
        cfg.timestamp_window = to_int(key, value);
    } else if (key == "session_ttl") {
        cfg.session_ttl = to_int(key, value);
    } else if (key == "external_base_url") {
        cfg.external_base_url = value;
    } else if (key == "player_dir") {
        cfg.player_dir = value;
    } else if (key == "outcome_timeout") {
        cfg.outcome_timeout_seconds = static_cast<int>(to_int(key, value));
    } else if (key.starts_with(token_prefix) && key.size() > token_prefix.size()) {
        cfg.authoring_tokens[key.substr(token_prefix.size())] = value;
    } else {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
}

}  // namespace

std::string ServiceConfig::base_url() const
{
    std::string url = external_base_url.empty() ? "http://" + listen : external_base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    return url;
}

void ServiceConfig::validate() const
{
    if (timestamp_window <= 0) throw ConfigError("timestamp_window must be positive");
    if (session_ttl <= 0) throw ConfigError("session_ttl must be positive");
    if (outcome_timeout_seconds <= 0) throw ConfigError("outcome_timeout must be positive");
    split_listen_address(listen);
    for (const auto& [name, token] : authoring_tokens) {
        if (token.empty()) throw ConfigError("authoring token for '" + name + "' is empty");
    }
}

void apply_config_text(ServiceConfig& cfg, std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view l = trim(line);
        if (l.empty() || l.front() == '#') continue;
        auto eq = l.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        set_key(cfg, std::string(trim(l.substr(0, eq))), std::string(trim(l.substr(eq + 1))));
    }
}

ServiceConfig load_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    ServiceConfig cfg;
    apply_config_text(cfg, ss.str());
    return cfg;
}

void apply_environment(ServiceConfig& cfg, const std::map<std::string, std::string>& env)
{
    static constexpr std::string_view prefix = "MICROLTI_";
    static constexpr std::string_view token_prefix = "AUTHORING_TOKEN_";
    for (const auto& [name, value] : env) {
        if (!std::string_view(name).starts_with(prefix)) continue;
        std::string key = name.substr(prefix.size());
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (std::string_view(name).substr(prefix.size()).starts_with(token_prefix))
            key = "authoring_token." + key.substr(token_prefix.size());
        set_key(cfg, key, value);
    }
}

std::map<std::string, std::string> microlti_environment()
{
    std::map<std::string, std::string> env;
    for (char** e = environ; e && *e; ++e) {
        std::string_view entry(*e);
        if (!entry.starts_with("MICROLTI_")) continue;
        auto eq = entry.find('=');
        if (eq == std::string_view::npos) continue;
        env.emplace(std::string(entry.substr(0, eq)), std::string(entry.substr(eq + 1)));
    }
    return env;
}

std::pair<std::string, int> split_listen_address(std::string_view listen)
{
    auto colon = listen.rfind(':');
    if (colon == std::string_view::npos || colon == 0)
        throw ConfigError("listen address must be host:port, got '" + std::string(listen) + "'");
    std::string host(listen.substr(0, colon));
    if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    std::string_view port_text = listen.substr(colon + 1);
    int port = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535)
        throw ConfigError("bad port in listen address '" + std::string(listen) + "'");
    return {host, port};
}

}  // namespace microlti
