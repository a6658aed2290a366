#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace microlti {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ServiceConfig {
    std::string listen = "127.0.0.1:8080";
    std::filesystem::path storage_path = "microlti-data";
    std::int64_t timestamp_window = 300;
    std::int64_t session_ttl = 3600;
    std::map<std::string, std::string> authoring_tokens;  // professor → bearer token
    std::string external_base_url;                        // defaults to http://<listen>
    std::optional<std::filesystem::path> player_dir;      // static player assets
    int outcome_timeout_seconds = 10;

    std::string base_url() const;
    std::filesystem::path content_path() const { return storage_path / "content"; }
    std::filesystem::path consumers_path() const { return storage_path / "consumers.json"; }

    /// Throws ConfigError when an invariant does not hold.
    void validate() const;
};

/**
 * `key = value` lines, `#` comments. Keys: listen, storage_path,
 * timestamp_window, session_ttl, external_base_url, player_dir,
 * outcome_timeout, authoring_token.<professor>.
 */
void apply_config_text(ServiceConfig& cfg, std::string_view text);

ServiceConfig load_config_file(const std::filesystem::path& path);

/// MICROLTI_<KEY> overrides, key upper-cased with '.' → '_'
/// (MICROLTI_AUTHORING_TOKEN_ALICE sets authoring_token.alice).
void apply_environment(ServiceConfig& cfg, const std::map<std::string, std::string>& env);

/// MICROLTI_* variables from the process environment.
std::map<std::string, std::string> microlti_environment();

/// "host:port" → (host, port). Throws ConfigError.
std::pair<std::string, int> split_listen_address(std::string_view listen);

}  // namespace microlti
