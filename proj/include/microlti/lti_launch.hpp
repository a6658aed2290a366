#pragma once

#include "microlti/oauth.hpp"
#include "microlti/repository.hpp"

#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace microlti::lti {

inline constexpr std::string_view kMessageType = "basic-lti-launch-request";
inline constexpr std::string_view kLtiVersion = "LTI-1p0";
inline constexpr std::string_view kCallback = "about:blank";
inline constexpr std::int64_t kDefaultSessionTtl = 3600;

struct ConsumerCredential {
    std::string consumer_key;
    std::string shared_secret;
    std::string lms_name;
    bool enabled = true;
    std::int64_t created_at = 0;

    bool operator==(const ConsumerCredential&) const = default;
};

class ConsumerError : public std::runtime_error {
public:
    enum class Kind { duplicate_key, invalid, not_found };

    ConsumerError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/**
 * The LMSs allowed to launch. Reads run concurrently; registrations are
 * serialized. With a backing file every change is written through.
 */
class ConsumerRegistry {
public:
    ConsumerRegistry() = default;
    explicit ConsumerRegistry(std::filesystem::path file);

    ConsumerCredential register_consumer(const std::string& key, const std::string& secret,
                                         const std::string& lms_name, std::int64_t now);

    std::optional<ConsumerCredential> find(const std::string& key) const;

    void set_enabled(const std::string& key, bool enabled);

    std::vector<ConsumerCredential> list() const;

private:
    void save_locked() const;

    std::optional<std::filesystem::path> file_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, ConsumerCredential> consumers_;
};

/// The received launch POST. Absent fields are empty / nullopt; validation
/// decides what that means.
struct LaunchRequest {
    std::string http_method;
    std::string launch_url;

    std::string oauth_consumer_key;
    std::string oauth_signature;
    std::string oauth_signature_method;
    std::string oauth_timestamp;
    std::string oauth_nonce;
    std::string oauth_version;
    std::string oauth_callback;

    std::string lti_message_type;
    std::string lti_version;
    std::string resource_link_id;

    std::optional<std::string> user_id;
    std::optional<std::string> roles;
    std::optional<std::string> resource_link_title;
    std::optional<std::string> lis_result_sourcedid;
    std::optional<std::string> lis_outcome_service_url;
    std::optional<std::string> custom_content_id;

    oauth::ParameterList all_parameters;

    static LaunchRequest from_form(std::string_view method, std::string_view launch_url,
                                   oauth::ParameterList params);

    /// Names of required oauth_* / LTI fields that were not received.
    std::vector<std::string> missing_required() const;

    oauth::SignableRequest signable() const;
};

enum class RejectReason {
    not_post,
    bad_message_type,
    bad_version,
    missing_resource_link,
    unknown_consumer,
    bad_callback,
    bad_oauth_version,
    stale_timestamp,
    replayed_nonce,
    bad_signature,
    unknown_content,
};

std::string_view to_string(RejectReason reason);

struct Rejection {
    std::vector<RejectReason> reasons;

    bool contains(RejectReason r) const;
    /// One reason per line.
    std::string to_text() const;
};

struct Session {
    std::string token;
    std::string consumer_key;
    std::optional<std::string> user_id;
    std::optional<std::string> roles;
    std::string resource_link_id;
    std::string content_id;
    std::optional<std::string> result_sourcedid;
    std::optional<std::string> outcome_service_url;
    std::int64_t issued_at = 0;
    std::int64_t ttl = kDefaultSessionTtl;

    bool expired(std::int64_t now) const { return now > issued_at + ttl; }
    bool has_outcome_routing() const
    {
        return result_sourcedid && !result_sourcedid->empty() && outcome_service_url &&
               !outcome_service_url->empty();
    }
};

using LaunchResult = std::variant<Session, Rejection>;

/// 192 bits from the CSPRNG, hex encoded.
std::string generate_session_token();

/// Live sessions by token. Expired sessions are never returned.
class SessionStore {
public:
    explicit SessionStore(std::int64_t ttl = kDefaultSessionTtl);

    /// Assigns token, issued_at and ttl, then stores the session.
    Session issue(Session session, std::int64_t now);

    std::optional<Session> find(const std::string& token, std::int64_t now) const;

    std::size_t purge_expired(std::int64_t now);
    std::size_t size() const;
    std::int64_t ttl() const { return ttl_; }

private:
    std::int64_t ttl_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, Session> sessions_;
};

/// custom_content_id when present, otherwise the last path segment of the
/// launch URL; nullopt unless the repository holds that id.
std::optional<std::string> resolve_content(const LaunchRequest& req,
                                           const content::ContentRepository& repo);

/**
 * The launching phase. Every check is evaluated so the rejection lists all
 * failures. The nonce is consumed only when every other check passed, so
 * garbage requests cannot burn nonces.
 */
class LaunchValidator {
public:
    LaunchValidator(const ConsumerRegistry& registry, const content::ContentRepository& repo,
                    oauth::NonceStore& nonces, SessionStore& sessions,
                    std::int64_t timestamp_window = oauth::kDefaultTimestampWindow);

    LaunchResult validate_launch(const LaunchRequest& req, std::int64_t now);

private:
    const ConsumerRegistry& registry_;
    const content::ContentRepository& repo_;
    oauth::NonceStore& nonces_;
    SessionStore& sessions_;
    std::int64_t window_;
};

}  // namespace microlti::lti
