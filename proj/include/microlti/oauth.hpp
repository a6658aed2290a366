#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace microlti::oauth {

using Parameter = std::pair<std::string, std::string>;
using ParameterList = std::vector<Parameter>;

inline constexpr std::string_view kSignatureMethod = "HMAC-SHA1";
inline constexpr std::string_view kVersion = "1.0";
inline constexpr std::int64_t kDefaultTimestampWindow = 300;

/**
 * A request as seen by the signer: method, normalized base URL and the
 * full parameter multiset (query, form body and oauth_* fields). The
 * oauth_signature pair is never part of it.
 */
struct SignableRequest {
    std::string http_method;
    std::string base_url;
    ParameterList parameters;

    /// Builds a request from a raw URL (query parameters are folded into
    /// the parameter list) and drops any oauth_signature pair.
    static SignableRequest from(std::string_view method, std::string_view url,
                                ParameterList params);

    bool is_well_formed() const;
};

/// RFC 3986 percent-encoding over UTF-8 bytes; only A-Z a-z 0-9 - . _ ~ pass through.
std::string percent_encode(std::string_view raw);

/// Inverse of percent_encode. With `plus_is_space` a '+' decodes to ' '
/// (application/x-www-form-urlencoded). Returns nullopt on a bad escape.
std::optional<std::string> percent_decode(std::string_view encoded, bool plus_is_space = false);

/// Lowercases scheme and host, drops default ports, query and fragment.
std::string normalize_base_url(std::string_view url);

/// Query string of `url` as decoded pairs (empty when there is none).
ParameterList query_parameters(std::string_view url);

std::string signature_base_string(const SignableRequest& req);

std::string hmac_sha1_sign(std::string_view base_string, std::string_view consumer_secret,
                           std::string_view token_secret = {});

/// signature_base_string + hmac_sha1_sign with an empty token secret.
std::string sign(const SignableRequest& req, std::string_view consumer_secret);

/// Constant-time in the length of the presented signature.
bool verify_signature(const SignableRequest& req, std::string_view presented_signature,
                      std::string_view consumer_secret);

/// base64(SHA-1(body)), the oauth_body_hash value.
std::string body_hash(std::string_view body);

bool check_timestamp(std::int64_t ts, std::int64_t now, std::int64_t window);

bool constant_time_equals(std::string_view a, std::string_view b);

std::string base64_encode(std::span<const unsigned char> bytes);

/// Hex encoding of `bytes` bytes drawn from the OpenSSL CSPRNG.
std::string random_hex(std::size_t bytes);

/// 32 hex characters (128 bits).
std::string generate_nonce();

/// Parses "OAuth k1="v1", k2="v2"" into decoded pairs. The realm parameter is dropped.
std::optional<ParameterList> parse_authorization_header(std::string_view header);

/// Formats oauth_* pairs (including oauth_signature) as an Authorization header value.
std::string authorization_header(const ParameterList& oauth_params);

/// application/x-www-form-urlencoded body → pairs in received order.
std::optional<ParameterList> parse_form(std::string_view body);

/// Serializes pairs with percent_encode; inverse of parse_form up to '+' handling.
std::string encode_form(const ParameterList& params);

/// First value for `name`, if any.
std::optional<std::string> find_parameter(const ParameterList& params, std::string_view name);

enum class NonceResult { accepted, replay };

/**
 * (consumer_key, nonce) pairs seen within the retention horizon. The
 * check-then-insert is atomic. Records are evicted lazily on insert once
 * they are older than twice the timestamp window, measured against the
 * newest timestamp seen: anything evicted would fail the window check.
 */
class NonceStore {
public:
    explicit NonceStore(std::int64_t timestamp_window = kDefaultTimestampWindow);

    NonceResult check_and_store(const std::string& consumer_key, const std::string& nonce,
                                std::int64_t ts);

    bool contains(const std::string& consumer_key, const std::string& nonce) const;

    std::size_t size() const;

    std::int64_t retention() const { return retention_; }

private:
    void evict_locked();

    std::int64_t retention_;
    std::int64_t newest_ = 0;
    mutable std::mutex mutex_;
    std::set<std::pair<std::string, std::string>> seen_;
    std::multimap<std::int64_t, std::pair<std::string, std::string>> by_time_;
};

}  // namespace microlti::oauth
