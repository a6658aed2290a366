#include "microlti/oauth.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace microlti::oauth {

namespace {

constexpr char kHexDigits[] = "0123456789ABCDEF";

bool is_unreserved(unsigned char c)
{
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '-' || c == '.' || c == '_' || c == '~';
}

int hex_value(char c)
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

}  // namespace

SignableRequest SignableRequest::from(std::string_view method, std::string_view url,
                                      ParameterList params)
{
    SignableRequest req;
    req.http_method = std::string(method);
    std::transform(req.http_method.begin(), req.http_method.end(), req.http_method.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    req.base_url = normalize_base_url(url);
    req.parameters = query_parameters(url);
    for (auto& p : params) {
        if (p.first != "oauth_signature") req.parameters.push_back(std::move(p));
    }
    return req;
}

bool SignableRequest::is_well_formed() const
{
    if (http_method.empty()) return false;
    if (!std::all_of(http_method.begin(), http_method.end(),
                     [](char c) { return c >= 'A' && c <= 'Z'; }))
        return false;
    if (base_url != normalize_base_url(base_url)) return false;
    return std::none_of(parameters.begin(), parameters.end(),
                        [](const Parameter& p) { return p.first == "oauth_signature"; });
}

std::string percent_encode(std::string_view raw)
{
    std::string out;
    out.reserve(raw.size() * 3);
    for (unsigned char c : raw) {
        if (is_unreserved(c)) {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHexDigits[c >> 4]);
            out.push_back(kHexDigits[c & 0x0F]);
        }
    }
    return out;
}

std::optional<std::string> percent_decode(std::string_view encoded, bool plus_is_space)
{
    std::string out;
    out.reserve(encoded.size());
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        char c = encoded[i];
        if (c == '%') {
            if (i + 2 >= encoded.size()) return std::nullopt;
            int hi = hex_value(encoded[i + 1]);
            int lo = hex_value(encoded[i + 2]);
            if (hi < 0 || lo < 0) return std::nullopt;
            out.push_back(static_cast<char>((hi << 4) | lo));
            i += 2;
        } else if (c == '+' && plus_is_space) {
            out.push_back(' ');
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string normalize_base_url(std::string_view url)
{
    auto cut = url.find_first_of("?#");
    if (cut != std::string_view::npos) url = url.substr(0, cut);

    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) return std::string(url);
    std::string scheme = to_lower(url.substr(0, scheme_end));
    std::string_view rest = url.substr(scheme_end + 3);

    auto path_start = rest.find('/');
    std::string_view authority = rest.substr(0, path_start);
    std::string_view path = path_start == std::string_view::npos ? "/" : rest.substr(path_start);

    if (auto at = authority.rfind('@'); at != std::string_view::npos)
        authority = authority.substr(at + 1);

    std::string host;
    std::string port;
    if (auto colon = authority.rfind(':');
        colon != std::string_view::npos && authority.find(']', colon) == std::string_view::npos) {
        host = to_lower(authority.substr(0, colon));
        port = std::string(authority.substr(colon + 1));
    } else {
        host = to_lower(authority);
    }
    if ((scheme == "http" && port == "80") || (scheme == "https" && port == "443")) port.clear();

    std::string out = scheme + "://" + host;
    if (!port.empty()) out += ":" + port;
    out += path;
    return out;
}

ParameterList query_parameters(std::string_view url)
{
    auto q = url.find('?');
    if (q == std::string_view::npos) return {};
    std::string_view query = url.substr(q + 1);
    if (auto hash = query.find('#'); hash != std::string_view::npos) query = query.substr(0, hash);
    auto parsed = parse_form(query);
    return parsed ? *parsed : ParameterList{};
}

std::string signature_base_string(const SignableRequest& req)
{
    std::vector<std::pair<std::string, std::string>> encoded;
    encoded.reserve(req.parameters.size());
    for (const auto& [name, value] : req.parameters) {
        if (name == "oauth_signature") continue;
        encoded.emplace_back(percent_encode(name), percent_encode(value));
    }
    std::sort(encoded.begin(), encoded.end());

    std::string normalized;
    for (const auto& [name, value] : encoded) {
        if (!normalized.empty()) normalized += '&';
        normalized += name;
        normalized += '=';
        normalized += value;
    }

    std::string base = req.http_method;
    base += '&';
    base += percent_encode(req.base_url);
    base += '&';
    base += percent_encode(normalized);
    return base;
}

std::string hmac_sha1_sign(std::string_view base_string, std::string_view consumer_secret,
                           std::string_view token_secret)
{
    const std::string key = percent_encode(consumer_secret) + "&" + percent_encode(token_secret);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    HMAC(EVP_sha1(), key.data(), static_cast<int>(key.size()),
         reinterpret_cast<const unsigned char*>(base_string.data()), base_string.size(), digest,
         &digest_len);
    return base64_encode({digest, digest_len});
}

std::string sign(const SignableRequest& req, std::string_view consumer_secret)
{
    return hmac_sha1_sign(signature_base_string(req), consumer_secret);
}

bool verify_signature(const SignableRequest& req, std::string_view presented_signature,
                      std::string_view consumer_secret)
{
    return constant_time_equals(sign(req, consumer_secret), presented_signature);
}

std::string body_hash(std::string_view body)
{
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(body.data()), body.size(), digest);
    return base64_encode(digest);
}

bool check_timestamp(std::int64_t ts, std::int64_t now, std::int64_t window)
{
    const std::int64_t skew = now >= ts ? now - ts : ts - now;
    return skew <= window;
}

bool constant_time_equals(std::string_view expected, std::string_view presented)
{
    // Loop runs over the presented value so timing depends only on its length.
    unsigned char diff = expected.size() == presented.size() ? 0 : 1;
    for (std::size_t i = 0; i < presented.size(); ++i) {
        unsigned char e = i < expected.size() ? static_cast<unsigned char>(expected[i]) : 0;
        diff |= e ^ static_cast<unsigned char>(presented[i]);
    }
    return diff == 0;
}

std::string base64_encode(std::span<const unsigned char> bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                            static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string random_hex(std::size_t bytes)
{
    std::vector<unsigned char> buf(bytes);
    if (RAND_bytes(buf.data(), static_cast<int>(buf.size())) != 1)
        throw std::runtime_error("RAND_bytes failed");
    std::string out;
    out.reserve(bytes * 2);
    static constexpr char lower_hex[] = "0123456789abcdef";
    for (unsigned char b : buf) {
        out.push_back(lower_hex[b >> 4]);
        out.push_back(lower_hex[b & 0x0F]);
    }
    return out;
}

std::string generate_nonce()
{
    return random_hex(16);
}

std::optional<ParameterList> parse_authorization_header(std::string_view header)
{
    header = trim(header);
    if (header.size() < 6 || to_lower(header.substr(0, 6)) != "oauth ") return std::nullopt;
    std::string_view rest = header.substr(6);

    ParameterList out;
    while (true) {
        rest = trim(rest);
        if (rest.empty()) break;
        auto eq = rest.find('=');
        if (eq == std::string_view::npos) return std::nullopt;
        std::string_view name = trim(rest.substr(0, eq));
        rest = trim(rest.substr(eq + 1));
        if (rest.empty() || rest.front() != '"') return std::nullopt;
        auto close = rest.find('"', 1);
        if (close == std::string_view::npos) return std::nullopt;
        auto value = percent_decode(rest.substr(1, close - 1));
        auto decoded_name = percent_decode(name);
        if (!value || !decoded_name) return std::nullopt;
        if (*decoded_name != "realm") out.emplace_back(std::move(*decoded_name), std::move(*value));
        rest = trim(rest.substr(close + 1));
        if (rest.empty()) break;
        if (rest.front() != ',') return std::nullopt;
        rest.remove_prefix(1);
    }
    return out;
}

std::string authorization_header(const ParameterList& oauth_params)
{
    std::string out = "OAuth ";
    bool first = true;
    for (const auto& [name, value] : oauth_params) {
        if (!first) out += ", ";
        first = false;
        out += percent_encode(name);
        out += "=\"";
        out += percent_encode(value);
        out += '"';
    }
    return out;
}

std::optional<ParameterList> parse_form(std::string_view body)
{
    ParameterList out;
    while (!body.empty()) {
        auto amp = body.find('&');
        std::string_view pair = body.substr(0, amp);
        body = amp == std::string_view::npos ? std::string_view{} : body.substr(amp + 1);
        if (pair.empty()) continue;
        auto eq = pair.find('=');
        auto name = percent_decode(pair.substr(0, eq), true);
        auto value = eq == std::string_view::npos ? std::optional<std::string>{""}
                                                  : percent_decode(pair.substr(eq + 1), true);
        if (!name || !value) return std::nullopt;
        out.emplace_back(std::move(*name), std::move(*value));
    }
    return out;
}

std::string encode_form(const ParameterList& params)
{
    std::string out;
    for (const auto& [name, value] : params) {
        if (!out.empty()) out += '&';
        out += percent_encode(name);
        out += '=';
        out += percent_encode(value);
    }
    return out;
}

std::optional<std::string> find_parameter(const ParameterList& params, std::string_view name)
{
    for (const auto& [n, v] : params) {
        if (n == name) return v;
    }
    return std::nullopt;
}

NonceStore::NonceStore(std::int64_t timestamp_window) : retention_(2 * timestamp_window)
{
    if (timestamp_window <= 0) throw std::invalid_argument("timestamp window must be positive");
}

NonceResult NonceStore::check_and_store(const std::string& consumer_key, const std::string& nonce,
                                        std::int64_t ts)
{
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(consumer_key, nonce);
    if (seen_.contains(key)) return NonceResult::replay;
    newest_ = std::max(newest_, ts);
    evict_locked();
    seen_.insert(key);
    by_time_.emplace(ts, std::move(key));
    return NonceResult::accepted;
}

bool NonceStore::contains(const std::string& consumer_key, const std::string& nonce) const
{
    std::lock_guard lock(mutex_);
    return seen_.contains({consumer_key, nonce});
}

std::size_t NonceStore::size() const
{
    std::lock_guard lock(mutex_);
    return seen_.size();
}

void NonceStore::evict_locked()
{
    const std::int64_t horizon = newest_ - retention_;
    auto end = by_time_.lower_bound(horizon);
    for (auto it = by_time_.begin(); it != end; ++it) seen_.erase(it->second);
    by_time_.erase(by_time_.begin(), end);
}

}  // namespace microlti::oauth
