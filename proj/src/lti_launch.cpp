#include "microlti/lti_launch.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <sstream>

namespace microlti::lti {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kRequiredFields[] = {
    "oauth_consumer_key", "oauth_signature",  "oauth_signature_method", "oauth_timestamp",
    "oauth_nonce",        "oauth_version",    "oauth_callback",         "lti_message_type",
    "lti_version",        "resource_link_id",
};

std::optional<std::int64_t> parse_timestamp(std::string_view text)
{
    if (text.empty() || text.size() > 18) return std::nullopt;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0) return std::nullopt;
    return value;
}

json credential_to_json(const ConsumerCredential& c)
{
    return json{{"consumer_key", c.consumer_key}, {"shared_secret", c.shared_secret},
                {"lms_name", c.lms_name},         {"enabled", c.enabled},
                {"created_at", c.created_at}};
}

ConsumerCredential credential_from_json(const json& j)
{
    ConsumerCredential c;
    j.at("consumer_key").get_to(c.consumer_key);
    j.at("shared_secret").get_to(c.shared_secret);
    c.lms_name = j.value("lms_name", "");
    c.enabled = j.value("enabled", true);
    c.created_at = j.value("created_at", std::int64_t{0});
    return c;
}

std::string last_path_segment(std::string_view url)
{
    if (auto cut = url.find_first_of("?#"); cut != std::string_view::npos) url = url.substr(0, cut);
    while (!url.empty() && url.back() == '/') url.remove_suffix(1);
    auto slash = url.rfind('/');
    std::string_view seg = slash == std::string_view::npos ? url : url.substr(slash + 1);
    auto decoded = oauth::percent_decode(seg);
    return decoded ? *decoded : std::string{};
}

}  // namespace

// ---- registry -----------------------------------------------------------

ConsumerRegistry::ConsumerRegistry(fs::path file) : file_(std::move(file))
{
    if (!fs::exists(*file_)) return;
    std::ifstream in(*file_);
    if (!in) throw std::runtime_error("cannot read " + file_->string());
    json j = json::parse(in);
    for (const auto& item : j.at("consumers")) {
        auto c = credential_from_json(item);
        consumers_.emplace(c.consumer_key, std::move(c));
    }
}

ConsumerCredential ConsumerRegistry::register_consumer(const std::string& key,
                                                       const std::string& secret,
                                                       const std::string& lms_name,
                                                       std::int64_t now)
{
    if (key.empty()) throw ConsumerError(ConsumerError::Kind::invalid, "consumer key is empty");
    if (secret.empty()) throw ConsumerError(ConsumerError::Kind::invalid, "shared secret is empty");

    std::unique_lock lock(mutex_);
    if (consumers_.contains(key))
        throw ConsumerError(ConsumerError::Kind::duplicate_key,
                            "consumer key '" + key + "' is already registered");
    ConsumerCredential c{key, secret, lms_name, true, now};
    consumers_.emplace(key, c);
    save_locked();
    return c;
}

std::optional<ConsumerCredential> ConsumerRegistry::find(const std::string& key) const
{
    std::shared_lock lock(mutex_);
    auto it = consumers_.find(key);
    if (it == consumers_.end()) return std::nullopt;
    return it->second;
}

void ConsumerRegistry::set_enabled(const std::string& key, bool enabled)
{
    std::unique_lock lock(mutex_);
    auto it = consumers_.find(key);
    if (it == consumers_.end())
        throw ConsumerError(ConsumerError::Kind::not_found, "unknown consumer '" + key + "'");
    it->second.enabled = enabled;
    save_locked();
}

std::vector<ConsumerCredential> ConsumerRegistry::list() const
{
    std::shared_lock lock(mutex_);
    std::vector<ConsumerCredential> out;
    for (const auto& [_, c] : consumers_) out.push_back(c);
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.consumer_key < b.consumer_key; });
    return out;
}

void ConsumerRegistry::save_locked() const
{
    if (!file_) return;
    std::vector<const ConsumerCredential*> sorted;
    for (const auto& [_, c] : consumers_) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(),
              [](auto* a, auto* b) { return a->consumer_key < b->consumer_key; });
    json arr = json::array();
    for (const auto* c : sorted) arr.push_back(credential_to_json(*c));

    if (file_->has_parent_path()) fs::create_directories(file_->parent_path());
    fs::path tmp = *file_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << json{{"consumers", arr}}.dump(2) << '\n';
    }
    fs::rename(tmp, *file_);
}

// ---- launch request -----------------------------------------------------

LaunchRequest LaunchRequest::from_form(std::string_view method, std::string_view launch_url,
                                       oauth::ParameterList params)
{
    LaunchRequest r;
    r.http_method = std::string(method);
    r.launch_url = std::string(launch_url);

    auto text = [&](std::string_view name) {
        return oauth::find_parameter(params, name).value_or("");
    };
    r.oauth_consumer_key = text("oauth_consumer_key");
    r.oauth_signature = text("oauth_signature");
    r.oauth_signature_method = text("oauth_signature_method");
    r.oauth_timestamp = text("oauth_timestamp");
    r.oauth_nonce = text("oauth_nonce");
    r.oauth_version = text("oauth_version");
    r.oauth_callback = text("oauth_callback");
    r.lti_message_type = text("lti_message_type");
    r.lti_version = text("lti_version");
    r.resource_link_id = text("resource_link_id");

    r.user_id = oauth::find_parameter(params, "user_id");
    r.roles = oauth::find_parameter(params, "roles");
    r.resource_link_title = oauth::find_parameter(params, "resource_link_title");
    r.lis_result_sourcedid = oauth::find_parameter(params, "lis_result_sourcedid");
    r.lis_outcome_service_url = oauth::find_parameter(params, "lis_outcome_service_url");
    r.custom_content_id = oauth::find_parameter(params, "custom_content_id");

    r.all_parameters = std::move(params);
    return r;
}

std::vector<std::string> LaunchRequest::missing_required() const
{
    std::vector<std::string> missing;
    for (auto name : kRequiredFields) {
        if (!oauth::find_parameter(all_parameters, name)) missing.emplace_back(name);
    }
    return missing;
}

oauth::SignableRequest LaunchRequest::signable() const
{
    return oauth::SignableRequest::from(http_method, launch_url, all_parameters);
}

std::string_view to_string(RejectReason reason)
{
    switch (reason) {
    case RejectReason::not_post: return "not-post";
    case RejectReason::bad_message_type: return "bad-message-type";
    case RejectReason::bad_version: return "bad-version";
    case RejectReason::missing_resource_link: return "missing-resource-link";
    case RejectReason::unknown_consumer: return "unknown-consumer";
    case RejectReason::bad_callback: return "bad-callback";
    case RejectReason::bad_oauth_version: return "bad-oauth-version";
    case RejectReason::stale_timestamp: return "stale-timestamp";
    case RejectReason::replayed_nonce: return "replayed-nonce";
    case RejectReason::bad_signature: return "bad-signature";
    case RejectReason::unknown_content: return "unknown-content";
    }
    return "unknown";
}

bool Rejection::contains(RejectReason r) const
{
    return std::find(reasons.begin(), reasons.end(), r) != reasons.end();
}

std::string Rejection::to_text() const
{
    std::string out;
    for (auto r : reasons) {
        out += to_string(r);
        out += '\n';
    }
    return out;
}

// ---- sessions -----------------------------------------------------------

std::string generate_session_token()
{
    return oauth::random_hex(24);
}

SessionStore::SessionStore(std::int64_t ttl) : ttl_(ttl)
{
    if (ttl <= 0) throw std::invalid_argument("session ttl must be positive");
}

Session SessionStore::issue(Session session, std::int64_t now)
{
    session.issued_at = now;
    session.ttl = ttl_;
    std::unique_lock lock(mutex_);
    do {
        session.token = generate_session_token();
    } while (sessions_.contains(session.token));
    sessions_.emplace(session.token, session);
    return session;
}

std::optional<Session> SessionStore::find(const std::string& token, std::int64_t now) const
{
    std::shared_lock lock(mutex_);
    auto it = sessions_.find(token);
    if (it == sessions_.end() || it->second.expired(now)) return std::nullopt;
    return it->second;
}

std::size_t SessionStore::purge_expired(std::int64_t now)
{
    std::unique_lock lock(mutex_);
    return std::erase_if(sessions_, [&](const auto& kv) { return kv.second.expired(now); });
}

std::size_t SessionStore::size() const
{
    std::shared_lock lock(mutex_);
    return sessions_.size();
}

// ---- validation ---------------------------------------------------------

std::optional<std::string> resolve_content(const LaunchRequest& req,
                                           const content::ContentRepository& repo)
{
    std::string id = req.custom_content_id && !req.custom_content_id->empty()
                         ? *req.custom_content_id
                         : last_path_segment(req.launch_url);
    if (id.empty() || !repo.contains(id)) return std::nullopt;
    return id;
}

LaunchValidator::LaunchValidator(const ConsumerRegistry& registry,
                                 const content::ContentRepository& repo,
                                 oauth::NonceStore& nonces, SessionStore& sessions,
                                 std::int64_t timestamp_window)
    : registry_(registry), repo_(repo), nonces_(nonces), sessions_(sessions),
      window_(timestamp_window)
{
}

LaunchResult LaunchValidator::validate_launch(const LaunchRequest& req, std::int64_t now)
{
    Rejection rejection;
    auto check = [&](bool ok, RejectReason reason) {
        if (!ok) rejection.reasons.push_back(reason);
    };

    check(req.http_method == "POST", RejectReason::not_post);
    check(req.lti_message_type == kMessageType, RejectReason::bad_message_type);
    check(req.lti_version == kLtiVersion, RejectReason::bad_version);
    check(!req.resource_link_id.empty(), RejectReason::missing_resource_link);

    const auto credential = registry_.find(req.oauth_consumer_key);
    const bool consumer_ok = credential && credential->enabled;
    check(consumer_ok, RejectReason::unknown_consumer);

    check(req.oauth_callback == kCallback, RejectReason::bad_callback);
    check(req.oauth_version == oauth::kVersion, RejectReason::bad_oauth_version);

    const auto ts = parse_timestamp(req.oauth_timestamp);
    check(ts && oauth::check_timestamp(*ts, now, window_), RejectReason::stale_timestamp);

    // Read-only here; the nonce is consumed below once everything else passed.
    check(!req.oauth_nonce.empty() && !nonces_.contains(req.oauth_consumer_key, req.oauth_nonce),
          RejectReason::replayed_nonce);

    bool signature_ok = false;
    if (req.oauth_signature.empty() || req.oauth_signature_method != oauth::kSignatureMethod) {
        signature_ok = false;
    } else if (!consumer_ok) {
        // Without a secret there is nothing to verify against; unknown-consumer already rejects.
        signature_ok = true;
    } else {
        signature_ok =
            oauth::verify_signature(req.signable(), req.oauth_signature, credential->shared_secret);
    }
    check(signature_ok, RejectReason::bad_signature);

    const auto content_id = resolve_content(req, repo_);
    check(content_id.has_value(), RejectReason::unknown_content);

    if (!rejection.reasons.empty()) return rejection;

    if (nonces_.check_and_store(req.oauth_consumer_key, req.oauth_nonce, *ts) ==
        oauth::NonceResult::replay) {
        rejection.reasons.push_back(RejectReason::replayed_nonce);
        return rejection;
    }

    Session session;
    session.consumer_key = req.oauth_consumer_key;
    session.user_id = req.user_id;
    session.roles = req.roles;
    session.resource_link_id = req.resource_link_id;
    session.content_id = *content_id;
    session.result_sourcedid = req.lis_result_sourcedid;
    session.outcome_service_url = req.lis_outcome_service_url;
    return sessions_.issue(std::move(session), now);
}

}  // namespace microlti::lti
