#pragma once

#include "microlti/lti_launch.hpp"
#include "support.hpp"

namespace testsupport {

/// Validator wired to in-memory stores with one consumer and one content unit.
struct LaunchHarness {
    static constexpr std::int64_t kNow = 1'700'000'000;
    static constexpr const char* kKey = "moodle-test";
    static constexpr const char* kSecret = "s3cr3t";
    static constexpr const char* kUrl = "https://tool.example/lti/launch/intro-oauth";

    microlti::lti::ConsumerRegistry registry;
    microlti::content::ContentRepository repo{std::make_shared<microlti::content::MemoryDocumentStore>()};
    microlti::oauth::NonceStore nonces{300};
    microlti::lti::SessionStore sessions{3600};
    microlti::lti::LaunchValidator validator{registry, repo, nonces, sessions, 300};

    LaunchHarness()
    {
        registry.register_consumer(kKey, kSecret, "Test LMS", kNow);
        repo.create_content(sample_content());
    }

    static microlti::oauth::ParameterList valid_params(const std::string& nonce)
    {
        return {{"oauth_consumer_key", kKey},
                {"oauth_signature_method", "HMAC-SHA1"},
                {"oauth_timestamp", std::to_string(kNow)},
                {"oauth_nonce", nonce},
                {"oauth_version", "1.0"},
                {"oauth_callback", "about:blank"},
                {"lti_message_type", "basic-lti-launch-request"},
                {"lti_version", "LTI-1p0"},
                {"resource_link_id", "rl-1"},
                {"user_id", "student-7"},
                {"roles", "Learner"},
                {"lis_result_sourcedid", "sid-7"},
                {"lis_outcome_service_url", "https://lms.example/outcomes"}};
    }

    static void set(microlti::oauth::ParameterList& params, const std::string& name, const std::string& value)
    {
        for (auto& [k, v] : params) {
            if (k == name) {
                v = value;
                return;
            }
        }
        params.emplace_back(name, value);
    }

    /// Signs `params` for (method, url) with `secret` and parses it as the tool would.
    static microlti::lti::LaunchRequest signed_request(microlti::oauth::ParameterList params,
                                                      const std::string& method = "POST",
                                                      const std::string& url = kUrl,
                                                      const std::string& secret = kSecret)
    {
        auto signable = microlti::oauth::SignableRequest::from(method, url, params);
        params.emplace_back("oauth_signature", microlti::oauth::sign(signable, secret));
        return microlti::lti::LaunchRequest::from_form(method, url, std::move(params));
    }

    microlti::lti::LaunchResult launch(const microlti::lti::LaunchRequest& req) { return validator.validate_launch(req, kNow); }
};

inline std::vector<microlti::lti::RejectReason> reasons(const microlti::lti::LaunchResult& r)
{
    if (auto* rej = std::get_if<microlti::lti::Rejection>(&r)) return rej->reasons;
    return {};
}

}  // namespace testsupport
