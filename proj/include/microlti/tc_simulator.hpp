#pragma once

#include "microlti/clock.hpp"
#include "microlti/lis_outcomes.hpp"
#include "microlti/lti_launch.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace microlti::sim {

struct SimulatedUser {
    std::string user_id;
    std::string display_name;
    std::string roles = "Learner";
};

struct GradebookEntry {
    std::string sourced_id;
    std::string user_id;
    std::string resource_link_id;
    std::optional<double> score;
    std::int64_t updated_at = 0;

    bool operator==(const GradebookEntry&) const = default;
};

class GradebookError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Deliberate protocol faults applied to generated launches.
struct Faults {
    std::int64_t clock_skew_seconds = 0;       // added to oauth_timestamp
    bool reuse_nonce = false;                  // repeat the previous launch's nonce
    bool corrupt_signature = false;            // flip one character of oauth_signature
    std::optional<std::string> signing_secret;  // sign with this instead of the real secret
};

struct SimulatorConfig {
    /// Launch URLs are `tool_base_url + "/lti/launch/" + content_id`.
    std::string tool_base_url = "http://127.0.0.1:8080";
    /// Advertised as lis_outcome_service_url and used to verify outcome signatures.
    std::string outcome_service_url = "http://127.0.0.1:8090/sim/outcomes";
    std::int64_t timestamp_window = oauth::kDefaultTimestampWindow;
    bool send_custom_content_id = false;
    std::optional<std::filesystem::path> gradebook_file;
    Clock clock = system_now;
};

struct LaunchForm {
    std::string url;
    oauth::ParameterList params;

    std::string body() const { return oauth::encode_form(params); }
    /// Self-submitting HTML form, as an LMS serves it to the browser.
    std::string to_html() const;
};

struct HttpReply {
    int status = 200;
    std::string content_type = "application/xml";
    std::string body;
};

/**
 * A stand-in LMS: signs launches, hosts the outcomes service and keeps a
 * gradebook. One sourcedid per (user, resource link), reused across launches.
 * Gradebook writes are atomic per entry; outcome requests may arrive concurrently.
 */
class ToolConsumerSimulator {
public:
    explicit ToolConsumerSimulator(SimulatorConfig config);

    /// Credentials the simulator accepts outcome requests from.
    void add_credential(const lti::ConsumerCredential& cred);

    void set_faults(const Faults& faults);
    Faults faults() const;

    const SimulatorConfig& config() const { return config_; }
    void set_outcome_service_url(std::string url);
    void set_tool_base_url(std::string url);

    LaunchForm make_launch_form(const SimulatedUser& user, const std::string& content_id,
                                const lti::ConsumerCredential& cred, std::int64_t now);

    /// Verifies OAuth header + body hash (401 on failure), then applies the POX operation.
    HttpReply outcome_endpoint(std::string_view method, std::string_view authorization,
                               std::string_view body);

    /// Throws GradebookError for unknown ids.
    GradebookEntry gradebook_get(const std::string& sourced_id) const;
    std::vector<GradebookEntry> gradebook() const;

    /// Registers /sim/launch-form, /sim/outcomes and /sim/gradebook/{sourcedid}.
    void mount(httplib::Server& server);

private:
    std::optional<std::string> verify_outcome_signature(std::string_view authorization,
                                                        std::string_view body);
    lis::OutcomeResponse apply(const lis::OutcomeRequest& req);
    std::string sourcedid_for(const SimulatedUser& user, const std::string& resource_link_id);
    void save_locked() const;

    SimulatorConfig config_;
    oauth::NonceStore nonces_;
    mutable std::mutex mutex_;
    Faults faults_;
    std::string last_nonce_;
    std::map<std::string, lti::ConsumerCredential> credentials_;
    std::map<std::string, GradebookEntry> gradebook_;
    std::map<std::pair<std::string, std::string>, std::string> sourcedids_;
};

}  // namespace microlti::sim
