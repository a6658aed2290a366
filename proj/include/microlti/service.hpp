#pragma once

#include "microlti/clock.hpp"
#include "microlti/config.hpp"
#include "microlti/content.hpp"
#include "microlti/lis_outcomes.hpp"
#include "microlti/lti_launch.hpp"
#include "microlti/repository.hpp"

#include <memory>
#include <thread>

namespace httplib {
class Server;
}

namespace microlti {

enum class PassbackStatus { delivered, failed, not_configured };

std::string_view to_string(PassbackStatus status);

struct SubmissionResult {
    double score = 0.0;
    std::vector<content::QuestionOutcome> per_question;
    PassbackStatus passback = PassbackStatus::not_configured;
    std::string passback_reason;  // error kind when failed, e.g. "transport-failure"
    std::string passback_detail;

    nlohmann::json to_json() const;
};

inline constexpr std::string_view kSessionCookie = "microlti_session";
inline constexpr std::string_view kSessionHeader = "X-MicroLTI-Session";

/**
 * The deployable tool provider: launch endpoint, student content and
 * submission API, and the bearer-token authoring API. Each shared piece
 * (nonces, sessions, consumers, documents) synchronizes itself, so request
 * handlers run fully concurrently.
 */
class ToolProvider {
public:
    explicit ToolProvider(ServiceConfig config, Clock clock = system_now);

    void mount(httplib::Server& server);

    /// Launch URL an LMS activity should point at for `content_id`.
    std::string launch_url(const std::string& content_id) const;

    /// Validates a launch POST body received at `target` (path plus query).
    lti::LaunchResult launch(std::string_view method, std::string_view target, std::string_view body);

    /// Scores the answers and, when the session carries outcome routing, posts
    /// the grade back synchronously. Throws content::ContentError(not_found) if
    /// the content was deleted after launch.
    SubmissionResult submit(const lti::Session& session, std::span<const content::Response> answers);

    const ServiceConfig& config() const { return config_; }
    content::ContentRepository& repository() { return repo_; }
    lti::ConsumerRegistry& consumers() { return consumers_; }
    lti::SessionStore& sessions() { return sessions_; }

private:
    std::optional<std::string> authoring_user(const std::string& authorization) const;

    ServiceConfig config_;
    Clock clock_;
    content::ContentRepository repo_;
    lti::ConsumerRegistry consumers_;
    lti::SessionStore sessions_;
    oauth::NonceStore nonces_;
    lti::LaunchValidator validator_;
};

/// An httplib server listening on a background thread; stops on destruction.
class BackgroundServer {
public:
    /// Binds immediately (port 0 picks a free port) so port() is known before start().
    explicit BackgroundServer(const std::string& host = "127.0.0.1", int port = 0);
    ~BackgroundServer();

    BackgroundServer(const BackgroundServer&) = delete;
    BackgroundServer& operator=(const BackgroundServer&) = delete;

    httplib::Server& server() { return *server_; }
    int port() const { return port_; }
    std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }

    void start();
    void stop();

private:
    std::unique_ptr<httplib::Server> server_;
    std::string host_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace microlti
