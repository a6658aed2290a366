#include "microlti/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <sstream>

namespace microlti {

using json = nlohmann::json;
using content::ContentError;

namespace {

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message)
{
    send_json(res, status, json{{"error", code}, {"message", message}});
}

int status_for(ContentError::Kind kind)
{
    switch (kind) {
    case ContentError::Kind::not_found: return 404;
    case ContentError::Kind::duplicate_id:
    case ContentError::Kind::version_conflict: return 409;
    case ContentError::Kind::malformed_document:
    case ContentError::Kind::validation_failed:
    case ContentError::Kind::empty_query: return 422;
    }
    return 500;
}

void send_content_error(httplib::Response& res, const ContentError& e)
{
    json body = {{"error", content::to_string(e.kind())}, {"message", e.what()}};
    if (e.kind() == ContentError::Kind::validation_failed) {
        json report = content::to_json(e.report());
        body["errors"] = report["errors"];
        body["warnings"] = report["warnings"];
    } else if (e.kind() == ContentError::Kind::malformed_document) {
        body["errors"] = json::array({{{"rule", "malformed-document"}, {"message", e.what()}}});
    }
    send_json(res, status_for(e.kind()), body);
}

std::vector<std::string> split_tags(std::string_view text)
{
    std::vector<std::string> out;
    while (true) {
        auto comma = text.find(',');
        out.emplace_back(text.substr(0, comma));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

std::string html_escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string player_shell(const std::string& content_id, const std::string& token)
{
    return "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Micro-content</title></head>\n"
           "<body>\n<div id=\"player\" data-content-id=\"" + html_escape(content_id) +
           "\" data-session=\"" + html_escape(token) + "\"></div>\n"
           "<script src=\"/static/player.js\"></script>\n</body></html>\n";
}

}  // namespace

std::string_view to_string(PassbackStatus status)
{
    switch (status) {
    case PassbackStatus::delivered: return "delivered";
    case PassbackStatus::failed: return "failed";
    case PassbackStatus::not_configured: return "not-configured";
    }
    return "unknown";
}

json SubmissionResult::to_json() const
{
    json questions = json::array();
    for (const auto& q : per_question)
        questions.push_back({{"correct", q.correct}, {"feedback", q.feedback}});
    json passback_json = {{"status", to_string(passback)}};
    if (passback == PassbackStatus::failed) {
        passback_json["reason"] = passback_reason;
        passback_json["detail"] = passback_detail;
    }
    return json{{"score", score}, {"per_question", questions}, {"passback", passback_json}};
}

ToolProvider::ToolProvider(ServiceConfig config, Clock clock)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      repo_(std::make_shared<content::FileDocumentStore>(config_.content_path())),
      consumers_(config_.consumers_path()),
      sessions_(config_.session_ttl),
      nonces_(config_.timestamp_window),
      validator_(consumers_, repo_, nonces_, sessions_, config_.timestamp_window)
{
    config_.validate();
}

std::string ToolProvider::launch_url(const std::string& content_id) const
{
    return config_.base_url() + "/lti/launch/" + oauth::percent_encode(content_id);
}

lti::LaunchResult ToolProvider::launch(std::string_view method, std::string_view target,
                                       std::string_view body)
{
    auto params = oauth::parse_form(body).value_or(oauth::ParameterList{});
    auto req = lti::LaunchRequest::from_form(method, config_.base_url() + std::string(target),
                                             std::move(params));
    return validator_.validate_launch(req, clock_());
}

SubmissionResult ToolProvider::submit(const lti::Session& session,
                                      std::span<const content::Response> answers)
{
    const content::MicroContent doc = repo_.get_content(session.content_id);
    content::QuizGrade grade = content::grade_quiz(doc, answers);

    SubmissionResult result;
    result.score = grade.score;
    result.per_question = std::move(grade.per_question);
    if (!session.has_outcome_routing()) return result;

    auto credential = consumers_.find(session.consumer_key);
    if (!credential || !credential->enabled) {
        result.passback = PassbackStatus::failed;
        result.passback_reason = "unknown-consumer";
        result.passback_detail = "consumer '" + session.consumer_key + "' is no longer registered";
        return result;
    }

    lis::OutcomeRequest outcome;
    outcome.operation = lis::Operation::replace_result;
    outcome.message_id = lis::generate_message_id();
    outcome.sourced_id = *session.result_sourcedid;
    outcome.score = result.score;

    lis::SendOptions options;
    options.clock = clock_;
    options.read_timeout_seconds = config_.outcome_timeout_seconds;
    options.connect_timeout_seconds = std::min(config_.outcome_timeout_seconds, 5);
    try {
        lis::send_outcome(*session.outcome_service_url, *credential, outcome, options);
        result.passback = PassbackStatus::delivered;
    } catch (const lis::OutcomeError& e) {
        result.passback = PassbackStatus::failed;
        result.passback_reason = std::string(lis::to_string(e.kind()));
        result.passback_detail = e.what();
    }
    return result;
}

std::optional<std::string> ToolProvider::authoring_user(const std::string& authorization) const
{
    static constexpr std::string_view prefix = "Bearer ";
    if (!std::string_view(authorization).starts_with(prefix)) return std::nullopt;
    const std::string_view presented = std::string_view(authorization).substr(prefix.size());
    for (const auto& [name, token] : config_.authoring_tokens) {
        if (oauth::constant_time_equals(token, presented)) return name;
    }
    return std::nullopt;
}

void ToolProvider::mount(httplib::Server& server)
{
    auto launch_handler = [this](const httplib::Request& req, httplib::Response& res) {
        const std::string content_id =
            oauth::percent_decode(req.matches[1].str()).value_or(req.matches[1].str());
        lti::LaunchResult result = launch(req.method, req.target, req.body);

        if (auto* rejection = std::get_if<lti::Rejection>(&result)) {
            const bool only_content = rejection->reasons.size() == 1 &&
                                      rejection->contains(lti::RejectReason::unknown_content);
            res.status = only_content ? 404 : 401;
            res.set_content(rejection->to_text(), "text/plain");
            return;
        }
        const auto& session = std::get<lti::Session>(result);
        res.status = 302;
        res.set_header("Location", "/player/" + oauth::percent_encode(session.content_id) +
                                       "?session=" + session.token);
        res.set_header("Set-Cookie", std::string(kSessionCookie) + "=" + session.token +
                                         "; Path=/; HttpOnly; SameSite=None; Secure");
        res.set_header(std::string(kSessionHeader), session.token);
        res.set_content("launched " + content_id + "\n", "text/plain");
    };
    server.Post(R"(/lti/launch/([^/?]+))", launch_handler);
    server.Get(R"(/lti/launch/([^/?]+))", launch_handler);

    server.Get(R"(/player/([^/?]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string token = req.get_param_value("session");
        auto session = sessions_.find(token, clock_());
        if (!session) {
            res.status = 401;
            res.set_content("session expired; relaunch the activity from your LMS\n", "text/plain");
            return;
        }
        res.set_content(player_shell(session->content_id, token), "text/html; charset=utf-8");
    });

    if (config_.player_dir) server.set_mount_point("/static", config_.player_dir->string());

    server.Get(R"(/api/session/([^/]+)/content)",
               [this](const httplib::Request& req, httplib::Response& res) {
                   auto session = sessions_.find(req.matches[1].str(), clock_());
                   if (!session) return send_error(res, 401, "invalid-session", "unknown or expired session");
                   try {
                       send_json(res, 200, content::student_view(repo_.get_content(session->content_id)));
                   } catch (const ContentError& e) {
                       send_content_error(res, e);
                   }
               });

    server.Post(R"(/api/session/([^/]+)/submit)",
                [this](const httplib::Request& req, httplib::Response& res) {
                    auto session = sessions_.find(req.matches[1].str(), clock_());
                    if (!session) return send_error(res, 401, "invalid-session", "unknown or expired session");

                    std::vector<content::Response> answers;
                    try {
                        answers = content::responses_from_json(json::parse(req.body));
                    } catch (const std::exception& e) {
                        return send_error(res, 422, "malformed-answers", e.what());
                    }
                    try {
                        send_json(res, 200, submit(*session, answers).to_json());
                    } catch (const ContentError& e) {
                        send_content_error(res, e);
                    }
                });

    // Authoring API.
    auto authorized = [this](const httplib::Request& req, httplib::Response& res) {
        if (authoring_user(req.get_header_value("Authorization"))) return true;
        send_error(res, 401, "unauthorized", "a valid authoring bearer token is required");
        return false;
    };

    server.Post("/api/content", [this, authorized](const httplib::Request& req, httplib::Response& res) {
        if (!authorized(req, res)) return;
        try {
            content::MicroContent doc = content::parse_content(req.body);
            const auto warnings = content::validate_content(doc).warnings;
            const std::string id = repo_.create_content(std::move(doc));
            json w = json::array();
            for (const auto& f : warnings) w.push_back({{"rule", f.rule_id}, {"message", f.message}});
            send_json(res, 201, json{{"id", id}, {"version", 1}, {"launch_url", launch_url(id)}, {"warnings", w}});
        } catch (const ContentError& e) {
            send_content_error(res, e);
        }
    });

    server.Put(R"(/api/content/([^/]+))", [this, authorized](const httplib::Request& req,
                                                            httplib::Response& res) {
        if (!authorized(req, res)) return;
        try {
            content::MicroContent doc = content::parse_content(req.body);
            std::int64_t expected = doc.version;
            if (req.has_header("If-Match")) {
                std::string tag = req.get_header_value("If-Match");
                tag.erase(std::remove(tag.begin(), tag.end(), '"'), tag.end());
                try {
                    expected = std::stoll(tag);
                } catch (const std::exception&) {
                    return send_error(res, 422, "malformed-document", "If-Match must carry a version number");
                }
            }
            const std::string id = req.matches[1].str();
            const std::int64_t version = repo_.update_content(id, std::move(doc), expected);
            send_json(res, 200, json{{"id", id}, {"version", version}});
        } catch (const ContentError& e) {
            send_content_error(res, e);
        }
    });

    server.Get(R"(/api/content/([^/]+))", [this, authorized](const httplib::Request& req,
                                                            httplib::Response& res) {
        if (!authorized(req, res)) return;
        try {
            send_json(res, 200, content::to_json(repo_.get_content(req.matches[1].str())));
        } catch (const ContentError& e) {
            send_content_error(res, e);
        }
    });

    server.Delete(R"(/api/content/([^/]+))", [this, authorized](const httplib::Request& req,
                                                               httplib::Response& res) {
        if (!authorized(req, res)) return;
        try {
            repo_.remove_content(req.matches[1].str());
            res.status = 204;
        } catch (const ContentError& e) {
            send_content_error(res, e);
        }
    });

    server.Get("/api/content", [this, authorized](const httplib::Request& req, httplib::Response& res) {
        if (!authorized(req, res)) return;
        if (!req.has_param("tags")) {
            json ids = json::array();
            for (const auto& id : repo_.list_ids()) ids.push_back(id);
            return send_json(res, 200, ids);
        }
        try {
            const auto tags = split_tags(req.get_param_value("tags"));
            json hits = json::array();
            for (const auto& h : repo_.search_by_tags(tags))
                hits.push_back({{"id", h.id}, {"score", h.score}});
            send_json(res, 200, hits);
        } catch (const ContentError& e) {
            send_content_error(res, e);
        }
    });

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok\n", "text/plain");
    });
}

BackgroundServer::BackgroundServer(const std::string& host, int port)
    : server_(std::make_unique<httplib::Server>()), host_(host)
{
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
    } else {
        port_ = server_->bind_to_port(host, port) ? port : -1;
    }
    if (port_ <= 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
}

BackgroundServer::~BackgroundServer()
{
    stop();
}

void BackgroundServer::start()
{
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void BackgroundServer::stop()
{
    if (thread_.joinable()) {
        server_->stop();
        thread_.join();
    }
}

}  // namespace microlti
