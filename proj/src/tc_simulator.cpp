#include "microlti/tc_simulator.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <fstream>

namespace microlti::sim {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json entry_to_json(const GradebookEntry& e)
{
    json j = {{"sourced_id", e.sourced_id},
              {"user_id", e.user_id},
              {"resource_link_id", e.resource_link_id},
              {"updated_at", e.updated_at}};
    j["score"] = e.score ? json(*e.score) : json(nullptr);
    return j;
}

GradebookEntry entry_from_json(const json& j)
{
    GradebookEntry e;
    j.at("sourced_id").get_to(e.sourced_id);
    j.at("user_id").get_to(e.user_id);
    j.at("resource_link_id").get_to(e.resource_link_id);
    e.updated_at = j.value("updated_at", std::int64_t{0});
    if (j.contains("score") && !j.at("score").is_null()) e.score = j.at("score").get<double>();
    return e;
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

HttpReply unauthorized(std::string reason)
{
    return HttpReply{401, "text/plain", std::move(reason) + "\n"};
}

}  // namespace

std::string LaunchForm::to_html() const
{
    std::string html = "<!DOCTYPE html>\n<html><body onload=\"document.forms[0].submit()\">\n";
    html += "<form method=\"post\" action=\"" + html_escape(url) + "\">\n";
    for (const auto& [name, value] : params) {
        html += "  <input type=\"hidden\" name=\"" + html_escape(name) + "\" value=\"" +
                html_escape(value) + "\">\n";
    }
    html += "  <noscript><button type=\"submit\">Launch</button></noscript>\n";
    html += "</form>\n</body></html>\n";
    return html;
}

ToolConsumerSimulator::ToolConsumerSimulator(SimulatorConfig config)
    : config_(std::move(config)), nonces_(config_.timestamp_window)
{
    if (!config_.gradebook_file || !fs::exists(*config_.gradebook_file)) return;
    std::ifstream in(*config_.gradebook_file);
    json j = json::parse(in);
    for (const auto& item : j.at("entries")) {
        GradebookEntry e = entry_from_json(item);
        sourcedids_[{e.user_id, e.resource_link_id}] = e.sourced_id;
        gradebook_[e.sourced_id] = std::move(e);
    }
}

void ToolConsumerSimulator::add_credential(const lti::ConsumerCredential& cred)
{
    std::lock_guard lock(mutex_);
    credentials_[cred.consumer_key] = cred;
}

void ToolConsumerSimulator::set_faults(const Faults& faults)
{
    std::lock_guard lock(mutex_);
    faults_ = faults;
}

Faults ToolConsumerSimulator::faults() const
{
    std::lock_guard lock(mutex_);
    return faults_;
}

void ToolConsumerSimulator::set_outcome_service_url(std::string url)
{
    std::lock_guard lock(mutex_);
    config_.outcome_service_url = std::move(url);
}

void ToolConsumerSimulator::set_tool_base_url(std::string url)
{
    std::lock_guard lock(mutex_);
    config_.tool_base_url = std::move(url);
}

std::string ToolConsumerSimulator::sourcedid_for(const SimulatedUser& user,
                                                 const std::string& resource_link_id)
{
    auto key = std::make_pair(user.user_id, resource_link_id);
    if (auto it = sourcedids_.find(key); it != sourcedids_.end()) return it->second;

    std::string sid;
    do {
        sid = "sid-" + oauth::random_hex(12);
    } while (gradebook_.contains(sid));
    sourcedids_[key] = sid;
    gradebook_[sid] = GradebookEntry{sid, user.user_id, resource_link_id, std::nullopt,
                                     config_.clock()};
    save_locked();
    return sid;
}

LaunchForm ToolConsumerSimulator::make_launch_form(const SimulatedUser& user,
                                                   const std::string& content_id,
                                                   const lti::ConsumerCredential& cred,
                                                   std::int64_t now)
{
    std::lock_guard lock(mutex_);
    credentials_.try_emplace(cred.consumer_key, cred);

    const std::string resource_link_id = "rl-" + content_id;
    const std::string sourcedid = sourcedid_for(user, resource_link_id);

    std::string nonce = faults_.reuse_nonce && !last_nonce_.empty() ? last_nonce_
                                                                    : oauth::generate_nonce();
    last_nonce_ = nonce;

    LaunchForm form;
    form.url = config_.tool_base_url + "/lti/launch/" + oauth::percent_encode(content_id);
    form.params = {
        {"lti_message_type", std::string(lti::kMessageType)},
        {"lti_version", std::string(lti::kLtiVersion)},
        {"resource_link_id", resource_link_id},
        {"resource_link_title", "Micro-content " + content_id},
        {"user_id", user.user_id},
        {"roles", user.roles},
        {"lis_person_name_full", user.display_name},
        {"lis_result_sourcedid", sourcedid},
        {"lis_outcome_service_url", config_.outcome_service_url},
        {"oauth_consumer_key", cred.consumer_key},
        {"oauth_signature_method", std::string(oauth::kSignatureMethod)},
        {"oauth_timestamp", std::to_string(now + faults_.clock_skew_seconds)},
        {"oauth_nonce", std::move(nonce)},
        {"oauth_version", std::string(oauth::kVersion)},
        {"oauth_callback", std::string(lti::kCallback)},
    };
    if (config_.send_custom_content_id) form.params.emplace_back("custom_content_id", content_id);

    const std::string& secret = faults_.signing_secret ? *faults_.signing_secret : cred.shared_secret;
    std::string signature =
        oauth::sign(oauth::SignableRequest::from("POST", form.url, form.params), secret);
    if (faults_.corrupt_signature) signature[0] = signature[0] == 'A' ? 'B' : 'A';
    form.params.emplace_back("oauth_signature", std::move(signature));
    return form;
}

std::optional<std::string> ToolConsumerSimulator::verify_outcome_signature(
    std::string_view authorization, std::string_view body)
{
    auto params = oauth::parse_authorization_header(authorization);
    if (!params) return "missing or malformed OAuth Authorization header";

    auto get = [&](std::string_view name) { return oauth::find_parameter(*params, name); };
    const auto key = get("oauth_consumer_key");
    const auto signature = get("oauth_signature");
    const auto method = get("oauth_signature_method");
    const auto timestamp = get("oauth_timestamp");
    const auto nonce = get("oauth_nonce");
    const auto hash = get("oauth_body_hash");
    if (!key || !signature || !method || !timestamp || !nonce || !hash)
        return "incomplete OAuth parameters";
    if (*method != oauth::kSignatureMethod) return "unsupported signature method";
    if (auto version = get("oauth_version"); version && *version != oauth::kVersion)
        return "unsupported OAuth version";

    lti::ConsumerCredential cred;
    std::string url;
    {
        std::lock_guard lock(mutex_);
        auto it = credentials_.find(*key);
        if (it == credentials_.end() || !it->second.enabled) return "unknown consumer key";
        cred = it->second;
        url = config_.outcome_service_url;
    }

    if (!oauth::constant_time_equals(oauth::body_hash(body), *hash)) return "body hash mismatch";

    std::int64_t ts = 0;
    try {
        ts = std::stoll(*timestamp);
    } catch (const std::exception&) {
        return "bad timestamp";
    }
    if (!oauth::check_timestamp(ts, config_.clock(), config_.timestamp_window))
        return "timestamp outside window";

    const auto signable = oauth::SignableRequest::from("POST", url, *params);
    if (!oauth::verify_signature(signable, *signature, cred.shared_secret)) return "bad signature";

    if (nonces_.check_and_store(*key, *nonce, ts) == oauth::NonceResult::replay)
        return "replayed nonce";
    return std::nullopt;
}

lis::OutcomeResponse ToolConsumerSimulator::apply(const lis::OutcomeRequest& req)
{
    lis::OutcomeResponse resp;
    resp.message_id = lis::generate_message_id();
    resp.message_ref = req.message_id;
    resp.operation = req.operation;

    std::lock_guard lock(mutex_);
    auto it = gradebook_.find(req.sourced_id);
    if (it == gradebook_.end()) {
        resp.status = lis::Status::failure;
        resp.description = "sourcedId not found";
        return resp;
    }

    GradebookEntry& entry = it->second;
    switch (req.operation) {
    case lis::Operation::replace_result:
        if (!req.score || *req.score < 0.0 || *req.score > 1.0) {
            resp.status = lis::Status::failure;
            resp.description = "score out of range [0, 1]";
            return resp;
        }
        entry.score = *req.score;
        entry.updated_at = config_.clock();
        resp.description = "Score for " + req.sourced_id + " is now " + lis::format_score(*req.score);
        break;
    case lis::Operation::read_result:
        resp.score = entry.score;
        resp.description = "Result read";
        break;
    case lis::Operation::delete_result:
        entry.score.reset();
        entry.updated_at = config_.clock();
        resp.description = "Result deleted";
        break;
    }
    if (req.operation != lis::Operation::read_result) save_locked();
    resp.status = lis::Status::success;
    return resp;
}

HttpReply ToolConsumerSimulator::outcome_endpoint(std::string_view method,
                                                  std::string_view authorization,
                                                  std::string_view body)
{
    if (method != "POST") return HttpReply{405, "text/plain", "POST required\n"};
    if (auto failure = verify_outcome_signature(authorization, body)) return unauthorized(*failure);

    lis::OutcomeResponse resp;
    try {
        auto message = lis::parse_outcome_xml(body);
        auto* req = std::get_if<lis::OutcomeRequest>(&message);
        if (!req) {
            resp.status = lis::Status::failure;
            resp.description = "expected a request envelope";
        } else {
            resp = apply(*req);
        }
    } catch (const lis::OutcomeError& e) {
        resp.status = lis::Status::failure;
        resp.description = e.what();
    }
    if (resp.message_id.empty()) resp.message_id = lis::generate_message_id();
    return HttpReply{200, "application/xml", lis::build_outcome_response_xml(resp)};
}

GradebookEntry ToolConsumerSimulator::gradebook_get(const std::string& sourced_id) const
{
    std::lock_guard lock(mutex_);
    auto it = gradebook_.find(sourced_id);
    if (it == gradebook_.end()) throw GradebookError("sourcedId '" + sourced_id + "' not found");
    return it->second;
}

std::vector<GradebookEntry> ToolConsumerSimulator::gradebook() const
{
    std::lock_guard lock(mutex_);
    std::vector<GradebookEntry> out;
    for (const auto& [_, e] : gradebook_) out.push_back(e);
    return out;
}

void ToolConsumerSimulator::save_locked() const
{
    if (!config_.gradebook_file) return;
    json entries = json::array();
    for (const auto& [_, e] : gradebook_) entries.push_back(entry_to_json(e));
    const fs::path& file = *config_.gradebook_file;
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    fs::path tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << json{{"entries", entries}}.dump(2) << '\n';
    }
    fs::rename(tmp, file);
}

void ToolConsumerSimulator::mount(httplib::Server& server)
{
    server.Get("/sim/launch-form", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string content_id = req.get_param_value("content_id");
        if (content_id.empty()) {
            res.status = 400;
            res.set_content("content_id is required\n", "text/plain");
            return;
        }
        SimulatedUser user;
        user.user_id = req.has_param("user_id") ? req.get_param_value("user_id") : "student-1";
        user.display_name = req.has_param("name") ? req.get_param_value("name") : user.user_id;
        if (req.has_param("roles")) user.roles = req.get_param_value("roles");

        std::optional<lti::ConsumerCredential> cred;
        {
            std::lock_guard lock(mutex_);
            const std::string key = req.get_param_value("consumer_key");
            if (auto it = key.empty() ? credentials_.begin() : credentials_.find(key);
                it != credentials_.end())
                cred = it->second;
        }
        if (!cred) {
            res.status = 404;
            res.set_content("no such consumer credential\n", "text/plain");
            return;
        }

        LaunchForm form = make_launch_form(user, content_id, *cred, config_.clock());
        if (req.get_param_value("format") == "json") {
            json params = json::array();
            for (const auto& [k, v] : form.params) params.push_back({k, v});
            res.set_content(json{{"url", form.url}, {"params", params}}.dump(), "application/json");
        } else {
            res.set_content(form.to_html(), "text/html; charset=utf-8");
        }
    });

    server.Post("/sim/outcomes", [this](const httplib::Request& req, httplib::Response& res) {
        HttpReply reply = outcome_endpoint("POST", req.get_header_value("Authorization"), req.body);
        res.status = reply.status;
        res.set_content(reply.body, reply.content_type);
    });

    server.Get(R"(/sim/gradebook/([^/]+))", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
        const auto id = oauth::percent_decode(req.matches[1].str()).value_or("");
        try {
            res.set_content(entry_to_json(gradebook_get(id)).dump(), "application/json");
        } catch (const GradebookError& e) {
            res.status = 404;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });
}

}  // namespace microlti::sim
