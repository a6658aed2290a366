#include "microlti/simulation.hpp"

#include <httplib.h>

namespace microlti::simulation {

using json = nlohmann::json;
using content::QuestionKind;

content::MicroContent demo_content()
{
    content::MicroContent doc;
    doc.id = "oauth-basics";
    doc.title = "Signing an LTI launch";
    doc.topic = "Learning tools interoperability";
    doc.authors = {"Demo Author"};
    doc.date = "2024-03-11";
    doc.tags = {"lti", "oauth", "security"};
    doc.introduction =
        "An LMS opens an external tool by posting a signed form. This unit shows how the "
        "signature is built and checked.";
    doc.explanation.kind = content::ExplanationKind::video;
    doc.explanation.uri = "https://media.example.org/lti/oauth-basics.mp4";
    doc.explanation.duration = 420;

    content::Question q1;
    q1.kind = QuestionKind::multiple_choice_single;
    q1.prompt = "Which HTTP method carries a basic launch?";
    q1.options = {"GET", "POST", "PUT"};
    q1.correct_options = {1};
    q1.feedback = "Launches are form submissions.";

    content::Question q2;
    q2.kind = QuestionKind::multiple_choice_multi;
    q2.prompt = "Which values enter the signature base string?";
    q2.options = {"HTTP method", "base URL", "oauth_signature", "sorted parameters"};
    q2.correct_options = {0, 1, 3};
    q2.feedback = "The signature itself is excluded.";

    content::Question q3;
    q3.kind = QuestionKind::short_answer;
    q3.prompt = "Name the hash function under the HMAC signature method.";
    q3.accepted_answers = {"SHA-1", "SHA1"};
    q3.feedback = "Look at the signature method name.";

    content::Question q4;
    q4.kind = QuestionKind::multiple_choice_single;
    q4.prompt = "Which range must a reported grade lie in?";
    q4.options = {"0 to 100", "0 to 1", "-1 to 1"};
    q4.correct_options = {1};
    q4.feedback = "Grades are fractions.";

    doc.quiz = {q1, q2, q3, q4};
    return doc;
}

json demo_answers(bool all_correct)
{
    json answers = json::array({json::array({1}), json::array({0, 1, 3}), "sha1"});
    answers.push_back(all_correct ? json::array({1}) : json::array({0}));
    return json{{"answers", answers}};
}

LoopbackDeployment::LoopbackDeployment(std::filesystem::path storage_root, Clock clock)
    : clock_(std::move(clock)),
      tool_server_(std::make_unique<BackgroundServer>()),
      sim_server_(std::make_unique<BackgroundServer>())
{
    ServiceConfig cfg;
    cfg.listen = "127.0.0.1:" + std::to_string(tool_server_->port());
    cfg.external_base_url = tool_server_->url();
    cfg.storage_path = storage_root / "tool";
    cfg.authoring_tokens["sim"] = std::string(kAuthoringToken);
    cfg.outcome_timeout_seconds = 3;
    tool_ = std::make_unique<ToolProvider>(cfg, clock_);

    const std::string key(kConsumerKey);
    auto cred = tool_->consumers().find(key);
    if (!cred) cred = tool_->consumers().register_consumer(key, std::string(kSecret), "Simulated LMS", clock_());

    sim::SimulatorConfig sim_cfg;
    sim_cfg.tool_base_url = tool_server_->url();
    sim_cfg.outcome_service_url = sim_server_->url() + "/sim/outcomes";
    sim_cfg.gradebook_file = storage_root / "gradebook.json";
    sim_cfg.clock = clock_;
    simulator_ = std::make_unique<sim::ToolConsumerSimulator>(sim_cfg);
    simulator_->add_credential(*cred);

    const auto demo = demo_content();
    if (!tool_->repository().contains(demo.id)) tool_->repository().create_content(demo);

    tool_->mount(tool_server_->server());
    simulator_->mount(sim_server_->server());
    tool_server_->start();
    sim_server_->start();
}

LoopbackDeployment::~LoopbackDeployment()
{
    tool_server_->stop();
    sim_server_->stop();
}

LaunchedSession LoopbackDeployment::launch(const std::string& content_id, const std::string& user_id)
{
    LaunchedSession out;
    httplib::Client lms(simulator_url());
    httplib::Params query{{"content_id", content_id},
                          {"user_id", user_id},
                          {"consumer_key", std::string(kConsumerKey)},
                          {"format", "json"}};
    auto form = lms.Get("/sim/launch-form", query, httplib::Headers{});
    if (!form || form->status != 200) {
        out.body = form ? form->body : "simulator unreachable";
        return out;
    }
    const json j = json::parse(form->body);
    oauth::ParameterList params;
    for (const auto& p : j.at("params")) params.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    out.sourced_id = oauth::find_parameter(params, "lis_result_sourcedid").value_or("");

    std::string url = j.at("url").get<std::string>();
    const std::string path = url.substr(tool_url().size());
    httplib::Client tool(tool_url());
    auto res = tool.Post(path, oauth::encode_form(params), "application/x-www-form-urlencoded");
    if (!res) {
        out.body = "tool unreachable";
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    out.location = res->get_header_value("Location");
    out.token = res->get_header_value(std::string(kSessionHeader));
    return out;
}

HttpResult LoopbackDeployment::fetch_content(const std::string& token)
{
    httplib::Client tool(tool_url());
    auto res = tool.Get("/api/session/" + token + "/content");
    if (!res) return {0, {}};
    return {res->status, res->body};
}

HttpResult LoopbackDeployment::submit(const std::string& token, const json& answers)
{
    httplib::Client tool(tool_url());
    auto res = tool.Post("/api/session/" + token + "/submit", answers.dump(), "application/json");
    if (!res) return {0, {}};
    return {res->status, res->body};
}

std::optional<double> LoopbackDeployment::gradebook_score(const std::string& sourced_id)
{
    httplib::Client lms(simulator_url());
    auto res = lms.Get("/sim/gradebook/" + oauth::percent_encode(sourced_id));
    if (!res || res->status != 200) return std::nullopt;
    const json j = json::parse(res->body);
    if (j.at("score").is_null()) return std::nullopt;
    return j.at("score").get<double>();
}

}  // namespace microlti::simulation
