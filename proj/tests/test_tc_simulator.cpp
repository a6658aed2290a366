#include "launch_fixture.hpp"
#include "microlti/service.hpp"
#include "microlti/tc_simulator.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <httplib.h>

using namespace microlti;
using namespace microlti::sim;
using testsupport::LaunchHarness;

namespace {

constexpr std::int64_t kNow = LaunchHarness::kNow;
const lti::ConsumerCredential kCred{LaunchHarness::kKey, LaunchHarness::kSecret, "Test LMS", true, 0};
const std::string kOutcomes = "http://lms.example/sim/outcomes";

SimulatorConfig config(std::optional<std::filesystem::path> gradebook = std::nullopt)
{
    SimulatorConfig c;
    c.tool_base_url = "https://tool.example";
    c.outcome_service_url = kOutcomes;
    c.gradebook_file = std::move(gradebook);
    c.clock = [] { return kNow; };
    return c;
}

lti::LaunchResult deliver(LaunchHarness& h, const LaunchForm& form)
{
    return h.launch(lti::LaunchRequest::from_form("POST", form.url, *oauth::parse_form(form.body())));
}

lis::SignedPost signed_outcome(const lis::OutcomeRequest& req, std::int64_t ts = kNow,
                               const lti::ConsumerCredential& cred = kCred)
{
    return lis::sign_outcome_post(kOutcomes, cred, lis::build_outcome_xml(req), ts);
}

lis::OutcomeResponse response_of(const HttpReply& reply)
{
    REQUIRE(reply.status == 200);
    return std::get<lis::OutcomeResponse>(lis::parse_outcome_xml(reply.body));
}

HttpReply post(ToolConsumerSimulator& sim, const lis::SignedPost& p)
{
    return sim.outcome_endpoint("POST", p.authorization, p.body);
}

}  // namespace

TEST_CASE("simulated launches verify at the tool")
{
    LaunchHarness h;
    ToolConsumerSimulator sim(config());
    auto form = sim.make_launch_form({"u1", "Ada"}, "intro-oauth", kCred, kNow);
    CHECK(form.url == "https://tool.example/lti/launch/intro-oauth");
    auto result = deliver(h, form);
    REQUIRE(std::holds_alternative<lti::Session>(result));
    const auto& session = std::get<lti::Session>(result);
    CHECK(session.result_sourcedid == oauth::find_parameter(form.params, "lis_result_sourcedid"));
    CHECK(session.outcome_service_url == kOutcomes);
    CHECK(session.resource_link_id == "rl-intro-oauth");
    CHECK(form.to_html().find("name=\"oauth_signature\"") != std::string::npos);
}

TEST_CASE("custom_content_id is sent on request")
{
    LaunchHarness h;
    auto cfg = config();
    cfg.send_custom_content_id = true;
    ToolConsumerSimulator sim(cfg);
    auto form = sim.make_launch_form({"u1", "Ada"}, "intro-oauth", kCred, kNow);
    CHECK(oauth::find_parameter(form.params, "custom_content_id") == "intro-oauth");
    CHECK(std::holds_alternative<lti::Session>(deliver(h, form)));
}

TEST_CASE("sourcedids are stable per user and resource link")
{
    ToolConsumerSimulator sim(config());
    auto sid = [&](std::string user, std::string content) {
        return *oauth::find_parameter(sim.make_launch_form({user, user}, content, kCred, kNow).params,
                                      "lis_result_sourcedid");
    };
    const auto a = sid("u1", "c1");
    CHECK(sid("u1", "c1") == a);
    CHECK(sid("u2", "c1") != a);
    CHECK(sid("u1", "c2") != a);
    CHECK(sim.gradebook().size() == 3);
    CHECK_FALSE(sim.gradebook_get(a).score.has_value());
    CHECK_THROWS_AS(sim.gradebook_get("nope"), GradebookError);
}

TEST_CASE("fault injection produces the matching rejection")
{
    using lti::RejectReason;
    auto first_reasons = [](Faults faults) {
        LaunchHarness h;
        ToolConsumerSimulator sim(config());
        sim.set_faults(faults);
        return testsupport::reasons(deliver(h, sim.make_launch_form({"u1", "Ada"}, "intro-oauth", kCred, kNow)));
    };
    CHECK(first_reasons(Faults{301, false, false, std::nullopt}) ==
          std::vector<RejectReason>{RejectReason::stale_timestamp});
    CHECK(first_reasons(Faults{-300, false, false, std::nullopt}).empty());
    CHECK(first_reasons(Faults{0, false, true, std::nullopt}) ==
          std::vector<RejectReason>{RejectReason::bad_signature});
    CHECK(first_reasons(Faults{0, false, false, "wrong"}) ==
          std::vector<RejectReason>{RejectReason::bad_signature});

    LaunchHarness h;
    ToolConsumerSimulator sim(config());
    sim.set_faults(Faults{0, true, false, std::nullopt});
    CHECK(std::holds_alternative<lti::Session>(deliver(h, sim.make_launch_form({"u1", "Ada"}, "intro-oauth", kCred, kNow))));
    CHECK(testsupport::reasons(deliver(h, sim.make_launch_form({"u2", "Bo"}, "intro-oauth", kCred, kNow))) ==
          std::vector<RejectReason>{RejectReason::replayed_nonce});
}

TEST_CASE("outcome service applies replace, read and delete")
{
    ToolConsumerSimulator sim(config());
    const auto sid = *oauth::find_parameter(
        sim.make_launch_form({"u1", "Ada"}, "c1", kCred, kNow).params, "lis_result_sourcedid");

    auto r = response_of(post(sim, signed_outcome({lis::Operation::replace_result, "m1", sid, 0.75})));
    CHECK(r.status == lis::Status::success);
    CHECK(r.message_ref == "m1");
    CHECK(sim.gradebook_get(sid).score == 0.75);

    r = response_of(post(sim, signed_outcome({lis::Operation::read_result, "m2", sid, std::nullopt})));
    CHECK(r.score == 0.75);

    r = response_of(post(sim, signed_outcome({lis::Operation::replace_result, "m3", sid, 1.0})));
    CHECK(sim.gradebook_get(sid).score == 1.0);

    r = response_of(post(sim, signed_outcome({lis::Operation::delete_result, "m4", sid, std::nullopt})));
    CHECK(r.status == lis::Status::success);
    CHECK_FALSE(sim.gradebook_get(sid).score.has_value());

    r = response_of(post(sim, signed_outcome({lis::Operation::read_result, "m5", "ghost", std::nullopt})));
    CHECK(r.status == lis::Status::failure);
    CHECK(r.description == "sourcedId not found");
}

TEST_CASE("out-of-range scores get a failure status and leave the gradebook alone")
{
    ToolConsumerSimulator sim(config());
    const auto sid = *oauth::find_parameter(
        sim.make_launch_form({"u1", "Ada"}, "c1", kCred, kNow).params, "lis_result_sourcedid");
    response_of(post(sim, signed_outcome({lis::Operation::replace_result, "m0", sid, 0.5})));

    for (const std::string score : {"1.01", "7"}) {
        std::string body = lis::build_outcome_xml({lis::Operation::replace_result, "m1", sid, 0.5});
        body.replace(body.find(">0.5<") + 1, 3, score);
        auto p = lis::sign_outcome_post(kOutcomes, kCred, body, kNow);
        auto r = response_of(post(sim, p));
        CHECK(r.status == lis::Status::failure);
        CHECK(r.description == "score out of range [0, 1]");
        CHECK(sim.gradebook_get(sid).score == 0.5);
    }
    std::string body = lis::build_outcome_xml({lis::Operation::replace_result, "m1", sid, 0.5});
    body.replace(body.find(">0.5<") + 1, 3, "-0.01");
    auto r = response_of(post(sim, lis::sign_outcome_post(kOutcomes, kCred, body, kNow)));
    CHECK(r.status == lis::Status::failure);
    CHECK(sim.gradebook_get(sid).score == 0.5);
}

TEST_CASE("outcome authentication failures answer 401")
{
    ToolConsumerSimulator sim(config());
    sim.add_credential(kCred);
    const lis::OutcomeRequest req{lis::Operation::read_result, "m", "x", std::nullopt};

    auto ok = signed_outcome(req);
    CHECK(post(sim, ok).status == 200);
    CHECK(post(sim, ok).status == 401);  // replayed nonce

    CHECK(post(sim, signed_outcome(req, kNow - 301)).status == 401);
    CHECK(post(sim, signed_outcome(req, kNow + 301)).status == 401);
    CHECK(post(sim, signed_outcome(req, kNow + 300)).status == 200);
    CHECK(post(sim, signed_outcome(req, kNow, {"stranger", "s", "", true, 0})).status == 401);
    CHECK(post(sim, signed_outcome(req, kNow, {kCred.consumer_key, "wrong", "", true, 0})).status == 401);
    CHECK(sim.outcome_endpoint("POST", "", ok.body).status == 401);
    CHECK(sim.outcome_endpoint("GET", ok.authorization, ok.body).status == 405);

    auto other_url = lis::sign_outcome_post("http://lms.example/elsewhere", kCred, lis::build_outcome_xml(req), kNow);
    CHECK(post(sim, other_url).status == 401);
}

TEST_CASE("every single-byte body mutation is rejected")
{
    ToolConsumerSimulator sim(config());
    sim.add_credential(kCred);
    const auto p = signed_outcome({lis::Operation::replace_result, "m", "x", 0.25});
    for (std::size_t i = 0; i < p.body.size(); ++i) {
        for (unsigned char flip : {0x01, 0x20, 0x80}) {
            std::string body = p.body;
            body[i] = static_cast<char>(static_cast<unsigned char>(body[i]) ^ flip);
            REQUIRE(sim.outcome_endpoint("POST", p.authorization, body).status == 401);
        }
    }
    CHECK(post(sim, p).status == 200);
}

TEST_CASE("gradebook survives a simulator restart")
{
    testsupport::TempDir dir;
    const auto file = dir.path() / "gradebook.json";
    std::string sid;
    {
        ToolConsumerSimulator sim(config(file));
        sid = *oauth::find_parameter(sim.make_launch_form({"u1", "Ada"}, "c1", kCred, kNow).params,
                                     "lis_result_sourcedid");
        response_of(post(sim, signed_outcome({lis::Operation::replace_result, "m", sid, 0.6667})));
    }
    ToolConsumerSimulator again(config(file));
    CHECK(again.gradebook_get(sid).score == 0.6667);
    auto form = again.make_launch_form({"u1", "Ada"}, "c1", kCred, kNow);
    CHECK(oauth::find_parameter(form.params, "lis_result_sourcedid") == sid);
}

TEST_CASE("simulator HTTP routes")
{
    BackgroundServer server;
    auto cfg = config();
    cfg.outcome_service_url = server.url() + "/sim/outcomes";
    ToolConsumerSimulator sim(cfg);
    sim.add_credential(kCred);
    sim.mount(server.server());
    server.start();

    httplib::Client client(server.url());
    auto html = client.Get("/sim/launch-form?content_id=c1&user_id=u9");
    REQUIRE(html);
    CHECK(html->status == 200);
    CHECK(html->body.find("<form method=\"post\"") != std::string::npos);

    auto j = client.Get("/sim/launch-form?content_id=c1&user_id=u9&format=json");
    REQUIRE(j);
    auto parsed = nlohmann::json::parse(j->body);
    CHECK(parsed["url"] == "https://tool.example/lti/launch/c1");
    std::string sid;
    for (const auto& p : parsed["params"])
        if (p[0] == "lis_result_sourcedid") sid = p[1];
    CHECK_FALSE(sid.empty());

    CHECK(client.Get("/sim/launch-form")->status == 400);
    CHECK(client.Get("/sim/launch-form?content_id=c1&consumer_key=ghost")->status == 404);

    auto entry = client.Get("/sim/gradebook/" + sid);
    REQUIRE(entry);
    CHECK(entry->status == 200);
    CHECK(nlohmann::json::parse(entry->body)["score"].is_null());
    CHECK(client.Get("/sim/gradebook/ghost")->status == 404);

    auto reply = lis::send_outcome(cfg.outcome_service_url, kCred,
                                   {lis::Operation::replace_result, lis::generate_message_id(), sid, 0.75},
                                   lis::SendOptions{[] { return kNow; }, 2, 2});
    CHECK(reply.status == lis::Status::success);
    CHECK(nlohmann::json::parse(client.Get("/sim/gradebook/" + sid)->body)["score"] == 0.75);
}
