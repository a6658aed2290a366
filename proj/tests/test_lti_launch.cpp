#include "launch_matrix.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <unordered_set>

using namespace microlti::lti;
using testsupport::LaunchHarness;
using testsupport::reasons;

TEST_CASE("each launch check rejects in isolation")
{
    for (const auto& c : testsupport::launch_matrix()) {
        LaunchHarness h;
        INFO(c.name);
        CHECK(testsupport::matrix_case_holds(c, c.run(h)));
    }
}

TEST_CASE("successful launch carries the LMS context into the session")
{
    LaunchHarness h;
    auto result = h.launch(LaunchHarness::signed_request(LaunchHarness::valid_params("n1")));
    REQUIRE(std::holds_alternative<Session>(result));
    const auto& s = std::get<Session>(result);
    CHECK(s.token.size() == 48);
    CHECK(s.consumer_key == "moodle-test");
    CHECK(s.user_id == "student-7");
    CHECK(s.roles == "Learner");
    CHECK(s.resource_link_id == "rl-1");
    CHECK(s.content_id == "intro-oauth");
    CHECK(s.result_sourcedid == "sid-7");
    CHECK(s.outcome_service_url == "https://lms.example/outcomes");
    CHECK(s.issued_at == LaunchHarness::kNow);
    CHECK(s.has_outcome_routing());
    CHECK(h.sessions.find(s.token, LaunchHarness::kNow));
}

TEST_CASE("all failing checks are reported together")
{
    LaunchHarness h;
    auto p = LaunchHarness::valid_params("n1");
    LaunchHarness::set(p, "lti_version", "LTI-1p1");
    LaunchHarness::set(p, "oauth_callback", "");
    auto req = LaunchHarness::signed_request(p, "PUT");
    req.oauth_signature = "";
    auto r = reasons(h.launch(req));
    CHECK(r == std::vector<RejectReason>{RejectReason::not_post, RejectReason::bad_version,
                                         RejectReason::bad_callback, RejectReason::bad_signature});
    auto text = std::get<Rejection>(h.launch(req)).to_text();
    CHECK(text == "not-post\nbad-version\nbad-callback\nbad-signature\n");
}

TEST_CASE("a rejected launch does not consume its nonce")
{
    LaunchHarness h;
    auto bad = LaunchHarness::signed_request(LaunchHarness::valid_params("n1"));
    bad.oauth_signature = "AAAA";
    CHECK(reasons(h.launch(bad)) == std::vector<RejectReason>{RejectReason::bad_signature});
    CHECK_FALSE(h.nonces.contains("moodle-test", "n1"));
    CHECK(std::holds_alternative<Session>(
        h.launch(LaunchHarness::signed_request(LaunchHarness::valid_params("n1")))));
    CHECK(h.nonces.contains("moodle-test", "n1"));
}

TEST_CASE("timestamp edges")
{
    for (auto [offset, ok] : std::vector<std::pair<std::int64_t, bool>>{
             {-300, true}, {300, true}, {-301, false}, {301, false}}) {
        LaunchHarness h;
        auto p = LaunchHarness::valid_params("n-" + std::to_string(offset));
        LaunchHarness::set(p, "oauth_timestamp", std::to_string(LaunchHarness::kNow + offset));
        auto r = h.launch(LaunchHarness::signed_request(p));
        INFO(offset);
        CHECK(std::holds_alternative<Session>(r) == ok);
    }
    LaunchHarness h;
    auto p = LaunchHarness::valid_params("n-junk");
    LaunchHarness::set(p, "oauth_timestamp", "17e8");
    CHECK(reasons(h.launch(LaunchHarness::signed_request(p))) ==
          std::vector<RejectReason>{RejectReason::stale_timestamp});
}

TEST_CASE("signature covers the launch URL and secret")
{
    LaunchHarness h;
    auto other_url = LaunchHarness::signed_request(LaunchHarness::valid_params("n1"), "POST",
                                                   "https://tool.example/lti/launch/other");
    other_url.launch_url = LaunchHarness::kUrl;
    CHECK(reasons(h.launch(other_url)) == std::vector<RejectReason>{RejectReason::bad_signature});

    auto wrong_secret = LaunchHarness::signed_request(LaunchHarness::valid_params("n2"), "POST",
                                                      LaunchHarness::kUrl, "guess");
    CHECK(reasons(h.launch(wrong_secret)) == std::vector<RejectReason>{RejectReason::bad_signature});

    auto p = LaunchHarness::valid_params("n3");
    LaunchHarness::set(p, "oauth_signature_method", "PLAINTEXT");
    CHECK(reasons(h.launch(LaunchHarness::signed_request(p))) ==
          std::vector<RejectReason>{RejectReason::bad_signature});
}

TEST_CASE("content is resolved from custom_content_id or the URL")
{
    LaunchHarness h;
    auto p = LaunchHarness::valid_params("n1");
    LaunchHarness::set(p, "custom_content_id", "intro-oauth");
    auto r = h.launch(LaunchHarness::signed_request(p, "POST", "https://tool.example/lti/launch/whatever"));
    REQUIRE(std::holds_alternative<Session>(r));
    CHECK(std::get<Session>(r).content_id == "intro-oauth");

    auto missing = LaunchHarness::signed_request(LaunchHarness::valid_params("n2"), "POST",
                                                 "https://tool.example/lti/launch/nothing-here");
    CHECK(reasons(h.launch(missing)) == std::vector<RejectReason>{RejectReason::unknown_content});

    auto with_query = LaunchHarness::signed_request(LaunchHarness::valid_params("n3"), "POST",
                                                    std::string(LaunchHarness::kUrl) + "?x=1");
    CHECK(std::holds_alternative<Session>(h.launch(with_query)));
}

TEST_CASE("disabled consumers cannot launch")
{
    LaunchHarness h;
    h.registry.set_enabled("moodle-test", false);
    CHECK(reasons(h.launch(LaunchHarness::signed_request(LaunchHarness::valid_params("n1")))) ==
          std::vector<RejectReason>{RejectReason::unknown_consumer});
}

TEST_CASE("required field bookkeeping")
{
    auto req = LaunchRequest::from_form("POST", LaunchHarness::kUrl, {{"oauth_nonce", "x"}});
    auto missing = req.missing_required();
    CHECK(missing.size() == 9);
    CHECK(std::find(missing.begin(), missing.end(), "oauth_nonce") == missing.end());
    CHECK(std::find(missing.begin(), missing.end(), "resource_link_id") != missing.end());
    CHECK_FALSE(req.user_id.has_value());
}

TEST_CASE("sessions expire after their ttl")
{
    SessionStore store(60);
    Session s;
    s.content_id = "c";
    auto issued = store.issue(s, 1000);
    CHECK(issued.ttl == 60);
    CHECK(store.find(issued.token, 1060));
    CHECK_FALSE(store.find(issued.token, 1061));
    CHECK_FALSE(store.find("nope", 1000));
    CHECK(store.purge_expired(1061) == 1);
    CHECK(store.size() == 0);
}

TEST_CASE("session routing requires both sourcedid and service URL")
{
    Session s;
    CHECK_FALSE(s.has_outcome_routing());
    s.result_sourcedid = "sid";
    CHECK_FALSE(s.has_outcome_routing());
    s.outcome_service_url = "";
    CHECK_FALSE(s.has_outcome_routing());
    s.outcome_service_url = "http://x";
    CHECK(s.has_outcome_routing());
}

TEST_CASE("session tokens are unique over one million draws")
{
    std::unordered_set<std::string> seen;
    seen.reserve(1'000'000);
    for (int i = 0; i < 1'000'000; ++i) REQUIRE(seen.insert(generate_session_token()).second);
}

TEST_CASE("consumer registry persists and rejects duplicates")
{
    testsupport::TempDir dir;
    const auto file = dir.path() / "consumers.json";
    {
        ConsumerRegistry reg(file);
        auto c = reg.register_consumer("campus", "secret-1", "Moodle Campus", 42);
        CHECK(c.enabled);
        CHECK(c.created_at == 42);
        CHECK_THROWS_AS(reg.register_consumer("campus", "x", "y", 43), ConsumerError);
        reg.register_consumer("other", "secret-2", "Other", 44);
        reg.set_enabled("other", false);
    }
    ConsumerRegistry reopened(file);
    auto u = reopened.find("campus");
    REQUIRE(u);
    CHECK(u->shared_secret == "secret-1");
    CHECK(u->lms_name == "Moodle Campus");
    REQUIRE(reopened.find("other"));
    CHECK_FALSE(reopened.find("other")->enabled);
    CHECK(reopened.list().size() == 2);

    try {
        reopened.register_consumer("", "s", "n", 0);
        FAIL("empty key accepted");
    } catch (const ConsumerError& e) {
        CHECK(e.kind() == ConsumerError::Kind::invalid);
    }
    try {
        reopened.set_enabled("ghost", true);
        FAIL("unknown key accepted");
    } catch (const ConsumerError& e) {
        CHECK(e.kind() == ConsumerError::Kind::not_found);
    }
}
