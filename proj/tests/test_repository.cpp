#include "microlti/repository.hpp"
#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

using namespace microlti::content;
using testsupport::sample_content;
using testsupport::TempDir;

namespace {

ContentError::Kind error_kind(auto&& fn)
{
    try {
        fn();
    } catch (const ContentError& e) {
        return e.kind();
    }
    FAIL("expected ContentError");
    return ContentError::Kind::not_found;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("create, get, update and conflict")
{
    ContentRepository repo(std::make_shared<MemoryDocumentStore>());
    MicroContent doc = sample_content();
    doc.version = 9;
    CHECK(repo.create_content(doc) == "intro-oauth");

    MicroContent stored = repo.get_content("intro-oauth");
    CHECK(stored.version == 1);
    doc.version = 1;
    CHECK(stored == doc);

    CHECK(error_kind([&] { repo.create_content(doc); }) == ContentError::Kind::duplicate_id);

    doc.title = "Revised";
    CHECK(repo.update_content("intro-oauth", doc, 1) == 2);
    CHECK(repo.get_content("intro-oauth").title == "Revised");
    CHECK(error_kind([&] { repo.update_content("intro-oauth", doc, 1); }) ==
          ContentError::Kind::version_conflict);
    CHECK(error_kind([&] { repo.update_content("nope", doc, 1); }) == ContentError::Kind::not_found);

    MicroContent broken = doc;
    broken.quiz.clear();
    CHECK(error_kind([&] { repo.update_content("intro-oauth", broken, 2); }) ==
          ContentError::Kind::validation_failed);
    CHECK(repo.get_content("intro-oauth").version == 2);
}

TEST_CASE("invalid documents are not stored and carry the report")
{
    ContentRepository repo(std::make_shared<MemoryDocumentStore>());
    MicroContent doc = sample_content();
    doc.quiz.clear();
    try {
        repo.create_content(doc);
        FAIL("expected validation failure");
    } catch (const ContentError& e) {
        CHECK(e.kind() == ContentError::Kind::validation_failed);
        CHECK(e.report().has_error("missing-assessment-section"));
    }
    CHECK_FALSE(repo.contains(doc.id));
}

TEST_CASE("remove and not-found")
{
    ContentRepository repo(std::make_shared<MemoryDocumentStore>());
    repo.create_content(sample_content());
    repo.remove_content("intro-oauth");
    CHECK_FALSE(repo.contains("intro-oauth"));
    CHECK(error_kind([&] { repo.get_content("intro-oauth"); }) == ContentError::Kind::not_found);
    CHECK(error_kind([&] { repo.remove_content("intro-oauth"); }) == ContentError::Kind::not_found);
}

TEST_CASE("tag search ranks by Jaccard then id")
{
    ContentRepository repo(std::make_shared<MemoryDocumentStore>());
    auto add = [&](std::string id, std::vector<std::string> tags) {
        MicroContent d = sample_content(id);
        d.tags = std::move(tags);
        repo.create_content(d);
    };
    add("c", {"oauth", "security"});
    add("b", {"lti", "oauth"});
    add("a", {"oauth", "security"});
    add("d", {"video"});

    std::vector<std::string> query{"OAuth", " lti "};
    auto hits = repo.search_by_tags(query);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0] == SearchHit{"b", 1.0});
    CHECK(hits[1].id == "a");
    CHECK(hits[2].id == "c");
    CHECK(hits[1].score == Catch::Approx(1.0 / 3.0));

    std::vector<std::string> blank{" ", ""};
    CHECK(error_kind([&] { repo.search_by_tags(blank); }) == ContentError::Kind::empty_query);
}

TEST_CASE("file store survives restart byte-identically")
{
    TempDir dir;
    std::string before;
    {
        ContentRepository repo(std::make_shared<FileDocumentStore>(dir.path()));
        repo.create_content(sample_content());
        before = canonical_json(repo.get_content("intro-oauth"));
        CHECK(slurp(dir.path() / "documents" / "intro-oauth.json") == before);
    }
    ContentRepository reopened(std::make_shared<FileDocumentStore>(dir.path()));
    CHECK(reopened.list_ids() == std::vector<std::string>{"intro-oauth"});
    CHECK(canonical_json(reopened.get_content("intro-oauth")) == before);

    reopened.remove_content("intro-oauth");
    ContentRepository again(std::make_shared<FileDocumentStore>(dir.path()));
    CHECK(again.list_ids().empty());
    CHECK_FALSE(std::filesystem::exists(dir.path() / "documents" / "intro-oauth.json"));
}

TEST_CASE("NDJSON import is all-or-nothing")
{
    ContentRepository repo(std::make_shared<MemoryDocumentStore>());
    MicroContent bad = sample_content("bad");
    bad.explanation = {ExplanationKind::video, "https://v.example/a", std::nullopt, 1000};

    std::stringstream in;
    in << canonical_json(sample_content("one")) << "\n\n"
       << canonical_json(bad) << "\n"
       << "{not json\n"
       << canonical_json(sample_content("one")) << "\n";
    auto result = repo.import_ndjson(in);
    CHECK(result.imported.empty());
    REQUIRE(result.rejected.size() == 3);
    CHECK(result.rejected[0].first == 3);
    CHECK(result.rejected[1].first == 4);
    CHECK(result.rejected[2].first == 5);
    REQUIRE(result.reports.size() == 1);
    CHECK(result.reports[0].second.has_error("video-exceeds-session-cap"));
    CHECK(repo.list_ids().empty());
}

TEST_CASE("NDJSON export then import restores identical documents")
{
    ContentRepository src(std::make_shared<MemoryDocumentStore>());
    src.create_content(sample_content("one"));
    src.create_content(sample_content("two"));
    MicroContent two = src.get_content("two");
    two.title = "Second";
    src.update_content("two", two, 1);

    std::stringstream ss;
    src.export_ndjson(ss);
    const std::string exported = ss.str();

    ContentRepository dst(std::make_shared<MemoryDocumentStore>());
    auto result = dst.import_ndjson(ss);
    CHECK(result.rejected.empty());
    CHECK(result.imported == std::vector<std::string>{"one", "two"});
    CHECK(dst.get_content("two").version == 2);

    std::stringstream again;
    dst.export_ndjson(again);
    CHECK(again.str() == exported);
}

TEST_CASE("concurrent updates: exactly one writer wins each version")
{
    ContentRepository repo(std::make_shared<MemoryDocumentStore>());
    repo.create_content(sample_content());
    std::atomic<int> wins{0};
    std::atomic<int> conflicts{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            MicroContent d = sample_content();
            d.title = "writer " + std::to_string(t);
            try {
                repo.update_content("intro-oauth", d, 1);
                ++wins;
            } catch (const ContentError& e) {
                if (e.kind() == ContentError::Kind::version_conflict) ++conflicts;
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(wins == 1);
    CHECK(conflicts == 7);
    CHECK(repo.get_content("intro-oauth").version == 2);
}
