#pragma once

#include "microlti/content.hpp"
#include "microlti/oauth.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("microlti-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// A small valid text unit with one question of each kind.
inline microlti::content::MicroContent sample_content(const std::string& id = "intro-oauth")
{
    using namespace microlti::content;
    MicroContent doc;
    doc.id = id;
    doc.title = "OAuth in five minutes";
    doc.topic = "Security";
    doc.authors = {"A. Author"};
    doc.date = "2023-05-14";
    doc.tags = {"oauth", "security"};
    doc.introduction = "Why requests are signed.";
    doc.explanation.kind = ExplanationKind::text;
    doc.explanation.body = "A shared secret signs every launch.";

    Question single;
    single.kind = QuestionKind::multiple_choice_single;
    single.prompt = "Pick the hash.";
    single.options = {"MD5", "SHA-1", "CRC32"};
    single.correct_options = {1};
    single.feedback = "Check the method name.";

    Question multi;
    multi.kind = QuestionKind::multiple_choice_multi;
    multi.prompt = "Which are signed?";
    multi.options = {"method", "url", "signature"};
    multi.correct_options = {0, 1};

    Question text;
    text.kind = QuestionKind::short_answer;
    text.prompt = "Name the encoding of the digest.";
    text.accepted_answers = {"base64"};

    doc.quiz = {single, multi, text};
    return doc;
}

/// Printable ASCII and some multi-byte UTF-8, including reserved URL characters.
inline std::string random_text(std::mt19937_64& rng, std::size_t max_len)
{
    static const std::vector<std::string> alphabet = {
        "a", "Z", "0", "9", "-", ".", "_", "~", " ", "+", "&", "=", "%", "/", "?", "#",
        "!", "*", "'", "(", ")", ":", "@", ",", ";", "$", "\"", "é", "ß", "中", "€", "\t"};
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string out;
    for (std::size_t i = len(rng); i > 0; --i) out += alphabet[pick(rng)];
    return out;
}

}  // namespace testsupport
