#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace microlti::content {

using json = nlohmann::json;

// Session length cap for one unit, and the recommended upper bound for a video.
inline constexpr std::int64_t kMaxVideoSeconds = 900;
inline constexpr std::int64_t kRecommendedVideoSeconds = 540;
inline constexpr std::size_t kMaxIntroductionChars = 1000;

enum class ExplanationKind { video, interactive, visual, text };
enum class QuestionKind { multiple_choice_single, multiple_choice_multi, short_answer };

struct Explanation {
    ExplanationKind kind = ExplanationKind::text;
    std::optional<std::string> uri;
    std::optional<std::string> body;
    std::optional<std::int64_t> duration;  // seconds

    bool operator==(const Explanation&) const = default;
};

struct Question {
    QuestionKind kind = QuestionKind::multiple_choice_single;
    std::string prompt;
    std::vector<std::string> options;
    std::vector<std::int64_t> correct_options;  // choice questions
    std::vector<std::string> accepted_answers;  // short_answer
    std::optional<std::string> feedback;

    bool operator==(const Question&) const = default;
};

/// One indivisible unit: metadata, introduction, explanation and quiz.
struct MicroContent {
    std::string id;
    std::string title;
    std::string topic;
    std::vector<std::string> authors;
    std::string date;  // YYYY-MM-DD
    std::vector<std::string> tags;
    std::string introduction;
    Explanation explanation;
    std::vector<Question> quiz;
    std::int64_t version = 1;

    bool operator==(const MicroContent&) const = default;
};

struct Finding {
    std::string rule_id;
    std::string message;

    bool operator==(const Finding&) const = default;
};

struct ValidationReport {
    std::vector<Finding> errors;
    std::vector<Finding> warnings;

    bool ok() const { return errors.empty(); }
    bool has_error(std::string_view rule) const;
    bool has_warning(std::string_view rule) const;
};

class ContentError : public std::runtime_error {
public:
    enum class Kind {
        malformed_document,
        validation_failed,
        duplicate_id,
        not_found,
        version_conflict,
        empty_query,
    };

    ContentError(Kind kind, const std::string& what, ValidationReport report = {})
        : std::runtime_error(what), kind_(kind), report_(std::move(report))
    {
    }

    Kind kind() const { return kind_; }
    const ValidationReport& report() const { return report_; }

private:
    Kind kind_;
    ValidationReport report_;
};

std::string_view to_string(ExplanationKind kind);
std::string_view to_string(QuestionKind kind);
std::string_view to_string(ContentError::Kind kind);

json to_json(const MicroContent& doc);

/// Structural parse; throws ContentError(malformed_document) on wrong shapes.
/// Invariants are checked separately by validate_content.
MicroContent content_from_json(const json& j);
MicroContent parse_content(std::string_view text);

/// UTF-8, sorted keys, no insignificant whitespace.
std::string canonical_json(const MicroContent& doc);

/// The document as students see it: every `correct` and `feedback` field removed.
json student_view(const MicroContent& doc);

json to_json(const ValidationReport& report);

ValidationReport validate_content(const MicroContent& doc);

// ---- quiz scoring -------------------------------------------------------

/// One answer: nothing, the selected option indices, or free text.
using Response = std::variant<std::monostate, std::vector<std::int64_t>, std::string>;

struct QuestionOutcome {
    bool correct = false;
    std::string feedback;
};

struct QuizGrade {
    double score = 0.0;
    std::vector<QuestionOutcome> per_question;
};

/// `{"answers": [[0], [1, 2], "text", null, ...]}` or the bare array.
/// Throws std::invalid_argument on any other shape.
std::vector<Response> responses_from_json(const json& j);

/// Missing or wrongly typed answers count as wrong.
QuizGrade grade_quiz(const MicroContent& doc, std::span<const Response> answers);
double score_quiz(const MicroContent& doc, std::span<const Response> answers);

/// Trim surrounding whitespace and fold ASCII case.
std::string normalize_short_answer(std::string_view text);

// ---- tag search ---------------------------------------------------------

struct SearchHit {
    std::string id;
    double score = 0.0;

    bool operator==(const SearchHit&) const = default;
};

/// Lowercased, trimmed, empties dropped.
std::vector<std::string> normalize_terms(std::span<const std::string> terms);

/// |a ∩ b| / |a ∪ b| over distinct terms; 0 when both are empty.
double jaccard(std::span<const std::string> a, std::span<const std::string> b);

}  // namespace microlti::content
