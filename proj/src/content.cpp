#include "microlti/content.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace microlti::content {

namespace {

template <typename Enum, std::size_t N>
Enum enum_from(const json& j, const std::pair<Enum, std::string_view> (&table)[N],
               const char* field)
{
    if (!j.is_string())
        throw ContentError(ContentError::Kind::malformed_document,
                           std::string(field) + " must be a string");
    const auto& s = j.get_ref<const std::string&>();
    for (const auto& [value, name] : table) {
        if (name == s) return value;
    }
    throw ContentError(ContentError::Kind::malformed_document,
                       "unknown " + std::string(field) + " '" + s + "'");
}

constexpr std::pair<ExplanationKind, std::string_view> kExplanationKinds[] = {
    {ExplanationKind::video, "video"},
    {ExplanationKind::interactive, "interactive"},
    {ExplanationKind::visual, "visual"},
    {ExplanationKind::text, "text"},
};

constexpr std::pair<QuestionKind, std::string_view> kQuestionKinds[] = {
    {QuestionKind::multiple_choice_single, "multiple_choice_single"},
    {QuestionKind::multiple_choice_multi, "multiple_choice_multi"},
    {QuestionKind::short_answer, "short_answer"},
};

[[noreturn]] void malformed(const std::string& what)
{
    throw ContentError(ContentError::Kind::malformed_document, what);
}

const json& require(const json& obj, const char* key)
{
    auto it = obj.find(key);
    if (it == obj.end()) malformed(std::string("missing field '") + key + "'");
    return *it;
}

std::string get_string(const json& obj, const char* key)
{
    const json& v = require(obj, key);
    if (!v.is_string()) malformed(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

std::optional<std::string> get_optional_string(const json& obj, const char* key)
{
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) malformed(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::vector<std::string> get_string_list(const json& obj, const char* key)
{
    const json& v = require(obj, key);
    if (!v.is_array()) malformed(std::string("field '") + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& item : v) {
        if (!item.is_string()) malformed(std::string("'") + key + "' entries must be strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

Question question_from_json(const json& j)
{
    if (!j.is_object()) malformed("quiz entries must be objects");
    Question q;
    q.kind = enum_from(require(j, "kind"), kQuestionKinds, "question kind");
    q.prompt = get_string(j, "prompt");
    q.options = j.contains("options") ? get_string_list(j, "options") : std::vector<std::string>{};
    q.feedback = get_optional_string(j, "feedback");

    const json& correct = require(j, "correct");
    if (!correct.is_array()) malformed("field 'correct' must be an array");
    for (const auto& c : correct) {
        if (q.kind == QuestionKind::short_answer) {
            if (!c.is_string()) malformed("short_answer 'correct' entries must be strings");
            q.accepted_answers.push_back(c.get<std::string>());
        } else {
            if (!c.is_number_integer()) malformed("choice 'correct' entries must be integers");
            q.correct_options.push_back(c.get<std::int64_t>());
        }
    }
    return q;
}

json question_to_json(const Question& q)
{
    json j = {
        {"kind", to_string(q.kind)},
        {"prompt", q.prompt},
        {"options", q.options},
    };
    if (q.kind == QuestionKind::short_answer)
        j["correct"] = q.accepted_answers;
    else
        j["correct"] = q.correct_options;
    if (q.feedback) j["feedback"] = *q.feedback;
    return j;
}

std::size_t utf8_length(std::string_view s)
{
    return static_cast<std::size_t>(std::count_if(
        s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

bool is_blank(std::string_view s)
{
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

bool is_url_safe_id(std::string_view id)
{
    if (id.empty() || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~';
    });
}

bool is_iso_date(std::string_view d)
{
    if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
        if (!std::isdigit(static_cast<unsigned char>(d[i]))) return false;
    }
    int month = (d[5] - '0') * 10 + (d[6] - '0');
    int day = (d[8] - '0') * 10 + (d[9] - '0');
    if (month < 1 || month > 12 || day < 1) return false;
    static constexpr int days[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (day > days[month - 1]) return false;
    if (month == 2 && day == 29) {
        int year = std::stoi(std::string(d.substr(0, 4)));
        bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
        if (!leap) return false;
    }
    return true;
}

bool is_normalized_tag(std::string_view tag)
{
    if (tag.empty() || is_blank(tag)) return false;
    return std::none_of(tag.begin(), tag.end(), [](unsigned char c) {
        return std::isupper(c) || std::isspace(c);
    });
}

void strip_answer_keys(json& j)
{
    if (j.is_object()) {
        j.erase("correct");
        for (auto& [_, v] : j.items()) strip_answer_keys(v);
    } else if (j.is_array()) {
        for (auto& v : j) strip_answer_keys(v);
    }
}

std::string to_lower_ascii(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim_space(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_question_correct(const Question& q, const Response& r)
{
    if (q.kind == QuestionKind::short_answer) {
        const auto* text = std::get_if<std::string>(&r);
        if (!text) return false;
        const std::string given = normalize_short_answer(*text);
        return std::any_of(q.accepted_answers.begin(), q.accepted_answers.end(),
                           [&](const std::string& a) { return normalize_short_answer(a) == given; });
    }
    const auto* selected = std::get_if<std::vector<std::int64_t>>(&r);
    if (!selected) return false;
    std::set<std::int64_t> chosen(selected->begin(), selected->end());
    std::set<std::int64_t> expected(q.correct_options.begin(), q.correct_options.end());
    return !expected.empty() && chosen == expected;
}

}  // namespace

bool ValidationReport::has_error(std::string_view rule) const
{
    return std::any_of(errors.begin(), errors.end(),
                       [&](const Finding& f) { return f.rule_id == rule; });
}

bool ValidationReport::has_warning(std::string_view rule) const
{
    return std::any_of(warnings.begin(), warnings.end(),
                       [&](const Finding& f) { return f.rule_id == rule; });
}

std::string_view to_string(ExplanationKind kind)
{
    for (const auto& [value, name] : kExplanationKinds) {
        if (value == kind) return name;
    }
    return "text";
}

std::string_view to_string(QuestionKind kind)
{
    for (const auto& [value, name] : kQuestionKinds) {
        if (value == kind) return name;
    }
    return "short_answer";
}

std::string_view to_string(ContentError::Kind kind)
{
    switch (kind) {
    case ContentError::Kind::malformed_document: return "malformed-document";
    case ContentError::Kind::validation_failed: return "validation-failed";
    case ContentError::Kind::duplicate_id: return "duplicate-id";
    case ContentError::Kind::not_found: return "not-found";
    case ContentError::Kind::version_conflict: return "version-conflict";
    case ContentError::Kind::empty_query: return "empty-query";
    }
    return "unknown";
}

json to_json(const MicroContent& doc)
{
    json explanation = {{"kind", to_string(doc.explanation.kind)}};
    if (doc.explanation.uri) explanation["uri"] = *doc.explanation.uri;
    if (doc.explanation.body) explanation["body"] = *doc.explanation.body;
    if (doc.explanation.duration) explanation["duration"] = *doc.explanation.duration;

    json quiz = json::array();
    for (const auto& q : doc.quiz) quiz.push_back(question_to_json(q));

    return json{
        {"id", doc.id},
        {"title", doc.title},
        {"topic", doc.topic},
        {"authors", doc.authors},
        {"date", doc.date},
        {"tags", doc.tags},
        {"introduction", doc.introduction},
        {"explanation", std::move(explanation)},
        {"quiz", std::move(quiz)},
        {"version", doc.version},
    };
}

MicroContent content_from_json(const json& j)
{
    if (!j.is_object()) malformed("document must be a JSON object");
    MicroContent doc;
    doc.id = get_string(j, "id");
    doc.title = get_string(j, "title");
    doc.topic = get_string(j, "topic");
    doc.authors = j.contains("authors") ? get_string_list(j, "authors") : std::vector<std::string>{};
    doc.date = get_string(j, "date");
    doc.tags = j.contains("tags") ? get_string_list(j, "tags") : std::vector<std::string>{};
    doc.introduction = j.contains("introduction") ? get_string(j, "introduction") : std::string{};

    if (auto it = j.find("explanation"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) malformed("field 'explanation' must be an object");
        doc.explanation.kind = enum_from(require(*it, "kind"), kExplanationKinds, "explanation kind");
        doc.explanation.uri = get_optional_string(*it, "uri");
        doc.explanation.body = get_optional_string(*it, "body");
        if (auto d = it->find("duration"); d != it->end() && !d->is_null()) {
            if (!d->is_number_integer()) malformed("field 'duration' must be an integer (seconds)");
            doc.explanation.duration = d->get<std::int64_t>();
        }
    }

    if (auto it = j.find("quiz"); it != j.end()) {
        if (!it->is_array()) malformed("field 'quiz' must be an array");
        for (const auto& q : *it) doc.quiz.push_back(question_from_json(q));
    }

    if (auto it = j.find("version"); it != j.end()) {
        if (!it->is_number_integer()) malformed("field 'version' must be an integer");
        doc.version = it->get<std::int64_t>();
    }
    return doc;
}

MicroContent parse_content(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        malformed(std::string("invalid JSON: ") + e.what());
    }
    return content_from_json(j);
}

std::string canonical_json(const MicroContent& doc)
{
    try {
        return to_json(doc).dump();
    } catch (const json::type_error& e) {
        malformed(std::string("document is not valid UTF-8: ") + e.what());
    }
}

json student_view(const MicroContent& doc)
{
    json j = to_json(doc);
    for (auto& q : j["quiz"]) q.erase("feedback");
    strip_answer_keys(j);
    return j;
}

json to_json(const ValidationReport& report)
{
    auto list = [](const std::vector<Finding>& findings) {
        json arr = json::array();
        for (const auto& f : findings) arr.push_back({{"rule", f.rule_id}, {"message", f.message}});
        return arr;
    };
    return json{{"errors", list(report.errors)}, {"warnings", list(report.warnings)}};
}

ValidationReport validate_content(const MicroContent& doc)
{
    ValidationReport r;
    auto error = [&](std::string rule, std::string msg) {
        r.errors.push_back({std::move(rule), std::move(msg)});
    };
    auto warn = [&](std::string rule, std::string msg) {
        r.warnings.push_back({std::move(rule), std::move(msg)});
    };

    if (!is_url_safe_id(doc.id))
        error("invalid-id", "id must be nonempty and use only A-Z a-z 0-9 - . _ ~");
    if (is_blank(doc.title)) error("missing-title", "title is required");
    if (is_blank(doc.topic)) error("missing-topic", "topic is required");
    if (!is_iso_date(doc.date)) error("invalid-date", "date must be an ISO-8601 date (YYYY-MM-DD)");
    if (doc.version < 1) error("invalid-version", "version must be at least 1");

    for (const auto& tag : doc.tags) {
        if (!is_normalized_tag(tag)) {
            error("invalid-tag", "tag '" + tag + "' must be a nonempty lowercase term");
            break;
        }
    }
    if (doc.tags.empty()) warn("no-tags", "no tags: the unit will not be found by tag search");

    // Introduction section.
    if (is_blank(doc.introduction)) {
        error("missing-introduction-section", "the introduction section is empty");
    } else if (utf8_length(doc.introduction) > kMaxIntroductionChars) {
        warn("introduction-too-long",
             "introduction exceeds 1000 characters; keep it brief enough to read at a glance");
    }

    // Explanation section.
    const Explanation& ex = doc.explanation;
    const bool has_uri = ex.uri && !is_blank(*ex.uri);
    const bool has_body = ex.body && !is_blank(*ex.body);
    if (!has_uri && !has_body)
        error("missing-explanation-section", "the explanation needs a uri or a body");
    if (ex.duration && *ex.duration <= 0)
        error("invalid-duration", "duration must be a positive number of seconds");
    if (ex.kind == ExplanationKind::video) {
        if (!has_uri) error("video-missing-uri", "a video explanation requires a uri");
        if (!ex.duration) error("video-missing-duration", "a video explanation requires a duration");
        if (ex.duration && *ex.duration > kMaxVideoSeconds) {
            error("video-exceeds-session-cap",
                  "video lasts " + std::to_string(*ex.duration) +
                      " s; a micro-learning session must not exceed 15 minutes (900 s)");
        } else if (ex.duration && *ex.duration > kRecommendedVideoSeconds) {
            warn("video-exceeds-recommended-length",
                 "video lasts " + std::to_string(*ex.duration) +
                     " s, which exceeds 9-minute recommendation (6-9 minutes keeps attention)");
        }
    }

    // Assessment section.
    if (doc.quiz.empty())
        error("missing-assessment-section", "the quiz section needs at least one question");
    for (std::size_t i = 0; i < doc.quiz.size(); ++i) {
        const Question& q = doc.quiz[i];
        const std::string where = "question " + std::to_string(i + 1) + ": ";
        if (is_blank(q.prompt)) error("question-missing-prompt", where + "prompt is empty");

        if (q.kind == QuestionKind::short_answer) {
            if (!q.options.empty())
                error("short-answer-has-options", where + "short_answer questions take no options");
            bool any = std::any_of(q.accepted_answers.begin(), q.accepted_answers.end(),
                                   [](const std::string& a) { return !is_blank(a); });
            if (!any)
                error("short-answer-missing-accepted", where + "needs at least one accepted answer");
            continue;
        }

        if (q.options.empty()) error("choice-missing-options", where + "has no options");
        std::set<std::int64_t> distinct(q.correct_options.begin(), q.correct_options.end());
        if (distinct.size() != q.correct_options.size())
            error("duplicate-correct-index", where + "repeats a correct option index");
        for (std::int64_t idx : q.correct_options) {
            if (idx < 0 || idx >= static_cast<std::int64_t>(q.options.size())) {
                error("correct-index-out-of-range",
                      where + "correct index " + std::to_string(idx) + " is out of range");
                break;
            }
        }
        if (q.kind == QuestionKind::multiple_choice_single && distinct.size() != 1)
            error("single-choice-needs-one-correct", where + "needs exactly one correct option");
        if (q.kind == QuestionKind::multiple_choice_multi && distinct.empty())
            error("multi-choice-needs-correct", where + "needs at least one correct option");
    }
    return r;
}

std::vector<Response> responses_from_json(const json& j)
{
    const json* arr = &j;
    if (j.is_object()) {
        auto it = j.find("answers");
        if (it == j.end()) throw std::invalid_argument("missing 'answers'");
        arr = &*it;
    }
    if (!arr->is_array()) throw std::invalid_argument("'answers' must be an array");

    std::vector<Response> out;
    out.reserve(arr->size());
    for (const auto& a : *arr) {
        if (a.is_null()) {
            out.emplace_back(std::monostate{});
        } else if (a.is_string()) {
            out.emplace_back(a.get<std::string>());
        } else if (a.is_array()) {
            std::vector<std::int64_t> picks;
            for (const auto& p : a) {
                if (!p.is_number_integer())
                    throw std::invalid_argument("selected options must be integers");
                picks.push_back(p.get<std::int64_t>());
            }
            out.emplace_back(std::move(picks));
        } else if (a.is_number_integer()) {
            out.emplace_back(std::vector<std::int64_t>{a.get<std::int64_t>()});
        } else {
            throw std::invalid_argument("each answer must be null, a string, an integer or an array");
        }
    }
    return out;
}

QuizGrade grade_quiz(const MicroContent& doc, std::span<const Response> answers)
{
    QuizGrade grade;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < doc.quiz.size(); ++i) {
        const Question& q = doc.quiz[i];
        bool ok = i < answers.size() && is_question_correct(q, answers[i]);
        if (ok) ++correct;
        grade.per_question.push_back({ok, q.feedback.value_or("")});
    }
    grade.score = doc.quiz.empty()
                      ? 0.0
                      : static_cast<double>(correct) / static_cast<double>(doc.quiz.size());
    return grade;
}

double score_quiz(const MicroContent& doc, std::span<const Response> answers)
{
    return grade_quiz(doc, answers).score;
}

std::string normalize_short_answer(std::string_view text)
{
    return to_lower_ascii(trim_space(text));
}

std::vector<std::string> normalize_terms(std::span<const std::string> terms)
{
    std::vector<std::string> out;
    for (const auto& t : terms) {
        auto trimmed = trim_space(t);
        if (!trimmed.empty()) out.push_back(to_lower_ascii(trimmed));
    }
    return out;
}

double jaccard(std::span<const std::string> a, std::span<const std::string> b)
{
    std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> sb(b.begin(), b.end());
    std::size_t common = 0;
    for (const auto& t : sa) common += sb.count(t);
    const std::size_t all = sa.size() + sb.size() - common;
    return all == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(all);
}

}  // namespace microlti::content
