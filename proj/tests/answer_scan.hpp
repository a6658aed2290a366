#pragma once

#include "microlti/content.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

namespace testsupport {

inline std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline void scan_json(const nlohmann::json& j, const std::string& where, std::vector<std::string>& out)
{
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            // A boolean `correct` is a grading verdict for the student's own answer.
            if (k == "correct" && !v.is_boolean()) out.push_back(where + ": answer key under \"correct\"");
            if (k == "accepted_answers" || k == "correct_options") out.push_back(where + ": answer key under \"" + k + "\"");
            scan_json(v, where, out);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) scan_json(v, where, out);
    }
}

/// Findings for one student-facing response body: structural answer keys in
/// JSON, and any accepted short answer of the corpus appearing verbatim.
inline std::vector<std::string> scan_for_answer_keys(const std::string& body, const std::string& where,
                                                     const std::vector<microlti::content::MicroContent>& corpus)
{
    std::vector<std::string> out;
    auto parsed = nlohmann::json::parse(body, nullptr, false);
    if (!parsed.is_discarded()) scan_json(parsed, where, out);

    const std::string haystack = lower(body);
    for (const auto& doc : corpus) {
        for (const auto& q : doc.quiz) {
            for (const auto& answer : q.accepted_answers) {
                if (haystack.find(lower(answer)) != std::string::npos)
                    out.push_back(where + ": leaks accepted answer '" + answer + "' of " + doc.id);
            }
        }
    }
    return out;
}

}  // namespace testsupport
