#pragma once

#include "microlti/clock.hpp"
#include "microlti/lti_launch.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace microlti::lis {

inline constexpr std::string_view kPoxNamespace =
    "http://www.imsglobal.org/services/ltiv1p1/xsd/imsoms_v1p0";
inline constexpr std::string_view kImsxVersion = "V1.0";

enum class Operation { replace_result, read_result, delete_result };

std::string_view to_string(Operation op);  // "replaceResult", ...

struct OutcomeRequest {
    Operation operation = Operation::replace_result;
    std::string message_id;
    std::string sourced_id;
    std::optional<double> score;  // replaceResult only, in [0, 1]

    bool operator==(const OutcomeRequest&) const = default;
};

enum class Status { success, failure };

struct OutcomeResponse {
    Status status = Status::success;
    std::string message_id;
    std::string message_ref;  // message_id of the request being answered
    std::optional<Operation> operation;
    std::string description;
    std::optional<double> score;  // readResult success only

    bool operator==(const OutcomeResponse&) const = default;
};

using OutcomeMessage = std::variant<OutcomeRequest, OutcomeResponse>;

class OutcomeError : public std::runtime_error {
public:
    enum class Kind {
        invalid_score,
        missing_score,
        malformed_xml,
        unsupported_operation,
        missing_sourcedid,
        transport_failure,
        signature_rejected,
        failure_status,
        malformed_response,
    };

    OutcomeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(OutcomeError::Kind kind);

/// Shortest decimal with at most four fractional digits, never an exponent.
std::string format_score(double score);

/// Plain decimal ("0.75", "1", ".5"); no sign, no exponent.
std::optional<double> parse_score(std::string_view text);

/// Throws OutcomeError(invalid_score | missing_score) when the request is not well formed.
std::string build_outcome_xml(const OutcomeRequest& req);

std::string build_outcome_response_xml(const OutcomeResponse& resp);

/// Lenient reader: unknown sibling elements are ignored. Throws
/// OutcomeError(malformed_xml | unsupported_operation | missing_sourcedid |
/// missing_score | invalid_score).
OutcomeMessage parse_outcome_xml(std::string_view xml);

/// Random UUID (version 4 layout).
std::string generate_message_id();

/// A ready-to-send outcome POST: body plus its OAuth Authorization header
/// carrying oauth_body_hash.
struct SignedPost {
    std::string url;
    std::string body;
    std::string authorization;
    std::string content_type = "application/xml";
};

SignedPost sign_outcome_post(std::string_view endpoint, const lti::ConsumerCredential& cred,
                             std::string body, std::int64_t now,
                             std::string nonce = oauth::generate_nonce());

struct SendOptions {
    Clock clock = system_now;
    int connect_timeout_seconds = 5;
    int read_timeout_seconds = 10;
};

/// One signed POST, no retry. Returns the parsed response on success status;
/// throws OutcomeError(transport_failure | signature_rejected | failure_status |
/// malformed_response) otherwise.
OutcomeResponse send_outcome(std::string_view endpoint, const lti::ConsumerCredential& cred,
                             const OutcomeRequest& req, const SendOptions& options = {});

/// POSTs an already signed message and returns (HTTP status, body). Throws
/// OutcomeError(transport_failure) when no response arrives.
std::pair<int, std::string> post_signed(const SignedPost& post, const SendOptions& options = {});

}  // namespace microlti::lis
