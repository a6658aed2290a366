#include "microlti/lis_outcomes.hpp"

#include <expat.h>
#include <httplib.h>

#include <charconv>
#include <cmath>
#include <memory>

namespace microlti::lis {

namespace {

struct XmlNode {
    std::string name;  // local name, namespace prefix dropped
    std::string text;
    std::vector<XmlNode> children;

    const XmlNode* child(std::string_view n) const
    {
        for (const auto& c : children) {
            if (c.name == n) return &c;
        }
        return nullptr;
    }

    const XmlNode* path(std::initializer_list<std::string_view> names) const
    {
        const XmlNode* cur = this;
        for (auto n : names) {
            cur = cur->child(n);
            if (!cur) return nullptr;
        }
        return cur;
    }
};

struct ParseState {
    XmlNode root;
    std::vector<XmlNode*> stack;
    bool has_root = false;
};

std::string local_name(const XML_Char* name)
{
    std::string_view n(name);
    if (auto colon = n.rfind(':'); colon != std::string_view::npos) n = n.substr(colon + 1);
    return std::string(n);
}

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char**)
{
    auto* st = static_cast<ParseState*>(data);
    if (st->stack.empty()) {
        st->root.name = local_name(name);
        st->has_root = true;
        st->stack.push_back(&st->root);
        return;
    }
    XmlNode* parent = st->stack.back();
    parent->children.push_back(XmlNode{local_name(name), {}, {}});
    st->stack.push_back(&parent->children.back());
}

void XMLCALL on_end(void* data, const XML_Char*)
{
    static_cast<ParseState*>(data)->stack.pop_back();
}

void XMLCALL on_text(void* data, const XML_Char* s, int len)
{
    auto* st = static_cast<ParseState*>(data);
    if (!st->stack.empty()) st->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

XmlNode parse_tree(std::string_view xml)
{
    std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
        XML_ParserCreate("UTF-8"), &XML_ParserFree);
    if (!parser) throw std::bad_alloc();

    // Only the node on top of the stack gains children, so the ancestors'
    // vectors (which own the stacked pointers) never reallocate mid-parse.
    ParseState state;
    XML_SetUserData(parser.get(), &state);
    XML_SetElementHandler(parser.get(), on_start, on_end);
    XML_SetCharacterDataHandler(parser.get(), on_text);

    if (XML_Parse(parser.get(), xml.data(), static_cast<int>(xml.size()), XML_TRUE) ==
        XML_STATUS_ERROR) {
        throw OutcomeError(OutcomeError::Kind::malformed_xml,
                           std::string("malformed XML: ") +
                               XML_ErrorString(XML_GetErrorCode(parser.get())) + " at line " +
                               std::to_string(XML_GetCurrentLineNumber(parser.get())));
    }
    if (!state.has_root) throw OutcomeError(OutcomeError::Kind::malformed_xml, "empty document");
    return std::move(state.root);
}

void append_escaped(std::string& out, std::string_view text)
{
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        case '\r': out += "&#13;"; break;
        case '\n': out += "&#10;"; break;
        case '\t': out += "&#9;"; break;
        default: out += c;
        }
    }
}

std::string escaped(std::string_view text)
{
    std::string out;
    append_escaped(out, text);
    return out;
}

std::string_view trim(std::string_view s)
{
    auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (!s.empty() && ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && ws(s.back())) s.remove_suffix(1);
    return s;
}

constexpr std::pair<Operation, std::string_view> kOperations[] = {
    {Operation::replace_result, "replaceResult"},
    {Operation::read_result, "readResult"},
    {Operation::delete_result, "deleteResult"},
};

std::optional<Operation> operation_from_element(std::string_view element, std::string_view suffix)
{
    for (const auto& [op, name] : kOperations) {
        if (element.size() == name.size() + suffix.size() && element.starts_with(name) &&
            element.ends_with(suffix))
            return op;
    }
    return std::nullopt;
}

std::optional<Operation> operation_from_name(std::string_view name)
{
    return operation_from_element(name, "");
}

std::string result_score_xml(std::string_view text, std::string_view indent)
{
    std::string out;
    out += std::string(indent) + "<result>\n";
    out += std::string(indent) + "  <resultScore>\n";
    out += std::string(indent) + "    <language>en</language>\n";
    out += std::string(indent) + "    <textString>" + escaped(text) + "</textString>\n";
    out += std::string(indent) + "  </resultScore>\n";
    out += std::string(indent) + "</result>\n";
    return out;
}

void check_score(const OutcomeRequest& req)
{
    if (req.operation == Operation::replace_result) {
        if (!req.score)
            throw OutcomeError(OutcomeError::Kind::missing_score, "replaceResult requires a score");
        if (!std::isfinite(*req.score) || *req.score < 0.0 || *req.score > 1.0)
            throw OutcomeError(OutcomeError::Kind::invalid_score,
                               "score " + std::to_string(*req.score) + " is outside [0, 1]");
    } else if (req.score) {
        throw OutcomeError(OutcomeError::Kind::invalid_score,
                           std::string(to_string(req.operation)) + " carries no score");
    }
}

OutcomeRequest parse_request(const XmlNode& root)
{
    OutcomeRequest req;
    const XmlNode* header = root.path({"imsx_POXHeader", "imsx_POXRequestHeaderInfo"});
    if (!header) throw OutcomeError(OutcomeError::Kind::malformed_xml, "missing request header");
    if (const XmlNode* id = header->child("imsx_messageIdentifier")) req.message_id = id->text;

    const XmlNode* body = root.child("imsx_POXBody");
    if (!body) throw OutcomeError(OutcomeError::Kind::malformed_xml, "missing imsx_POXBody");

    const XmlNode* op_node = nullptr;
    for (const auto& c : body->children) {
        if (auto op = operation_from_element(c.name, "Request")) {
            req.operation = *op;
            op_node = &c;
            break;
        }
    }
    if (!op_node) {
        std::string found = body->children.empty() ? "nothing" : body->children.front().name;
        throw OutcomeError(OutcomeError::Kind::unsupported_operation,
                           "unsupported operation: " + found);
    }

    const XmlNode* sourced = op_node->path({"resultRecord", "sourcedGUID", "sourcedId"});
    if (!sourced || sourced->text.empty())
        throw OutcomeError(OutcomeError::Kind::missing_sourcedid, "missing sourcedId");
    req.sourced_id = sourced->text;

    if (req.operation == Operation::replace_result) {
        const XmlNode* text =
            op_node->path({"resultRecord", "result", "resultScore", "textString"});
        if (!text) throw OutcomeError(OutcomeError::Kind::missing_score, "missing resultScore");
        auto score = parse_score(trim(text->text));
        if (!score)
            throw OutcomeError(OutcomeError::Kind::invalid_score,
                               "resultScore '" + text->text + "' is not a decimal");
        req.score = score;
    }
    return req;
}

OutcomeResponse parse_response(const XmlNode& root)
{
    OutcomeResponse resp;
    const XmlNode* header = root.path({"imsx_POXHeader", "imsx_POXResponseHeaderInfo"});
    if (!header) throw OutcomeError(OutcomeError::Kind::malformed_xml, "missing response header");
    if (const XmlNode* id = header->child("imsx_messageIdentifier")) resp.message_id = id->text;

    const XmlNode* status = header->child("imsx_statusInfo");
    if (!status) throw OutcomeError(OutcomeError::Kind::malformed_xml, "missing imsx_statusInfo");
    const XmlNode* major = status->child("imsx_codeMajor");
    if (!major) throw OutcomeError(OutcomeError::Kind::malformed_xml, "missing imsx_codeMajor");
    resp.status = trim(major->text) == "success" ? Status::success : Status::failure;
    if (const XmlNode* d = status->child("imsx_description")) resp.description = d->text;
    if (const XmlNode* r = status->child("imsx_messageRefIdentifier")) resp.message_ref = r->text;
    if (const XmlNode* o = status->child("imsx_operationRefIdentifier"))
        resp.operation = operation_from_name(trim(o->text));

    if (const XmlNode* body = root.child("imsx_POXBody")) {
        for (const auto& c : body->children) {
            auto op = operation_from_element(c.name, "Response");
            if (!op) continue;
            if (!resp.operation) resp.operation = op;
            if (const XmlNode* text = c.path({"result", "resultScore", "textString"})) {
                auto trimmed = trim(text->text);
                if (!trimmed.empty()) {
                    resp.score = parse_score(trimmed);
                    if (!resp.score)
                        throw OutcomeError(OutcomeError::Kind::invalid_score,
                                           "resultScore '" + text->text + "' is not a decimal");
                }
            }
            break;
        }
    }
    return resp;
}

struct Endpoint {
    std::string scheme_host_port;
    std::string path_and_query;
};

Endpoint split_endpoint(std::string_view url)
{
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos)
        throw OutcomeError(OutcomeError::Kind::transport_failure,
                           "endpoint is not an absolute URL: " + std::string(url));
    auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.scheme_host_port = std::string(url.substr(0, path_start));
    e.path_and_query = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));
    return e;
}

}  // namespace

std::string_view to_string(Operation op)
{
    for (const auto& [value, name] : kOperations) {
        if (value == op) return name;
    }
    return "replaceResult";
}

std::string_view to_string(OutcomeError::Kind kind)
{
    switch (kind) {
    case OutcomeError::Kind::invalid_score: return "invalid-score";
    case OutcomeError::Kind::missing_score: return "missing-score";
    case OutcomeError::Kind::malformed_xml: return "malformed-xml";
    case OutcomeError::Kind::unsupported_operation: return "unsupported-operation";
    case OutcomeError::Kind::missing_sourcedid: return "missing-sourcedid";
    case OutcomeError::Kind::transport_failure: return "transport-failure";
    case OutcomeError::Kind::signature_rejected: return "signature-rejected";
    case OutcomeError::Kind::failure_status: return "failure-status";
    case OutcomeError::Kind::malformed_response: return "malformed-response";
    }
    return "unknown";
}

std::string format_score(double score)
{
    const long long scaled = std::llround(score * 10000.0);
    std::string out = std::to_string(scaled / 10000);
    long long frac = scaled % 10000;
    if (frac != 0) {
        std::string digits = std::to_string(frac);
        digits.insert(0, 4 - digits.size(), '0');
        while (digits.back() == '0') digits.pop_back();
        out += '.';
        out += digits;
    }
    return out;
}

std::optional<double> parse_score(std::string_view text)
{
    if (text.empty()) return std::nullopt;
    bool seen_digit = false;
    bool seen_dot = false;
    for (char c : text) {
        if (c >= '0' && c <= '9') {
            seen_digit = true;
        } else if (c == '.' && !seen_dot) {
            seen_dot = true;
        } else {
            return std::nullopt;
        }
    }
    if (!seen_digit) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

std::string build_outcome_xml(const OutcomeRequest& req)
{
    check_score(req);
    const std::string op(to_string(req.operation));

    std::string xml = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    xml += "<imsx_POXEnvelopeRequest xmlns=\"" + std::string(kPoxNamespace) + "\">\n";
    xml += "  <imsx_POXHeader>\n";
    xml += "    <imsx_POXRequestHeaderInfo>\n";
    xml += "      <imsx_version>" + std::string(kImsxVersion) + "</imsx_version>\n";
    xml += "      <imsx_messageIdentifier>" + escaped(req.message_id) + "</imsx_messageIdentifier>\n";
    xml += "    </imsx_POXRequestHeaderInfo>\n";
    xml += "  </imsx_POXHeader>\n";
    xml += "  <imsx_POXBody>\n";
    xml += "    <" + op + "Request>\n";
    xml += "      <resultRecord>\n";
    xml += "        <sourcedGUID>\n";
    xml += "          <sourcedId>" + escaped(req.sourced_id) + "</sourcedId>\n";
    xml += "        </sourcedGUID>\n";
    if (req.operation == Operation::replace_result)
        xml += result_score_xml(format_score(*req.score), "        ");
    xml += "      </resultRecord>\n";
    xml += "    </" + op + "Request>\n";
    xml += "  </imsx_POXBody>\n";
    xml += "</imsx_POXEnvelopeRequest>\n";
    return xml;
}

std::string build_outcome_response_xml(const OutcomeResponse& resp)
{
    std::string xml = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    xml += "<imsx_POXEnvelopeResponse xmlns=\"" + std::string(kPoxNamespace) + "\">\n";
    xml += "  <imsx_POXHeader>\n";
    xml += "    <imsx_POXResponseHeaderInfo>\n";
    xml += "      <imsx_version>" + std::string(kImsxVersion) + "</imsx_version>\n";
    xml += "      <imsx_messageIdentifier>" + escaped(resp.message_id) + "</imsx_messageIdentifier>\n";
    xml += "      <imsx_statusInfo>\n";
    xml += std::string("        <imsx_codeMajor>") +
           (resp.status == Status::success ? "success" : "failure") + "</imsx_codeMajor>\n";
    xml += std::string("        <imsx_severity>") +
           (resp.status == Status::success ? "status" : "error") + "</imsx_severity>\n";
    xml += "        <imsx_description>" + escaped(resp.description) + "</imsx_description>\n";
    xml += "        <imsx_messageRefIdentifier>" + escaped(resp.message_ref) +
           "</imsx_messageRefIdentifier>\n";
    if (resp.operation)
        xml += "        <imsx_operationRefIdentifier>" + std::string(to_string(*resp.operation)) +
               "</imsx_operationRefIdentifier>\n";
    xml += "      </imsx_statusInfo>\n";
    xml += "    </imsx_POXResponseHeaderInfo>\n";
    xml += "  </imsx_POXHeader>\n";
    xml += "  <imsx_POXBody>\n";
    if (resp.operation) {
        const std::string element = std::string(to_string(*resp.operation)) + "Response";
        if (*resp.operation == Operation::read_result && resp.status == Status::success) {
            xml += "    <" + element + ">\n";
            xml += result_score_xml(resp.score ? format_score(*resp.score) : "", "      ");
            xml += "    </" + element + ">\n";
        } else {
            xml += "    <" + element + "/>\n";
        }
    }
    xml += "  </imsx_POXBody>\n";
    xml += "</imsx_POXEnvelopeResponse>\n";
    return xml;
}

OutcomeMessage parse_outcome_xml(std::string_view xml)
{
    const XmlNode root = parse_tree(xml);
    if (root.name == "imsx_POXEnvelopeRequest") return parse_request(root);
    if (root.name == "imsx_POXEnvelopeResponse") return parse_response(root);
    throw OutcomeError(OutcomeError::Kind::malformed_xml, "unexpected root element " + root.name);
}

std::string generate_message_id()
{
    std::string hex = oauth::random_hex(16);
    hex[12] = '4';
    static constexpr char variant[] = "89ab";
    hex[16] = variant[std::stoi(hex.substr(16, 1), nullptr, 16) & 0x3];
    return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" +
           hex.substr(16, 4) + "-" + hex.substr(20, 12);
}

SignedPost sign_outcome_post(std::string_view endpoint, const lti::ConsumerCredential& cred,
                             std::string body, std::int64_t now, std::string nonce)
{
    oauth::ParameterList oauth_params = {
        {"oauth_consumer_key", cred.consumer_key},
        {"oauth_signature_method", std::string(oauth::kSignatureMethod)},
        {"oauth_timestamp", std::to_string(now)},
        {"oauth_nonce", std::move(nonce)},
        {"oauth_version", std::string(oauth::kVersion)},
        {"oauth_body_hash", oauth::body_hash(body)},
    };
    const auto signable = oauth::SignableRequest::from("POST", endpoint, oauth_params);
    oauth_params.emplace_back("oauth_signature", oauth::sign(signable, cred.shared_secret));

    SignedPost post;
    post.url = std::string(endpoint);
    post.body = std::move(body);
    post.authorization = oauth::authorization_header(oauth_params);
    return post;
}

std::pair<int, std::string> post_signed(const SignedPost& post, const SendOptions& options)
{
    const Endpoint e = split_endpoint(post.url);
    std::unique_ptr<httplib::Client> client;
    try {
        client = std::make_unique<httplib::Client>(e.scheme_host_port);
    } catch (const std::exception& ex) {
        throw OutcomeError(OutcomeError::Kind::transport_failure,
                           "cannot reach " + post.url + ": " + ex.what());
    }
    if (!client->is_valid())
        throw OutcomeError(OutcomeError::Kind::transport_failure, "unsupported endpoint " + post.url);
    client->set_connection_timeout(options.connect_timeout_seconds, 0);
    client->set_read_timeout(options.read_timeout_seconds, 0);

    httplib::Headers headers = {{"Authorization", post.authorization}};
    auto res = client->Post(e.path_and_query, headers, post.body, post.content_type);
    if (!res) {
        throw OutcomeError(OutcomeError::Kind::transport_failure,
                           "POST " + post.url + " failed: " + httplib::to_string(res.error()));
    }
    return {res->status, res->body};
}

OutcomeResponse send_outcome(std::string_view endpoint, const lti::ConsumerCredential& cred,
                             const OutcomeRequest& req, const SendOptions& options)
{
    std::string body = build_outcome_xml(req);
    const SignedPost post = sign_outcome_post(endpoint, cred, std::move(body), options.clock());
    const auto [status, reply] = post_signed(post, options);

    if (status == 401)
        throw OutcomeError(OutcomeError::Kind::signature_rejected,
                           "tool consumer rejected the signature (HTTP 401)");
    if (status < 200 || status >= 300)
        throw OutcomeError(OutcomeError::Kind::transport_failure,
                           "tool consumer answered HTTP " + std::to_string(status));

    OutcomeMessage message;
    try {
        message = parse_outcome_xml(reply);
    } catch (const OutcomeError& e) {
        throw OutcomeError(OutcomeError::Kind::malformed_response, e.what());
    }
    auto* resp = std::get_if<OutcomeResponse>(&message);
    if (!resp)
        throw OutcomeError(OutcomeError::Kind::malformed_response, "reply is not a response envelope");
    if (resp->message_ref != req.message_id)
        throw OutcomeError(OutcomeError::Kind::malformed_response,
                           "reply answers message '" + resp->message_ref + "', expected '" +
                               req.message_id + "'");
    if (resp->status != Status::success)
        throw OutcomeError(OutcomeError::Kind::failure_status,
                           "tool consumer reported failure: " + resp->description);
    return *resp;
}

}  // namespace microlti::lis
