#include "microlti/repository.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace microlti::content {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomically(const fs::path& path, const std::string& bytes)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void require_valid(const MicroContent& doc)
{
    ValidationReport report = validate_content(doc);
    if (!report.ok()) {
        std::string what = "validation failed:";
        for (const auto& e : report.errors) what += " " + e.rule_id;
        throw ContentError(ContentError::Kind::validation_failed, what, std::move(report));
    }
}

}  // namespace

std::optional<std::string> MemoryDocumentStore::get(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    auto it = docs_.find(id);
    if (it == docs_.end()) return std::nullopt;
    return it->second;
}

void MemoryDocumentStore::put(const std::string& id, const std::string& document)
{
    std::lock_guard lock(mutex_);
    docs_[id] = document;
}

bool MemoryDocumentStore::remove(const std::string& id)
{
    std::lock_guard lock(mutex_);
    return docs_.erase(id) > 0;
}

std::vector<std::string> MemoryDocumentStore::ids() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : docs_) out.push_back(id);
    return out;
}

FileDocumentStore::FileDocumentStore(fs::path root) : root_(std::move(root))
{
    fs::create_directories(root_ / "documents");
    const fs::path index = root_ / "index.json";
    if (!fs::exists(index)) {
        write_index_locked();
        return;
    }
    auto parsed = json::parse(read_file(index));
    for (const auto& id : parsed.at("documents")) {
        const auto name = id.get<std::string>();
        cache_[name] = read_file(document_path(name));
    }
}

fs::path FileDocumentStore::document_path(const std::string& id) const
{
    return root_ / "documents" / (id + ".json");
}

void FileDocumentStore::write_index_locked() const
{
    json ids = json::array();
    for (const auto& [id, _] : cache_) ids.push_back(id);
    write_file_atomically(root_ / "index.json", json{{"documents", ids}}.dump());
}

std::optional<std::string> FileDocumentStore::get(const std::string& id) const
{
    std::lock_guard lock(mutex_);
    auto it = cache_.find(id);
    if (it == cache_.end()) return std::nullopt;
    return it->second;
}

void FileDocumentStore::put(const std::string& id, const std::string& document)
{
    std::lock_guard lock(mutex_);
    write_file_atomically(document_path(id), document);
    const bool is_new = !cache_.contains(id);
    cache_[id] = document;
    if (is_new) write_index_locked();
}

bool FileDocumentStore::remove(const std::string& id)
{
    std::lock_guard lock(mutex_);
    if (cache_.erase(id) == 0) return false;
    write_index_locked();
    fs::remove(document_path(id));
    return true;
}

std::vector<std::string> FileDocumentStore::ids() const
{
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : cache_) out.push_back(id);
    return out;
}

ContentRepository::ContentRepository(std::shared_ptr<DocumentStore> store)
    : store_(std::move(store))
{
}

std::string ContentRepository::create_content(MicroContent doc)
{
    doc.version = 1;
    require_valid(doc);
    const std::string text = canonical_json(doc);

    std::unique_lock lock(mutex_);
    if (store_->get(doc.id))
        throw ContentError(ContentError::Kind::duplicate_id, "duplicate id '" + doc.id + "'");
    store_->put(doc.id, text);
    return doc.id;
}

MicroContent ContentRepository::get_content(const std::string& id) const
{
    std::optional<std::string> text;
    {
        std::shared_lock lock(mutex_);
        text = store_->get(id);
    }
    if (!text) throw ContentError(ContentError::Kind::not_found, "no content '" + id + "'");
    return parse_content(*text);
}

bool ContentRepository::contains(const std::string& id) const
{
    std::shared_lock lock(mutex_);
    return store_->get(id).has_value();
}

std::int64_t ContentRepository::update_content(const std::string& id, MicroContent doc,
                                               std::int64_t expected_version)
{
    doc.id = id;
    doc.version = expected_version + 1;
    require_valid(doc);
    const std::string text = canonical_json(doc);

    std::unique_lock lock(mutex_);
    auto current = store_->get(id);
    if (!current) throw ContentError(ContentError::Kind::not_found, "no content '" + id + "'");
    const std::int64_t stored_version = parse_content(*current).version;
    if (stored_version != expected_version) {
        throw ContentError(ContentError::Kind::version_conflict,
                           "version conflict on '" + id + "': stored " +
                               std::to_string(stored_version) + ", expected " +
                               std::to_string(expected_version));
    }
    store_->put(id, text);
    return doc.version;
}

void ContentRepository::remove_content(const std::string& id)
{
    std::unique_lock lock(mutex_);
    if (!store_->remove(id))
        throw ContentError(ContentError::Kind::not_found, "no content '" + id + "'");
}

std::vector<SearchHit> ContentRepository::search_by_tags(std::span<const std::string> query) const
{
    const auto terms = normalize_terms(query);
    if (terms.empty()) throw ContentError(ContentError::Kind::empty_query, "empty tag query");

    std::vector<SearchHit> hits;
    for (const auto& id : list_ids()) {
        std::optional<std::string> text;
        {
            std::shared_lock lock(mutex_);
            text = store_->get(id);
        }
        if (!text) continue;  // removed concurrently
        const MicroContent doc = parse_content(*text);
        const double score = jaccard(terms, doc.tags);
        if (score > 0.0) hits.push_back({id, score});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return hits;
}

std::vector<std::string> ContentRepository::list_ids() const
{
    std::shared_lock lock(mutex_);
    return store_->ids();
}

ImportResult ContentRepository::import_ndjson(std::istream& in)
{
    ImportResult result;
    std::vector<MicroContent> batch;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            MicroContent doc = parse_content(line);
            ValidationReport report = validate_content(doc);
            if (!report.ok()) {
                std::string why = "validation failed:";
                for (const auto& e : report.errors) why += " " + e.rule_id;
                result.rejected.emplace_back(line_no, why);
                result.reports.emplace_back(line_no, std::move(report));
                continue;
            }
            if (!seen.insert(doc.id).second || contains(doc.id)) {
                result.rejected.emplace_back(line_no, "duplicate id '" + doc.id + "'");
                continue;
            }
            batch.push_back(std::move(doc));
        } catch (const ContentError& e) {
            result.rejected.emplace_back(line_no, e.what());
        }
    }

    if (!result.rejected.empty()) return result;

    // Versions are kept so export followed by import restores identical bytes.
    std::unique_lock lock(mutex_);
    for (const auto& doc : batch) {
        if (store_->get(doc.id))
            result.rejected.emplace_back(0, "duplicate id '" + doc.id + "' (created concurrently)");
    }
    if (!result.rejected.empty()) return result;
    for (const auto& doc : batch) {
        store_->put(doc.id, canonical_json(doc));
        result.imported.push_back(doc.id);
    }
    return result;
}

void ContentRepository::export_ndjson(std::ostream& out) const
{
    for (const auto& id : list_ids()) {
        std::optional<std::string> text;
        {
            std::shared_lock lock(mutex_);
            text = store_->get(id);
        }
        if (text) out << *text << '\n';
    }
}

}  // namespace microlti::content
