#pragma once

#include "microlti/content.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>

namespace microlti::content {

/// Key → canonical JSON text. Implementations are internally synchronized.
class DocumentStore {
public:
    virtual ~DocumentStore() = default;

    virtual std::optional<std::string> get(const std::string& id) const = 0;
    virtual void put(const std::string& id, const std::string& document) = 0;
    virtual bool remove(const std::string& id) = 0;
    virtual std::vector<std::string> ids() const = 0;
};

class MemoryDocumentStore final : public DocumentStore {
public:
    std::optional<std::string> get(const std::string& id) const override;
    void put(const std::string& id, const std::string& document) override;
    bool remove(const std::string& id) override;
    std::vector<std::string> ids() const override;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> docs_;
};

/**
 * One `<id>.json` file per document under `root/documents/` plus
 * `root/index.json` listing the stored ids. Files are replaced by
 * write-then-rename, so a crash leaves either the old or the new bytes.
 */
class FileDocumentStore final : public DocumentStore {
public:
    explicit FileDocumentStore(std::filesystem::path root);

    std::optional<std::string> get(const std::string& id) const override;
    void put(const std::string& id, const std::string& document) override;
    bool remove(const std::string& id) override;
    std::vector<std::string> ids() const override;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path document_path(const std::string& id) const;
    void write_index_locked() const;

    std::filesystem::path root_;
    mutable std::mutex mutex_;
    std::map<std::string, std::string> cache_;
};

struct ImportResult {
    std::vector<std::string> imported;
    // (1-based line number, reason) for every rejected line; nothing is
    // loaded when this is non-empty.
    std::vector<std::pair<std::size_t, std::string>> rejected;
    std::vector<std::pair<std::size_t, ValidationReport>> reports;
};

class ContentRepository {
public:
    explicit ContentRepository(std::shared_ptr<DocumentStore> store);

    /// Stores `doc` with version 1. Throws ContentError (validation_failed, duplicate_id).
    std::string create_content(MicroContent doc);

    /// Throws ContentError(not_found).
    MicroContent get_content(const std::string& id) const;

    bool contains(const std::string& id) const;

    /// Optimistic concurrency: succeeds only when `expected_version` is the stored
    /// version, and returns the new one.
    std::int64_t update_content(const std::string& id, MicroContent doc,
                                std::int64_t expected_version);

    void remove_content(const std::string& id);

    /// Jaccard ranking over tag sets, best first, ties by ascending id.
    std::vector<SearchHit> search_by_tags(std::span<const std::string> query) const;

    std::vector<std::string> list_ids() const;

    /// Newline-delimited JSON. All-or-nothing: any bad line rejects the batch.
    /// Stored versions are kept as given.
    ImportResult import_ndjson(std::istream& in);
    void export_ndjson(std::ostream& out) const;

private:
    std::shared_ptr<DocumentStore> store_;
    mutable std::shared_mutex mutex_;
};

}  // namespace microlti::content
