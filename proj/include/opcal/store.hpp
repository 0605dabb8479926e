#pragma once

#include "opcal/conformal.hpp"
#include "opcal/serialize.hpp"

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace opcal {

struct Provenance {
    std::string source;
    std::string filter;
    long rows_read = 0;
    long rows_kept = 0;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// A named labeled score sample plus where it came from.
struct Dataset {
    std::string id;
    ScoreSample sample;
    Provenance provenance;
};

void to_json(json& j, const Dataset& d);
void from_json(const json& j, Dataset& d);

/// Directory of JSON documents, one subdirectory per artifact kind:
/// datasets, calibrations, audits, menus, wedges, sims, jobs.
/// Writes go through a dot-prefixed temp file and a rename, so readers only ever
/// see complete documents.
class ArtifactStore {
public:
    explicit ArtifactStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    std::filesystem::path path_of(const std::string& kind, const std::string& id, const std::string& ext = ".json") const;
    bool exists(const std::string& kind, const std::string& id, const std::string& ext = ".json") const;

    void put(const std::string& kind, const std::string& id, const json& doc);
    void put_text(const std::string& kind, const std::string& id, const std::string& ext, const std::string& text);
    /// Throws NotFound for missing ids.
    json get(const std::string& kind, const std::string& id) const;
    std::string get_text(const std::string& kind, const std::string& id, const std::string& ext) const;
    /// Sorted ids of the complete documents of one kind.
    std::vector<std::string> list(const std::string& kind) const;

    void put_dataset(const Dataset& d);
    Dataset get_dataset(const std::string& id) const;

    /// Rendering used for every stored document; stable across runs.
    static std::string render(const json& doc);

private:
    void write_atomic(const std::filesystem::path& target, const std::string& bytes);

    std::filesystem::path root_;
    std::mutex write_mutex_;
};

/// Ids are file names: [A-Za-z0-9_.-], not starting with '.'. Throws DomainError otherwise.
void validate_id(const std::string& id);

} // namespace opcal
