#include "opcal/store.hpp"

#include "opcal/errors.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace opcal {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kKinds = {"datasets", "calibrations", "audits", "menus", "wedges", "sims", "jobs"};

void check_kind(const std::string& kind) {
    if (std::find(kKinds.begin(), kKinds.end(), kind) == kKinds.end()) {
        throw DomainError("unknown artifact kind '" + kind + "'");
    }
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFound("cannot read '" + p.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace

void validate_id(const std::string& id) {
    if (id.empty() || id.size() > 128 || id.front() == '.') throw DomainError("invalid artifact id '" + id + "'");
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        if (!ok) throw DomainError("invalid artifact id '" + id + "'");
    }
}

void to_json(json& j, const Dataset& d) {
    j = document("dataset", {{"id", d.id},
                             {"provenance",
                              {{"source", d.provenance.source},
                               {"filter", d.provenance.filter},
                               {"rows_read", d.provenance.rows_read},
                               {"rows_kept", d.provenance.rows_kept}}},
                             {"n0", d.sample.class_count(0)},
                             {"n1", d.sample.class_count(1)},
                             {"sample", d.sample}});
}

void from_json(const json& j, Dataset& d) {
    check_document(j, "dataset");
    d.id = j.at("id").get<std::string>();
    const auto& p = j.at("provenance");
    d.provenance = {p.at("source").get<std::string>(), p.at("filter").get<std::string>(), p.at("rows_read").get<long>(),
                    p.at("rows_kept").get<long>()};
    d.sample = j.at("sample").get<ScoreSample>();
}

ArtifactStore::ArtifactStore(fs::path root) : root_(std::move(root)) {
    for (const auto& k : kKinds) fs::create_directories(root_ / k);
}

fs::path ArtifactStore::path_of(const std::string& kind, const std::string& id, const std::string& ext) const {
    check_kind(kind);
    validate_id(id);
    return root_ / kind / (id + ext);
}

bool ArtifactStore::exists(const std::string& kind, const std::string& id, const std::string& ext) const {
    return fs::exists(path_of(kind, id, ext));
}

std::string ArtifactStore::render(const json& doc) { return doc.dump(2) + "\n"; }

void ArtifactStore::write_atomic(const fs::path& target, const std::string& bytes) {
    static std::atomic<unsigned long> counter{0};
    const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp." +
                                                 std::to_string(::getpid()) + "." + std::to_string(counter++));
    std::lock_guard<std::mutex> lock(write_mutex_);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << bytes;
        out.flush();
        if (!out) throw Error("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot move artifact into place at '" + target.string() + "': " + ec.message());
    }
}

void ArtifactStore::put(const std::string& kind, const std::string& id, const json& doc) {
    write_atomic(path_of(kind, id), render(doc));
}

void ArtifactStore::put_text(const std::string& kind, const std::string& id, const std::string& ext,
                             const std::string& text) {
    write_atomic(path_of(kind, id, ext), text);
}

json ArtifactStore::get(const std::string& kind, const std::string& id) const {
    const fs::path p = path_of(kind, id);
    if (!fs::exists(p)) throw NotFound("no " + kind + " artifact '" + id + "'");
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw Error("corrupt artifact '" + p.string() + "': " + e.what());
    }
}

std::string ArtifactStore::get_text(const std::string& kind, const std::string& id, const std::string& ext) const {
    const fs::path p = path_of(kind, id, ext);
    if (!fs::exists(p)) throw NotFound("no " + kind + " artifact '" + id + ext + "'");
    return read_file(p);
}

std::vector<std::string> ArtifactStore::list(const std::string& kind) const {
    check_kind(kind);
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root_ / kind)) {
        const std::string name = entry.path().filename().string();
        if (name.empty() || name.front() == '.' || entry.path().extension() != ".json") continue;
        ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void ArtifactStore::put_dataset(const Dataset& d) { put("datasets", d.id, json(d)); }

Dataset ArtifactStore::get_dataset(const std::string& id) const { return get("datasets", id).get<Dataset>(); }

} // namespace opcal
