#include "clawnet/runtime/memory.hpp"

#include "clawnet/common/error.hpp"

#include <fcntl.h>
#include <fstream>
#include <unistd.h>

namespace clawnet::runtime {

namespace fs = std::filesystem;

std::string_view to_string(MemoryLayer l) noexcept {
    switch (l) {
    case MemoryLayer::factual: return "factual";
    case MemoryLayer::pattern: return "pattern";
    case MemoryLayer::value: return "value";
    }
    return "factual";
}

std::optional<MemoryLayer> parse_memory_layer(std::string_view text) noexcept {
    for (auto l : {MemoryLayer::factual, MemoryLayer::pattern, MemoryLayer::value})
        if (to_string(l) == text) return l;
    return std::nullopt;
}

Fields MemoryEntry::to_fields() const {
    return {{"kind", "entry"},
            {"layer", std::string(to_string(layer))},
            {"key", key},
            {"value", value},
            {"created", format_utc(created)},
            {"updated", format_utc(updated)}};
}

std::optional<MemoryEntry> MemoryEntry::from_fields(const std::string& ns, const Fields& f) {
    auto layer = field(f, "layer"), key = field(f, "key"), value = field(f, "value"), created = field(f, "created"),
         updated = field(f, "updated");
    if (!layer || !key || !value || !created || !updated) return std::nullopt;
    auto l = parse_memory_layer(*layer);
    if (!l) return std::nullopt;
    MemoryEntry e;
    e.ns = ns;
    e.layer = *l;
    e.key = *key;
    e.value = *value;
    try {
        e.created = parse_utc(*created);
        e.updated = parse_utc(*updated);
    } catch (const Error&) {
        return std::nullopt;
    }
    return e;
}

MemoryStore::MemoryStore(const Clock& clock, std::optional<fs::path> dir, bool durable)
    : clock_(clock), dir_(std::move(dir)), durable_(durable) {
    if (dir_) fs::create_directories(*dir_);
}

fs::path MemoryStore::file_of(const std::string& ns) const {
    return *dir_ / (ns + ".mem");
}

void MemoryStore::load(const std::string& ns, Space& s) const {
    s.loaded = true;
    if (!dir_) return;
    auto file = file_of(ns);
    std::ifstream in(file);
    if (!in) return;
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++lines;
        auto f = parse_canonical(line);
        if (!f) fail(Errc::StorageFailure, "unreadable memory line in '" + file.string() + "'");
        auto kind = field(*f, "kind");
        if (kind == "archive") {
            s.archived = true;
            continue;
        }
        auto e = MemoryEntry::from_fields(ns, *f);
        if (!e) fail(Errc::StorageFailure, "malformed memory entry in '" + file.string() + "'");
        s.entries[{e->layer, e->key}] = std::move(*e);
    }
    in.close();
    if (lines > s.entries.size() + (s.archived ? 1 : 0)) {
        auto tmp = file;
        tmp += ".compact";
        {
            std::ofstream out(tmp, std::ios::trunc);
            for (const auto& [k, e] : s.entries) out << encode_fields(e.to_fields()) << '\n';
            if (s.archived) out << encode_fields({{"kind", "archive"}}) << '\n';
            if (!out) fail(Errc::StorageFailure, "cannot compact '" + file.string() + "'");
        }
        fs::rename(tmp, file);
    }
}

MemoryStore::Space& MemoryStore::space(const std::string& ns) const {
    if (ns.empty() || ns.find("..") != std::string::npos || ns.front() == '/')
        fail(Errc::InvalidArgument, "bad memory namespace '" + ns + "'");
    auto& s = spaces_[ns];
    if (!s.loaded) load(ns, s);
    return s;
}

void MemoryStore::persist(const std::string& ns, const Fields& line) const {
    if (!dir_) return;
    auto file = file_of(ns);
    fs::create_directories(file.parent_path());
    int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) fail(Errc::StorageFailure, "cannot open '" + file.string() + "'");
    std::string bytes = encode_fields(line) + "\n";
    auto n = ::write(fd, bytes.data(), bytes.size());
    bool ok = n == static_cast<ssize_t>(bytes.size());
    if (ok && durable_) ::fsync(fd);
    ::close(fd);
    if (!ok) fail(Errc::StorageFailure, "short write to '" + file.string() + "'");
}

MemoryEntry MemoryStore::upsert(const std::string& ns, MemoryLayer layer, const std::string& key,
                                const std::string& value) {
    if (key.empty()) fail(Errc::InvalidArgument, "memory key must not be empty");
    std::lock_guard lock(mu_);
    auto& s = space(ns);
    if (s.archived) fail(Errc::Retired, "namespace " + ns + " is archived");
    MemoryEntry e;
    auto now = clock_.now_ms();
    auto it = s.entries.find({layer, key});
    e.ns = ns;
    e.layer = layer;
    e.key = key;
    e.value = value;
    e.created = it == s.entries.end() ? now : it->second.created;
    e.updated = it == s.entries.end() ? now : std::max(now, it->second.updated + 1);
    persist(ns, e.to_fields());
    s.entries[{layer, key}] = e;
    return e;
}

std::vector<MemoryEntry> MemoryStore::entries(const std::string& ns, std::optional<MemoryLayer> layer,
                                              const std::string& key_prefix) const {
    std::lock_guard lock(mu_);
    const auto& s = space(ns);
    std::vector<MemoryEntry> out;
    for (const auto& [k, e] : s.entries) {
        if (layer && e.layer != *layer) continue;
        if (e.key.compare(0, key_prefix.size(), key_prefix) != 0) continue;
        out.push_back(e);
    }
    return out;
}

void MemoryStore::archive(const std::string& ns) {
    std::lock_guard lock(mu_);
    auto& s = space(ns);
    if (s.archived) return;
    persist(ns, {{"kind", "archive"}});
    s.archived = true;
}

bool MemoryStore::archived(const std::string& ns) const {
    std::lock_guard lock(mu_);
    return space(ns).archived;
}

std::vector<std::string> MemoryStore::namespaces() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [ns, s] : spaces_) out.push_back(ns);
    return out;
}

}  // namespace clawnet::runtime
