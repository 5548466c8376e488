#pragma once

#include "clawnet/common/canonical.hpp"
#include "clawnet/common/clock.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace clawnet::runtime {

enum class MemoryLayer { factual, pattern, value };

std::string_view to_string(MemoryLayer l) noexcept;
std::optional<MemoryLayer> parse_memory_layer(std::string_view text) noexcept;

struct MemoryEntry {
    std::string ns;
    MemoryLayer layer = MemoryLayer::factual;
    std::string key;
    std::string value;
    Millis created = 0;
    Millis updated = 0;

    Fields to_fields() const;
    static std::optional<MemoryEntry> from_fields(const std::string& ns, const Fields& f);

    friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

/// Three-layer key/value memory, one namespace per identity. With a
/// directory each namespace is the file `<dir>/<ns>.mem`: canonical lines,
/// appended on every write, last write wins on load. Files with superseded
/// lines are compacted when loaded.
class MemoryStore {
public:
    explicit MemoryStore(const Clock& clock, std::optional<std::filesystem::path> dir = std::nullopt,
                         bool durable = true);

    /// Upsert by (ns, layer, key); `created` is kept, `updated` advances.
    MemoryEntry upsert(const std::string& ns, MemoryLayer layer, const std::string& key, const std::string& value);

    /// Ordered by (layer, key).
    std::vector<MemoryEntry> entries(const std::string& ns, std::optional<MemoryLayer> layer = std::nullopt,
                                     const std::string& key_prefix = {}) const;

    /// Marks the namespace read-only (the identity was retired).
    void archive(const std::string& ns);
    bool archived(const std::string& ns) const;

    std::vector<std::string> namespaces() const;

private:
    using Key = std::tuple<MemoryLayer, std::string>;
    struct Space {
        std::map<Key, MemoryEntry> entries;
        bool archived = false;
        bool loaded = false;
    };

    Space& space(const std::string& ns) const;
    void load(const std::string& ns, Space& s) const;
    void persist(const std::string& ns, const Fields& line) const;
    std::filesystem::path file_of(const std::string& ns) const;

    const Clock& clock_;
    std::optional<std::filesystem::path> dir_;
    bool durable_;
    mutable std::mutex mu_;
    mutable std::map<std::string, Space> spaces_;
};

}  // namespace clawnet::runtime
