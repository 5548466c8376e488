#include "clawnet/identity/path.hpp"

#include <vector>

namespace clawnet::identity {

std::optional<std::string> normalize_path(std::string_view path) {
    if (path.empty() || path.front() != '/' || path.size() > kMaxPathBytes) return std::nullopt;
    for (unsigned char c : path)
        if (c < 0x20 || c == 0x7f) return std::nullopt;

    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (pos < path.size()) {
        while (pos < path.size() && path[pos] == '/') ++pos;
        if (pos == path.size()) break;
        auto end = path.find('/', pos);
        if (end == std::string_view::npos) end = path.size();
        std::string_view seg = path.substr(pos, end - pos);
        pos = end;
        if (seg == ".") continue;
        if (seg == "..") {
            if (parts.empty()) return std::nullopt;
            parts.pop_back();
            continue;
        }
        parts.push_back(seg);
    }

    if (parts.empty()) return std::string("/");
    std::string out;
    for (auto seg : parts) {
        out.push_back('/');
        out.append(seg);
    }
    return out;
}

bool is_normalized(std::string_view path) {
    auto n = normalize_path(path);
    return n && *n == path;
}

bool path_within(std::string_view prefix, std::string_view path) {
    if (prefix == "/") return !path.empty() && path.front() == '/';
    if (path.size() < prefix.size() || path.compare(0, prefix.size(), prefix) != 0) return false;
    return path.size() == prefix.size() || path[prefix.size()] == '/';
}

}  // namespace clawnet::identity
