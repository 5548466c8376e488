#include "clawnet/identity/scope.hpp"

#include "clawnet/common/error.hpp"
#include "clawnet/identity/path.hpp"

namespace clawnet::identity {

std::string_view to_string(OpClass c) noexcept {
    return c == OpClass::mutative ? "mutative" : "read_only";
}

std::optional<OpClass> parse_op_class(std::string_view text) noexcept {
    if (text == "read_only" || text == "ro") return OpClass::read_only;
    if (text == "mutative" || text == "rw") return OpClass::mutative;
    return std::nullopt;
}

AuthorizationScope::AuthorizationScope(std::vector<Grant> grants) : grants_(std::move(grants)) {
    for (const auto& g : grants_) {
        if (!is_normalized(g.prefix))
            fail(Errc::InvalidArgument, "grant prefix '" + g.prefix + "' is not a normalized absolute path");
    }
}

AuthorizationScope AuthorizationScope::parse(std::string_view text) {
    std::vector<Grant> grants;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        std::string_view item = text.substr(pos, comma - pos);
        pos = comma + 1;
        if (item.empty()) continue;
        auto colon = item.rfind(':');
        if (colon == std::string_view::npos)
            fail(Errc::InvalidArgument, "grant '" + std::string(item) + "' lacks ':class'");
        auto cls = parse_op_class(item.substr(colon + 1));
        if (!cls) fail(Errc::InvalidArgument, "unknown operation class in '" + std::string(item) + "'");
        grants.push_back({std::string(item.substr(0, colon)), *cls});
    }
    return AuthorizationScope(std::move(grants));
}

bool AuthorizationScope::permits(std::string_view path, OpClass needed) const {
    for (const auto& g : grants_)
        if (path_within(g.prefix, path) && covers(g.op_class, needed)) return true;
    return false;
}

bool AuthorizationScope::reaches(std::string_view path) const {
    for (const auto& g : grants_)
        if (path_within(g.prefix, path)) return true;
    return false;
}

bool AuthorizationScope::within(const std::vector<std::string>& roots) const {
    for (const auto& g : grants_) {
        bool inside = false;
        for (const auto& r : roots)
            if (path_within(r, g.prefix)) inside = true;
        if (!inside) return false;
    }
    return true;
}

std::string AuthorizationScope::to_string() const {
    std::string out;
    for (const auto& g : grants_) {
        if (!out.empty()) out.push_back(',');
        out += g.prefix;
        out.push_back(':');
        out += identity::to_string(g.op_class);
    }
    return out;
}

}  // namespace clawnet::identity
