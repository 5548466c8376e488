#include "clawnet/common/canonical.hpp"

#include <charconv>

namespace clawnet {

namespace {

bool valid_key_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
}

}  // namespace

std::string escape_value(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::optional<std::string> unescape_value(std::string_view escaped) {
    std::string out;
    out.reserve(escaped.size());
    for (std::size_t i = 0; i < escaped.size(); ++i) {
        char c = escaped[i];
        if (c == '\n' || c == '\r') return std::nullopt;
        if (c != '\\') {
            out.push_back(c);
            continue;
        }
        if (++i == escaped.size()) return std::nullopt;
        switch (escaped[i]) {
            case '\\': out.push_back('\\'); break;
            case 'n': out.push_back('\n'); break;
            case 'r': out.push_back('\r'); break;
            default: return std::nullopt;
        }
    }
    return out;
}

CanonicalWriter& CanonicalWriter::add(std::string_view key, std::string_view value) {
    std::string esc = escape_value(value);
    if (!out_.empty()) out_.push_back(' ');
    out_.append(key);
    out_.push_back('=');
    out_ += std::to_string(esc.size());
    out_.push_back(':');
    out_ += esc;
    return *this;
}

CanonicalWriter& CanonicalWriter::add(std::string_view key, long long value) {
    return add(key, std::to_string(value));
}

CanonicalWriter& CanonicalWriter::add_all(const Fields& fields) {
    for (const auto& [k, v] : fields) add(k, v);
    return *this;
}

std::optional<Fields> parse_canonical(std::string_view line) {
    Fields out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        if (!out.empty()) {
            if (line[pos] != ' ') return std::nullopt;
            ++pos;
        }
        auto eq = line.find('=', pos);
        if (eq == std::string_view::npos || eq == pos) return std::nullopt;
        std::string_view key = line.substr(pos, eq - pos);
        for (char c : key)
            if (!valid_key_char(c)) return std::nullopt;
        auto colon = line.find(':', eq + 1);
        if (colon == std::string_view::npos || colon == eq + 1) return std::nullopt;
        std::string_view len_text = line.substr(eq + 1, colon - eq - 1);
        if (len_text.size() > 1 && len_text[0] == '0') return std::nullopt;
        std::size_t len = 0;
        auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
        if (ec != std::errc() || ptr != len_text.data() + len_text.size()) return std::nullopt;
        std::size_t vstart = colon + 1;
        if (len > line.size() - vstart) return std::nullopt;
        auto value = unescape_value(line.substr(vstart, len));
        if (!value) return std::nullopt;
        out.emplace_back(std::string(key), std::move(*value));
        pos = vstart + len;
    }
    if (out.empty()) return std::nullopt;
    // Escaping is not unique for arbitrary input; reject anything that does
    // not re-encode to the identical bytes.
    if (encode_fields(out) != line) return std::nullopt;
    return out;
}

std::string encode_fields(const Fields& fields) {
    CanonicalWriter w;
    w.add_all(fields);
    return w.take();
}

std::optional<std::string> field(const Fields& fields, std::string_view key) {
    for (const auto& [k, v] : fields)
        if (k == key) return v;
    return std::nullopt;
}

}  // namespace clawnet
