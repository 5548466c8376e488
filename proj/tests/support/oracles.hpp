#pragma once

// Reference implementations written independently of the library code:
// they share no helpers with it except sha256.

#include "clawnet/common/digest.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

/// Path segments after lexical normalization; nullopt when the path is
/// relative, empty, holds a control byte, is longer than 4096 bytes or
/// climbs above the root.
inline std::optional<std::vector<std::string>> segments(const std::string& path) {
    if (path.empty() || path[0] != '/' || path.size() > 4096) return std::nullopt;
    for (char ch : path) {
        auto c = static_cast<unsigned char>(ch);
        if (c < 32 || c == 127) return std::nullopt;
    }
    std::vector<std::string> out;
    std::istringstream in(path);
    std::string seg;
    while (std::getline(in, seg, '/')) {
        if (seg.empty() || seg == ".") continue;
        if (seg == "..") {
            if (out.empty()) return std::nullopt;
            out.pop_back();
        } else {
            out.push_back(seg);
        }
    }
    return out;
}

inline std::optional<std::string> normalize(const std::string& path) {
    auto s = segments(path);
    if (!s) return std::nullopt;
    if (s->empty()) return std::string("/");
    std::string r;
    for (const auto& x : *s) r += "/" + x;
    return r;
}

/// Segment-wise prefix test.
inline bool within(const std::vector<std::string>& prefix, const std::vector<std::string>& path) {
    if (prefix.size() > path.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (prefix[i] != path[i]) return false;
    return true;
}

struct OGrant {
    std::string prefix;
    bool mutative = false;
};

enum class Verdict { allow, out_of_scope, class_insufficient, malformed_path };

/// Brute force: enumerate every ancestor of each normalized target and look
/// for a grant equal to it with a covering class.
inline Verdict l1(const std::vector<std::string>& targets, bool needs_mutative, const std::vector<OGrant>& grants) {
    for (const auto& t : targets) {
        auto segs = segments(t);
        if (!segs) return Verdict::malformed_path;
        bool reached = false, covered = false;
        for (std::size_t depth = 0; depth <= segs->size(); ++depth) {
            std::vector<std::string> ancestor(segs->begin(), segs->begin() + static_cast<std::ptrdiff_t>(depth));
            for (const auto& g : grants) {
                auto gs = segments(g.prefix);
                if (!gs || *gs != ancestor) continue;
                reached = true;
                if (g.mutative || !needs_mutative) covered = true;
            }
        }
        if (!covered) return reached ? Verdict::class_insufficient : Verdict::out_of_scope;
    }
    return Verdict::allow;
}

/// First broken line of a serialized hash-chained log, recomputed from raw
/// bytes: every line must end in ` hash=64:<sha256 of the rest>`, start with
/// `seq=<len>:<index>` and carry `prev=64:<previous hash>` right before the
/// hash. nullopt when intact.
inline std::optional<std::uint64_t> first_break(const std::string& content) {
    std::string prev(64, '0');
    std::uint64_t index = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string::npos) return index;
        std::string line = content.substr(pos, nl - pos);
        pos = nl + 1;
        const std::string tag = " hash=64:";
        if (line.size() < tag.size() + 64) return index;
        std::string body = line.substr(0, line.size() - 64 - tag.size());
        if (line.compare(body.size(), tag.size(), tag) != 0) return index;
        std::string hash = line.substr(line.size() - 64);
        if (clawnet::sha256_hex(body) != hash) return index;
        auto seq = std::to_string(index);
        if (body.rfind("seq=" + std::to_string(seq.size()) + ":" + seq + " ", 0) != 0) return index;
        std::string prev_tok = "prev=64:" + prev;
        if (body.size() < prev_tok.size() || body.compare(body.size() - prev_tok.size(), prev_tok.size(), prev_tok))
            return index;
        prev = hash;
        ++index;
    }
    return std::nullopt;
}

/// Full snapshot of a directory: relative path -> "f:<bytes>", "d" or
/// "l:<target>". Compared with == so any byte difference shows up.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::map<std::string, std::string> out;
    if (!fs::exists(fs::symlink_status(root))) return out;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        auto rel = fs::relative(it->path(), root).string();
        auto st = it->symlink_status();
        if (fs::is_symlink(st)) {
            out[rel] = "l:" + fs::read_symlink(it->path()).string();
        } else if (fs::is_directory(st)) {
            out[rel] = "d";
        } else {
            std::ifstream in(it->path(), std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            out[rel] = "f:" + ss.str();
        }
    }
    return out;
}

/// Context filter re-implementation: a key is relevant when the lowercased
/// question contains it, or when it shares a lowercase alphanumeric token
/// with the question or the context tag.
inline bool relevant(const std::string& key, const std::string& question, const std::string& tag) {
    auto lower = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    auto toks = [&](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : lower(s) + " ") {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                cur += c;
            } else if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        }
        return out;
    };
    if (!key.empty() && lower(question).find(lower(key)) != std::string::npos) return true;
    for (const auto& k : toks(key)) {
        for (const auto& q : toks(question))
            if (k == q) return true;
        for (const auto& t : toks(tag))
            if (k == t) return true;
    }
    return false;
}

/// Random absolute-ish paths over a small alphabet so that collisions with
/// grant prefixes are frequent; includes `.`, `..`, doubled separators and
/// occasional malformed inputs.
inline std::string random_path(std::mt19937_64& rng, std::size_t max_segments = 6) {
    static const std::vector<std::string> words = {"home", "u1", "u2", "work", "docs", "a", "b", ".", "..", ""};
    std::uniform_int_distribution<std::size_t> nseg(0, max_segments), word(0, words.size() - 1);
    std::uniform_int_distribution<int> pct(0, 99);
    std::string p;
    int roll = pct(rng);
    if (roll < 3) return "";
    if (roll < 6) p = "home";  // relative
    std::size_t n = nseg(rng);
    for (std::size_t i = 0; i < n; ++i) p += "/" + words[word(rng)];
    if (p.empty()) p = "/";
    if (pct(rng) < 3) p += '\x01';
    if (pct(rng) < 10) p += "/";
    return p;
}

/// Normalized random prefix (grant or whitelist entry).
inline std::string random_prefix(std::mt19937_64& rng) {
    static const std::vector<std::string> words = {"home", "u1", "u2", "work", "docs", "a", "b"};
    std::uniform_int_distribution<std::size_t> nseg(0, 4), word(0, words.size() - 1);
    std::string p;
    std::size_t n = nseg(rng);
    for (std::size_t i = 0; i < n; ++i) p += "/" + words[word(rng)];
    return p.empty() ? "/" : p;
}

}  // namespace oracle
