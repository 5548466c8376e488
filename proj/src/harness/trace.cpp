#include "clawnet/harness/trace.hpp"

#include "clawnet/common/error.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace clawnet::harness {

bool is_wall_clock_field(std::string_view key) {
    constexpr std::string_view suffix = "mtime";
    return key.rfind("wall", 0) == 0 ||
           (key.size() >= suffix.size() && key.substr(key.size() - suffix.size()) == suffix);
}

namespace {

Fields scrubbed(const TraceEvent& e) {
    Fields out;
    out.reserve(e.fields.size());
    for (const auto& [k, v] : e.fields) out.emplace_back(k, is_wall_clock_field(k) ? std::string("*") : v);
    return out;
}

std::string render(std::size_t n, const TraceEvent& e) {
    CanonicalWriter w;
    w.add("n", static_cast<long long>(n)).add("kind", e.kind).add("lane", e.lane).add_all(scrubbed(e));
    return w.take();
}

bool ignored_when_tolerant(std::string_view key) {
    static const std::set<std::string_view> keys = {"seq",      "prev",       "hash",      "msg",      "x.msg",
                                                    "x.node_seq", "b.local_seq", "local_seq", "node_seq", "b.msg"};
    return keys.count(key) != 0;
}

std::string comparable(const TraceEvent& e, DiffMode mode) {
    CanonicalWriter w;
    w.add("kind", e.kind).add("lane", e.lane);
    for (const auto& [k, v] : scrubbed(e))
        if (mode == DiffMode::strict || !ignored_when_tolerant(k)) w.add(k, v);
    return w.take();
}

// LCS edit script between two sequences of comparable keys.
void lcs_diff(const std::vector<std::string>& a, const std::vector<std::size_t>& a_idx,
              const std::vector<std::string>& b, const std::vector<std::size_t>& b_idx, const std::string& lane,
              const EventTrace& trace, const EventTrace& golden, std::vector<Difference>& out) {
    const std::size_t n = a.size(), m = b.size();
    // Trim common prefix and suffix; traces usually differ in a few places.
    std::size_t pre = 0;
    while (pre < n && pre < m && a[pre] == b[pre]) ++pre;
    std::size_t suf = 0;
    while (suf < n - pre && suf < m - pre && a[n - 1 - suf] == b[m - 1 - suf]) ++suf;
    const std::size_t N = n - pre - suf, M = m - pre - suf;
    std::vector<std::vector<std::uint32_t>> L(N + 1, std::vector<std::uint32_t>(M + 1, 0));
    for (std::size_t i = N; i-- > 0;)
        for (std::size_t j = M; j-- > 0;)
            L[i][j] = a[pre + i] == b[pre + j] ? L[i + 1][j + 1] + 1 : std::max(L[i + 1][j], L[i][j + 1]);
    std::size_t i = 0, j = 0;
    auto ins = [&](std::size_t k) {
        auto idx = a_idx[pre + k];
        out.push_back({Difference::Kind::insertion, lane, idx, render(idx, trace.events()[idx])});
    };
    auto del = [&](std::size_t k) {
        auto idx = b_idx[pre + k];
        out.push_back({Difference::Kind::deletion, lane, idx, render(idx, golden.events()[idx])});
    };
    while (i < N && j < M) {
        if (a[pre + i] == b[pre + j]) {
            ++i;
            ++j;
        } else if (L[i + 1][j] >= L[i][j + 1]) {
            ins(i++);
        } else {
            del(j++);
        }
    }
    while (i < N) ins(i++);
    while (j < M) del(j++);
}

}  // namespace

std::string EventTrace::serialize() const {
    std::string out;
    for (std::size_t i = 0; i < events_.size(); ++i) {
        out += render(i, events_[i]);
        out += '\n';
    }
    return out;
}

EventTrace EventTrace::parse(std::string_view text) {
    std::vector<TraceEvent> events;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        auto f = parse_canonical(line);
        if (!f || f->size() < 3 || (*f)[0].first != "n" || (*f)[1].first != "kind" || (*f)[2].first != "lane")
            fail(Errc::ProtocolError, "trace line " + std::to_string(line_no) + " is malformed");
        TraceEvent e;
        e.kind = (*f)[1].second;
        e.lane = (*f)[2].second;
        e.fields.assign(f->begin() + 3, f->end());
        events.push_back(std::move(e));
    }
    return EventTrace(std::move(events));
}

std::vector<std::size_t> EventTrace::find(std::string_view kind, const Fields& match) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < events_.size(); ++i) {
        const auto& e = events_[i];
        if (e.kind != kind) continue;
        bool ok = std::all_of(match.begin(), match.end(), [&](const auto& kv) {
            auto v = field(e.fields, kv.first);
            return v && *v == kv.second;
        });
        if (ok) out.push_back(i);
    }
    return out;
}

std::vector<Difference> diff_trace(const EventTrace& trace, const EventTrace& golden, DiffMode mode) {
    std::vector<Difference> out;
    if (mode == DiffMode::strict) {
        std::vector<std::string> a, b;
        std::vector<std::size_t> ai, bi;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            a.push_back(comparable(trace.events()[i], mode));
            ai.push_back(i);
        }
        for (std::size_t i = 0; i < golden.size(); ++i) {
            b.push_back(comparable(golden.events()[i], mode));
            bi.push_back(i);
        }
        lcs_diff(a, ai, b, bi, "*", trace, golden, out);
        return out;
    }
    struct Lane {
        std::vector<std::string> a, b;
        std::vector<std::size_t> ai, bi;
    };
    std::map<std::string, Lane> lanes;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        auto& l = lanes[trace.events()[i].lane];
        l.a.push_back(comparable(trace.events()[i], mode));
        l.ai.push_back(i);
    }
    for (std::size_t i = 0; i < golden.size(); ++i) {
        auto& l = lanes[golden.events()[i].lane];
        l.b.push_back(comparable(golden.events()[i], mode));
        l.bi.push_back(i);
    }
    for (auto& [name, l] : lanes) lcs_diff(l.a, l.ai, l.b, l.bi, name, trace, golden, out);
    return out;
}

std::string describe(const Difference& d) {
    return std::string(d.kind == Difference::Kind::insertion ? "+ " : "- ") + "[" + d.lane + "] " + d.line;
}

}  // namespace clawnet::harness
