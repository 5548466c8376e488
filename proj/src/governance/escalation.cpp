#include "clawnet/governance/escalation.hpp"

#include "clawnet/common/error.hpp"

#include <fstream>

namespace clawnet::governance {

std::string_view to_string(ViolatedLayer l) noexcept {
    switch (l) {
        case ViolatedLayer::L1: return "L1";
        case ViolatedLayer::L2: return "L2";
        case ViolatedLayer::routing: return "routing";
        case ViolatedLayer::session: return "session";
    }
    return "?";
}

std::optional<ViolatedLayer> parse_violated_layer(std::string_view text) noexcept {
    for (auto l : {ViolatedLayer::L1, ViolatedLayer::L2, ViolatedLayer::routing, ViolatedLayer::session})
        if (to_string(l) == text) return l;
    return std::nullopt;
}

Fields EscalationEvent::to_fields() const {
    Fields f{{"event", event_id},
             {"owner", owner.str()},
             {"identity", identity.str()},
             {"layer", std::string(to_string(layer))},
             {"action", action}};
    for (const auto& t : targets) f.emplace_back("target", t);
    f.emplace_back("session", session ? session->str() : std::string());
    f.emplace_back("reason", reason);
    f.emplace_back("ts", format_utc(timestamp));
    return f;
}

std::optional<EscalationEvent> EscalationEvent::from_fields(const Fields& f) {
    EscalationEvent e;
    try {
        for (const auto& [k, v] : f) {
            if (k == "event") e.event_id = v;
            else if (k == "owner") e.owner = UserId(v);
            else if (k == "identity") e.identity = IdentityId(v);
            else if (k == "layer") {
                auto l = parse_violated_layer(v);
                if (!l) return std::nullopt;
                e.layer = *l;
            } else if (k == "action") e.action = v;
            else if (k == "target") e.targets.push_back(v);
            else if (k == "session") {
                if (!v.empty()) e.session = SessionId(v);
            } else if (k == "reason") e.reason = v;
            else if (k == "ts") e.timestamp = parse_utc(v);
        }
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (e.event_id.empty() || e.owner.empty()) return std::nullopt;
    return e;
}

SecurityEventCenter::SecurityEventCenter(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (!dir_) return;
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    for (const auto& entry : std::filesystem::directory_iterator(*dir_, ec)) {
        if (entry.path().extension() != ".events") continue;
        std::ifstream in(entry.path());
        std::string line;
        while (std::getline(in, line)) {
            auto f = parse_canonical(line);
            if (!f || f->empty()) continue;
            auto kind = field(*f, "kind");
            if (kind == "event") {
                if (auto e = EscalationEvent::from_fields(*f)) {
                    auto& feed = feeds_[e->owner];
                    feed.push_back(*e);
                    order_.emplace_back(e->owner, feed.size() - 1);
                }
            } else if (kind == "ack") {
                auto owner = field(*f, "owner");
                auto id = field(*f, "event");
                if (!owner || !id) continue;
                for (auto& e : feeds_[UserId(*owner)])
                    if (e.event_id == *id) e.acknowledged = true;
            }
        }
    }
}

void SecurityEventCenter::persist(const UserId& owner, const Fields& line) {
    if (!dir_) return;
    std::ofstream out(*dir_ / (owner.str() + ".events"), std::ios::app);
    out << encode_fields(line) << '\n';
    out.flush();
    if (!out) fail(Errc::StorageFailure, "cannot persist security event for '" + owner.str() + "'");
}

EscalationEvent SecurityEventCenter::push(EscalationEvent event) {
    std::lock_guard lock(mu_);
    Fields line{{"kind", "event"}};
    auto f = event.to_fields();
    line.insert(line.end(), f.begin(), f.end());
    persist(event.owner, line);
    auto& feed = feeds_[event.owner];
    feed.push_back(event);
    order_.emplace_back(event.owner, feed.size() - 1);
    return event;
}

EscalationEvent SecurityEventCenter::acknowledge(const UserId& owner, const std::string& event_id) {
    std::lock_guard lock(mu_);
    auto it = feeds_.find(owner);
    if (it != feeds_.end()) {
        for (auto& e : it->second) {
            if (e.event_id != event_id) continue;
            if (!e.acknowledged) {
                persist(owner, {{"kind", "ack"}, {"owner", owner.str()}, {"event", event_id}});
                e.acknowledged = true;
            }
            return e;
        }
    }
    fail(Errc::NotFound, "no escalation '" + event_id + "' for '" + owner.str() + "'");
}

std::vector<EscalationEvent> SecurityEventCenter::feed(const UserId& owner) const {
    std::lock_guard lock(mu_);
    auto it = feeds_.find(owner);
    return it == feeds_.end() ? std::vector<EscalationEvent>{} : it->second;
}

std::vector<EscalationEvent> SecurityEventCenter::all() const {
    std::lock_guard lock(mu_);
    std::vector<EscalationEvent> out;
    for (const auto& [owner, idx] : order_) out.push_back(feeds_.at(owner)[idx]);
    return out;
}

std::size_t SecurityEventCenter::count(const UserId& owner, ViolatedLayer layer) const {
    std::lock_guard lock(mu_);
    auto it = feeds_.find(owner);
    if (it == feeds_.end()) return 0;
    std::size_t n = 0;
    for (const auto& e : it->second)
        if (e.layer == layer) ++n;
    return n;
}

}  // namespace clawnet::governance
