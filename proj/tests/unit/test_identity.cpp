#include "clawnet/common/error.hpp"
#include "clawnet/identity/path.hpp"
#include "clawnet/identity/registry.hpp"
#include "clawnet/identity/scope.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace clawnet;
using namespace clawnet::identity;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("normalize_path handles the lexical cases") {
    CHECK(normalize_path("/home//li/./work/") == "/home/li/work");
    CHECK(normalize_path("/home/li/work/../private/x") == "/home/li/private/x");
    CHECK(normalize_path("/") == "/");
    CHECK(normalize_path("///") == "/");
    CHECK_FALSE(normalize_path("").has_value());
    CHECK_FALSE(normalize_path("home/li").has_value());
    CHECK_FALSE(normalize_path("/..").has_value());
    CHECK_FALSE(normalize_path("/a/../..").has_value());
    CHECK_FALSE(normalize_path(std::string("/a\0b", 4)).has_value());
    CHECK_FALSE(normalize_path("/a\nb").has_value());
    CHECK_FALSE(normalize_path("/" + std::string(kMaxPathBytes, 'a')).has_value());
    CHECK(is_normalized("/home/li"));
    CHECK_FALSE(is_normalized("/home/li/"));
    CHECK_FALSE(is_normalized("/home/./li"));
}

TEST_CASE("normalize_path agrees with the segment oracle on random input") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20000; ++i) {
        auto p = oracle::random_path(rng, 8);
        INFO(p);
        CHECK(normalize_path(p) == oracle::normalize(p));
    }
}

TEST_CASE("path_within is segment-wise, not textual") {
    CHECK(path_within("/home/li", "/home/li"));
    CHECK(path_within("/home/li", "/home/li/work"));
    CHECK_FALSE(path_within("/home/li", "/home/lisa"));
    CHECK_FALSE(path_within("/home/li/work", "/home/li"));
    CHECK(path_within("/", "/anything"));
    std::mt19937_64 rng(12);
    for (int i = 0; i < 5000; ++i) {
        auto a = oracle::random_prefix(rng), b = oracle::random_prefix(rng);
        CHECK(path_within(a, b) == oracle::within(*oracle::segments(a), *oracle::segments(b)));
    }
}

TEST_CASE("scope parsing and class coverage") {
    auto s = AuthorizationScope::parse("/home/u1/work:mutative,/home/u1/docs:read_only");
    REQUIRE(s.grants().size() == 2);
    CHECK(s.permits("/home/u1/work/x", OpClass::mutative));
    CHECK(s.permits("/home/u1/work/x", OpClass::read_only));
    CHECK(s.permits("/home/u1/docs/x", OpClass::read_only));
    CHECK_FALSE(s.permits("/home/u1/docs/x", OpClass::mutative));
    CHECK(s.reaches("/home/u1/docs/x"));
    CHECK_FALSE(s.reaches("/home/u1/private"));
    CHECK(AuthorizationScope::parse(s.to_string()) == s);
    CHECK(AuthorizationScope().empty());
    CHECK_FALSE(AuthorizationScope().permits("/", OpClass::read_only));
    CHECK(code_of([] { AuthorizationScope::parse("/home/u1/../x:read_only"); }) == Errc::InvalidArgument);
    CHECK(code_of([] { AuthorizationScope::parse("/home/u1/"); }) == Errc::InvalidArgument);
    CHECK(code_of([] { AuthorizationScope::parse("/home/u1:admin"); }) == Errc::InvalidArgument);
}

TEST_CASE("slugify and manager addresses") {
    CHECK(slugify("Supplier Operations!") == "supplier-operations");
    CHECK(slugify("  work  ") == "work");
    CHECK(is_manager_address("li/@manager"));
    CHECK_FALSE(is_manager_address("li/work-1234"));
    CHECK(ManagerAgent{UserId("li")}.address() == "li/@manager");
}

TEST_CASE("create_identity examples") {
    IdGenerator ids(1);
    Registry r(ids);
    r.add_user(UserId("u1"), {"/home/u1"});
    r.add_user(UserId("u2"), {"/home/u2"});

    const auto& work = r.create_identity(UserId("u1"), "work", AuthorizationScope::parse("/home/u1/work:mutative"),
                                         {UserId("u2")});
    CHECK(work.active());
    CHECK(work.owner == UserId("u1"));
    CHECK(work.id.owner() == UserId("u1"));
    CHECK(work.id.str().rfind("u1/work-", 0) == 0);
    CHECK(work.id.str().size() == std::string("u1/work-").size() + 4);
    CHECK_FALSE(work.memory_ns.empty());

    CHECK(code_of([&] {
              r.create_identity(UserId("u1"), "x", AuthorizationScope::parse("/home/u2/secret:read_only"), {});
          }) == Errc::ScopeExceedsResources);
    CHECK(code_of([&] {
              r.create_identity(UserId("u1"), "x", AuthorizationScope::parse("/home/u1:read_only"), {UserId("u1")});
          }) == Errc::SelfInPeers);
    CHECK(code_of([&] { r.create_identity(UserId("nobody"), "x", {}, {}); }) == Errc::UnknownOwner);
    CHECK(r.invariants_hold());
}

TEST_CASE("retire_identity examples") {
    IdGenerator ids(1);
    Registry r(ids);
    r.add_user(UserId("u1"), {"/home/u1"});
    r.add_user(UserId("u2"), {"/home/u2"});
    auto id = r.create_identity(UserId("u1"), "work", {}, {}).id;
    CHECK(code_of([&] { r.retire_identity(UserId("u2"), id); }) == Errc::NotOwner);
    CHECK(r.retire_identity(UserId("u1"), id).status == IdentityStatus::retired);
    CHECK(code_of([&] { r.retire_identity(UserId("u1"), id); }) == Errc::AlreadyRetired);
    CHECK(code_of([&] { r.update_peers(UserId("u1"), id, {UserId("u2")}); }) == Errc::IdentityRetired);
}

TEST_CASE("contacts and identity assignment") {
    IdGenerator ids(1);
    Registry r(ids);
    for (auto u : {"u1", "u2", "u3"}) r.add_user(UserId(u), {std::string("/home/") + u});
    auto work = r.create_identity(UserId("u1"), "work", {}, {UserId("u2")}).id;
    auto academic = r.create_identity(UserId("u1"), "academic", {}, {UserId("u2")}).id;
    auto only3 = r.create_identity(UserId("u1"), "other", {}, {UserId("u3")}).id;

    CHECK(code_of([&] { r.assign_contact_identity(UserId("u1"), UserId("u2"), work); }) == Errc::NoConfirmedContact);
    r.request_contact(UserId("u1"), UserId("u2"));
    CHECK(r.find_user(UserId("u1"))->contacts.at(UserId("u2")).state == ContactState::pending_out);
    CHECK(r.find_user(UserId("u2"))->contacts.at(UserId("u1")).state == ContactState::pending_in);
    CHECK_FALSE(r.contacts_confirmed(UserId("u1"), UserId("u2")));
    CHECK(code_of([&] { r.request_contact(UserId("u1"), UserId("u2")); }) == Errc::DuplicateContact);
    CHECK(code_of([&] { r.confirm_contact(UserId("u1"), UserId("u2")); }) == Errc::NoContact);
    r.confirm_contact(UserId("u2"), UserId("u1"));
    CHECK(r.contacts_confirmed(UserId("u1"), UserId("u2")));
    CHECK(r.contacts_confirmed(UserId("u2"), UserId("u1")));

    r.assign_contact_identity(UserId("u1"), UserId("u2"), work);
    CHECK(r.assign_contact_identity(UserId("u1"), UserId("u2"), academic).presented_identity == academic);
    CHECK(r.find_user(UserId("u1"))->contacts.at(UserId("u2")).presented_identity == academic);
    CHECK(code_of([&] { r.assign_contact_identity(UserId("u1"), UserId("u2"), only3); }) == Errc::PeerNotPermitted);

    r.retire_identity(UserId("u1"), work);
    CHECK(code_of([&] { r.assign_contact_identity(UserId("u1"), UserId("u2"), work); }) == Errc::IdentityRetired);

    r.remove_contact(UserId("u1"), UserId("u2"));
    CHECK_FALSE(r.contacts_confirmed(UserId("u1"), UserId("u2")));
    CHECK(r.find_user(UserId("u2"))->contacts.count(UserId("u1")) == 0);
}

TEST_CASE("user roots must be normalized") {
    IdGenerator ids(1);
    Registry r(ids);
    CHECK(code_of([&] { r.add_user(UserId("u1"), {"/home/u1/../x"}); }) == Errc::InvalidArgument);
    CHECK(code_of([&] { r.add_user(UserId("a/b"), {}); }) == Errc::InvalidArgument);
    CHECK(code_of([&] { r.add_user(UserId(""), {}); }) == Errc::InvalidArgument);
    r.add_user(UserId("u1"), {"/home/u1"});
    CHECK(code_of([&] { r.add_user(UserId("u1"), {}); }) == Errc::InvalidArgument);
}

// Randomized create/mutate sequences: rejected mutations leave the store as
// it was, and every stored identity satisfies owner ∉ peers, scope within
// the owner's roots and normalized prefixes, checked here independently of
// Registry::invariants_hold.
TEST_CASE("identity invariants hold over random mutation sequences") {
    std::mt19937_64 rng(2026);
    const std::vector<std::string> users = {"u1", "u2", "u3"};
    const std::vector<std::string> prefixes = {"/home/u1",      "/home/u1/work", "/home/u2",  "/home/u2/docs",
                                               "/home/u3/a",    "/etc",          "/home/u1/", "/home/u1/../u2",
                                               "/home/u3/a/./b"};
    std::uniform_int_distribution<int> pick(0, 1000);
    auto any = [&](const auto& v) { return v[static_cast<std::size_t>(pick(rng)) % v.size()]; };

    for (int run = 0; run < 50; ++run) {
        IdGenerator ids(static_cast<std::uint64_t>(run));
        Registry r(ids);
        for (const auto& u : users) r.add_user(UserId(u), {"/home/" + u});
        std::vector<IdentityId> made;
        for (int step = 0; step < 60; ++step) {
            auto owner = UserId(any(users));
            std::set<UserId> peers;
            for (const auto& u : users)
                if (pick(rng) % 2) peers.insert(UserId(u));
            std::vector<Grant> grants;
            bool bad_prefix = false;
            for (int g = pick(rng) % 3; g > 0; --g) {
                auto p = any(prefixes);
                if (!is_normalized(p)) bad_prefix = true;
                grants.push_back({p, pick(rng) % 2 ? OpClass::mutative : OpClass::read_only});
            }
            int op = pick(rng) % 4;
            try {
                if (op == 0 || made.empty()) {
                    AuthorizationScope scope(grants);
                    made.push_back(r.create_identity(owner, "tag" + std::to_string(step), scope, peers).id);
                } else if (op == 1) {
                    r.update_scope(owner, any(made), AuthorizationScope(grants));
                } else if (op == 2) {
                    r.update_peers(owner, any(made), peers);
                } else {
                    r.retire_identity(owner, any(made));
                }
                if (op <= 1) CHECK_FALSE(bad_prefix);
            } catch (const Error&) {
            }
            for (const auto& u : users) {
                for (const auto* a : r.identities_of(UserId(u))) {
                    CHECK(a->owner == UserId(u));
                    CHECK(a->id.owner() == a->owner);
                    CHECK(a->permitted_peers.count(a->owner) == 0);
                    for (const auto& g : a->scope.grants()) {
                        auto segs = oracle::segments(g.prefix);
                        REQUIRE(segs.has_value());
                        CHECK(oracle::normalize(g.prefix) == g.prefix);
                        CHECK(oracle::within(*oracle::segments("/home/" + u), *segs));
                    }
                }
            }
            CHECK(r.invariants_hold());
        }
    }
}
