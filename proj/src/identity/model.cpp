#include "clawnet/identity/model.hpp"

#include <cctype>

namespace clawnet::identity {

std::string_view to_string(ContactState s) noexcept {
    switch (s) {
        case ContactState::pending_out: return "pending_out";
        case ContactState::pending_in: return "pending_in";
        case ContactState::confirmed: return "confirmed";
    }
    return "?";
}

bool is_manager_address(std::string_view address) {
    constexpr std::string_view suffix = "/@manager";
    return address.size() > suffix.size() &&
           address.compare(address.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string slugify(std::string_view tag) {
    std::string out;
    bool dash = false;
    for (unsigned char c : tag) {
        if (std::isalnum(c)) {
            if (dash && !out.empty()) out.push_back('-');
            dash = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            dash = true;
        }
    }
    return out.empty() ? std::string("identity") : out;
}

}  // namespace clawnet::identity
